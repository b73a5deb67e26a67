import hashlib
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_array_equal

from copulaboost import io, simgen
from copulaboost.engine import BoostConfig, copula_spec, fit, univariate_spec
from copulaboost.errors import DataError


@pytest.fixture(scope="module")
def data():
    return simgen.generate(simgen.Scenario(n=250, p=4, copula="Clayton", seed=3))


@pytest.fixture(scope="module")
def model(data):
    return fit(copula_spec("LogNormal", "LogLogistic", "Clayton", linear=(3,)), data,
               BoostConfig(step_length=0.1, mstop=80))


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


# -- tables -------------------------------------------------------------------------------

def test_dataset_round_trip(tmp_path, data):
    io.write_dataset(tmp_path / "d.csv", data)
    back = io.read_dataset(tmp_path / "d.csv")
    assert back.names == data.names
    assert_array_equal(back.X, data.X)
    for a, b in zip(back.y, data.y):
        assert_array_equal(a, b)


def test_write_table_shortest_repr(tmp_path):
    io.write_table(tmp_path / "t.csv", ["a", "b"], [np.array([0.1, 1 / 3]), np.array(["x", "y"], dtype=object)])
    assert (tmp_path / "t.csv").read_text() == "a,b\n0.1,x\n0.3333333333333333,y\n"


@pytest.mark.parametrize("text, match", [
    ("", "empty"),
    ("y1,y2,x1\n", "no data rows"),
    ("y1,y2,x1\n1,2,3\n1,2\n", r":3: expected 3 fields, found 2"),
    ("y1,y2,x1\n1,2,abc\n", r":2: non-numeric value 'abc' in column 'x1'"),
    ("y1,y2,x1\n1,2,3\n1,NA,3\n", r":3: missing value in column 'y2'"),
    ("y1,y2,x1\n1,2,inf\n", r":2: non-finite value in column 'x1'"),
    ("y1,y1,x1\n1,2,3\n", "duplicate column"),
])
def test_read_table_errors_with_context(tmp_path, text, match):
    with pytest.raises(DataError, match=match):
        io.read_table(write(tmp_path / "bad.csv", text))


def test_read_dataset_errors(tmp_path):
    p = write(tmp_path / "d.csv", "y1,y2,x1\n1,2,3\n1,-2,3\n")
    with pytest.raises(DataError, match=r":3: response 'y2' must be strictly positive"):
        io.read_dataset(p)
    with pytest.raises(DataError, match="response column 'z' not found"):
        io.read_dataset(p, ("y1", "z"))
    with pytest.raises(DataError, match="covariate column"):
        io.read_dataset(write(tmp_path / "e.csv", "y1,y2,x1\n1,2,3\n"), covariates=["x9"])
    with pytest.raises(DataError, match="cannot open"):
        io.read_table(tmp_path / "missing.csv")


def test_read_dataset_drop_and_binary(tmp_path):
    p = write(tmp_path / "d.csv", "y1,y2,x1,sex,label\n1,2,0.3,0,1\n2,1,0.1,1,0\n3,1,0.2,1,0\n")
    d = io.read_dataset(p, drop=("label",))
    assert d.names == ["x1", "sex"]
    assert io.binary_columns(d) == (1,)


# -- model files ------------------------------------------------------------------------

def test_model_round_trip_predictions(tmp_path, model, data):
    io.save_model(model, tmp_path / "m.json")
    back = io.load_model(tmp_path / "m.json")
    X = simgen.generate(simgen.Scenario(n=300, p=4, copula="Clayton", seed=8)).X
    a, b = model.predict_params(X), back.predict_params(X)
    for name in model.param_names:
        assert np.max(np.abs(a[name] - b[name])) <= 1e-12
        assert_array_equal(a[name], b[name])
    assert back.selection_log == model.selection_log
    assert_array_equal(back.risk_path, model.risk_path)
    assert_array_equal(back.loss(data), model.loss(data))
    assert io.dumps_model(back) == io.dumps_model(model)


def test_model_file_contents(model):
    d = json.loads(io.dumps_model(model))
    assert d["schema"] == io.MODEL_SCHEMA and d["schema_version"] == io.MODEL_SCHEMA_VERSION
    assert len(d["selection_log"]) == 80 and len(d["risk_path"]) == 81
    coef = d["states"][0]["coefs"][0][1][0]
    st = model.states[0]
    assert coef == float(st.coefs[min(st.coefs)][0])


def test_refit_gives_identical_digest(tmp_path, data):
    spec = copula_spec()
    cfg = BoostConfig(step_length=0.1, mstop=40)
    for name in ("a", "b"):
        io.save_model(fit(spec, data, cfg), tmp_path / f"{name}.json")
    digest = [hashlib.sha256((tmp_path / f"{n}.json").read_bytes()).hexdigest() for n in "ab"]
    assert digest[0] == digest[1]


def test_univariate_round_trip(tmp_path, data):
    m = fit(univariate_spec("Weibull"), data.response(0), BoostConfig(step_length=0.1, mstop=30))
    io.save_model(m, tmp_path / "u.json")
    back = io.load_model(tmp_path / "u.json")
    assert_array_equal(back.predict_eta(data.X), m.predict_eta(data.X))


def test_bad_model_files(tmp_path, model):
    with pytest.raises(DataError, match="invalid JSON"):
        io.load_model(write(tmp_path / "a.json", "{not json"))
    with pytest.raises(DataError, match="not a copulaboost model"):
        io.load_model(write(tmp_path / "b.json", "{}"))
    d = json.loads(io.dumps_model(model))
    d["schema_version"] = 99
    with pytest.raises(DataError, match="schema version"):
        io.load_model(write(tmp_path / "c.json", json.dumps(d)))
    d = json.loads(io.dumps_model(model))
    del d["states"]
    with pytest.raises(DataError, match="malformed"):
        io.load_model(write(tmp_path / "d.json", json.dumps(d)))


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), mstop=st.integers(0, 40),
       copula=st.sampled_from(["Gaussian", "Clayton", "Gumbel"]))
def test_round_trip_property(seed, mstop, copula):
    d = simgen.generate(simgen.Scenario(n=120, p=4, copula=copula, seed=seed))
    m = fit(copula_spec(copula=copula), d, BoostConfig(step_length=0.1, mstop=mstop))
    back = io.model_from_dict(json.loads(io.dumps_model(m)))
    a, b = m.predict_eta(d.X), back.predict_eta(d.X)
    assert np.max(np.abs(a - b)) <= 1e-12
