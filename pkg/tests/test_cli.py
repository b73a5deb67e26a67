import csv
import json

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from copulaboost import cli, io, scoring, simgen, tuning
from copulaboost.engine import BoostConfig, copula_spec
from copulaboost.errors import NumericalError


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def sim(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    assert run("simulate", "--out", d, "--n", 300, "--n-validation", 300, "--n-test", 200, "--p", 5,
               "--seed", 7) == 0
    return d


@pytest.fixture(scope="module")
def model(sim):
    path = sim / "model.json"
    assert run("fit", sim / "train.csv", "--out", path, "--validation", sim / "validation.csv",
               "--m-max", 300, "--step-length", 0.05) == 0
    return path


def read(path):
    header, table = io.read_table(path)
    return dict(zip(header, table.T))


def one_line_error(capsys):
    err = capsys.readouterr().err.strip()
    assert err and "\n" not in err and "Traceback" not in err
    return err


# -- simulate ---------------------------------------------------------------------------

def test_simulate_layout_and_manifest(sim):
    assert {p.name for p in sim.iterdir()} >= {"train.csv", "validation.csv", "test.csv", "manifest.json"}
    m = json.loads((sim / "manifest.json").read_text())
    assert m["seed"] == 7 and m["sizes"] == {"train": 300, "validation": 300, "test": 200}
    assert set(m["truth_functions"]) >= {"mu1", "theta"}
    header, X = io.read_table(sim / "train.csv")
    assert header == ["y1", "y2", "x1", "x2", "x3", "x4", "x5"] and X.shape == (300, 7)


def test_simulate_defaults(tmp_path):
    assert run("simulate", "--out", tmp_path) == 0
    assert io.read_table(tmp_path / "train.csv")[1].shape == (1000, 22)
    assert io.read_table(tmp_path / "validation.csv")[1].shape == (1500, 22)
    assert not (tmp_path / "test.csv").exists()


def test_simulate_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert run("simulate", "--out", tmp_path / name, "--n", 50, "--n-validation", 20, "--p", 4,
                   "--replicates", 2, "--seed", 3) == 0
    for rep in ("rep001", "rep002"):
        for f in ("train.csv", "validation.csv"):
            assert (tmp_path / "a" / rep / f).read_bytes() == (tmp_path / "b" / rep / f).read_bytes()
    assert (tmp_path / "a/rep001/train.csv").read_bytes() != (tmp_path / "a/rep002/train.csv").read_bytes()


def test_simulate_matches_library(tmp_path):
    assert run("simulate", "--out", tmp_path, "--n", 80, "--n-validation", 30, "--p", 4,
               "--independence", "--copula", "Clayton", "--seed", 5) == 0
    scn = simgen.Scenario(p=4, copula="Clayton", independence=True, seed=5)
    for name, data in zip(("train", "validation"), simgen.generate_split(scn, (80, 30))):
        io.write_dataset(tmp_path / f"ref_{name}.csv", data)
        assert (tmp_path / f"{name}.csv").read_bytes() == (tmp_path / f"ref_{name}.csv").read_bytes()
    assert json.loads((tmp_path / "manifest.json").read_text())["scenario"]["independence"] is True


# -- fit / predict ----------------------------------------------------------------------

def test_fit_mstop_zero_has_empty_log(sim, tmp_path):
    assert run("fit", sim / "train.csv", "--out", tmp_path / "m.json", "--mstop", 0) == 0
    d = json.loads((tmp_path / "m.json").read_text())
    assert d["selection_log"] == []
    assert run("predict", tmp_path / "m.json", sim / "test.csv", "--out", tmp_path / "p.csv") == 0
    p = read(tmp_path / "p.csv")
    for col in p.values():
        assert np.all(col == col[0])


def test_fit_refit_identical_digest(sim, tmp_path):
    for name in ("a", "b"):
        assert run("fit", sim / "train.csv", "--out", tmp_path / f"{name}.json", "--mstop", 50,
                   "--step-length", 0.1) == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_fit_report_and_plots(sim, tmp_path, capsys):
    pytest.importorskip("matplotlib")
    assert run("fit", sim / "train.csv", "--out", tmp_path / "m.json", "--validation", sim / "validation.csv",
               "--m-max", 100, "--step-length", 0.05, "--report-dir", tmp_path / "rep", "--plots") == 0
    out = capsys.readouterr().out
    assert "tuned mstop" in out and "theta" in out
    names = {p.name for p in (tmp_path / "rep").iterdir()}
    assert names == {"selection.csv", "effects.csv", "risk_path.csv", "tuning_curve.csv", "effects.png",
                     "risk_path.png"}


def test_fit_equals_library(sim, model):
    fit = io.load_model(model)
    train = io.read_dataset(sim / "train.csv")
    val = io.read_dataset(sim / "validation.csv")
    ref, curve = tuning.tuned_fit(copula_spec(), train, BoostConfig(step_length=0.05), validation=val, m_max=300)
    assert fit.mstop == curve.argmin
    assert_array_equal(fit.predict_eta(val.X), ref.predict_eta(val.X))


def test_predict_columns(sim, model, tmp_path):
    assert run("predict", model, sim / "test.csv", "--out", tmp_path / "p.csv", "--thresholds", 1.0, 2.0) == 0
    p = read(tmp_path / "p.csv")
    fit = io.load_model(model)
    X = io.read_dataset(sim / "test.csv").X
    params = fit.predict_params(X)
    for name in fit.param_names:
        assert_array_equal(p[name], params[name])
    assert_array_equal(p["tau"], fit.likelihood.copula.kendall_tau(p["theta"]))
    assert_allclose(p["exceedance"], scoring.joint_exceedance(fit, X, 1.0, 2.0), rtol=0, atol=1e-12)
    assert_allclose(p["mean1"], np.exp(p["mu1"] + p["sigma1"] ** 2 / 2), rtol=1e-12)
    ll = p["sigma2"] > 1
    assert np.all(np.isnan(p["mean2"][~ll])) and np.all(np.isfinite(p["mean2"][ll]))


def test_predict_independence_thresholds(sim, tmp_path):
    assert run("fit", sim / "train.csv", "--out", tmp_path / "m.json", "--mstop", 40, "--step-length", 0.1,
               "--copula", "Clayton") == 0
    fit = io.load_model(tmp_path / "m.json")
    # zero copula predictor: Clayton theta = exp(eta) must be moved to independence explicitly
    d = json.loads((tmp_path / "m.json").read_text())
    d["states"][4] = {"name": "theta", "offset": -40.0, "coefs": []}
    (tmp_path / "i.json").write_text(json.dumps(d))
    assert run("predict", tmp_path / "i.json", sim / "test.csv", "--out", tmp_path / "p.csv",
               "--thresholds", 1.0, 2.0) == 0
    p = read(tmp_path / "p.csv")
    m1, m2 = fit.likelihood.margins
    ref = (1 - m1.cdf(1.0, p["mu1"], p["sigma1"])) * (1 - m2.cdf(2.0, p["mu2"], p["sigma2"]))
    assert_allclose(p["exceedance"], ref, rtol=0, atol=1e-12)


# -- cv / score / select ----------------------------------------------------------------

def test_cv_outputs(sim, tmp_path):
    assert run("cv", sim / "train.csv", "--folds", 3, "--m-max", 30, "--step-length", 0.1,
               "--out", tmp_path / "c.csv", "--folds-out", tmp_path / "f.csv") == 0
    c, f = read(tmp_path / "c.csv"), read(tmp_path / "f.csv")
    assert c["iteration"].size == 31 and {"fold1", "fold2", "fold3"} <= set(c)
    assert_array_equal(np.unique(f["fold"]), [1, 2, 3])
    train = io.read_dataset(sim / "train.csv")
    curve = tuning.tune_mstop_cv(copula_spec(), train, BoostConfig(step_length=0.1), 3, 30, seed=0)
    assert_array_equal(c["risk"], curve.risk)


def test_score_equals_library(sim, model, tmp_path):
    for d in (1, 2):
        assert run("fit", sim / "train.csv", "--out", tmp_path / f"u{d}.json", "--univariate", d,
                   "--mstop", 60, "--step-length", 0.1) == 0
    assert run("score", sim / "test.csv", "--model", model, "--independent", tmp_path / "u1.json",
               tmp_path / "u2.json", "--n-samples", 50, "--seed", 4, "--thresholds", 1.0, 2.0,
               "--out", tmp_path / "s.csv", "--roc-out", tmp_path / "roc.csv") == 0
    text = (tmp_path / "s.csv").read_text().splitlines()
    header = text[0].split(",")
    test = io.read_dataset(sim / "test.csv")
    fits = [io.load_model(model),
            scoring.IndependentFit(io.load_model(tmp_path / "u1.json"), io.load_model(tmp_path / "u2.json"))]
    labels = ((test.y[0] > 1.0) & (test.y[1] > 2.0)).astype(int)
    for line, fit in zip(text[1:], fits):
        row = dict(zip(header, line.split(",")))
        assert abs(float(row["log_score"]) - scoring.log_score(fit, test)) <= 1e-12
        assert abs(float(row["predictive_risk"]) - tuning.predictive_risk(fit, test)) <= 1e-12
        assert abs(float(row["energy_score"]) - scoring.energy_score(fit, test, 50, 4)) <= 1e-12
        auc = scoring.auc(scoring.joint_exceedance(fit, test.X, 1.0, 2.0), labels)
        assert abs(float(row["auc"]) - auc) <= 1e-12
    with open(tmp_path / "roc.csv") as fh:
        roc = list(csv.DictReader(fh))
    assert roc[0]["threshold"] == "inf" and float(roc[0]["fpr"]) == 0 and float(roc[-1]["tpr"]) == 1


def test_score_label_column(sim, model, tmp_path):
    test = io.read_dataset(sim / "test.csv")
    lab = ((test.y[0] > 1.0) & (test.y[1] > 2.0)).astype(int)
    io.write_table(tmp_path / "t.csv", ["y1", "y2", *test.names, "label"],
                   [*test.y, *test.X.T, lab.astype(object)])
    assert run("score", tmp_path / "t.csv", "--model", model, "--label-column", "label",
               "--thresholds", 1.0, 2.0, "--n-samples", 10, "--out", tmp_path / "a.csv") == 0
    assert run("score", sim / "test.csv", "--model", model, "--thresholds", 1.0, 2.0, "--n-samples", 10,
               "--out", tmp_path / "b.csv") == 0
    assert (tmp_path / "a.csv").read_text() == (tmp_path / "b.csv").read_text()


def test_select_single_candidate_and_determinism(sim, tmp_path):
    args = ["select", sim / "train.csv", "--validation", sim / "validation.csv", "--m-max", 60,
            "--step-length", 0.1, "--margin-candidates", "LogNormal", "--copula-candidates", "Clayton"]
    assert run(*args, "--out", tmp_path / "a.csv") == 0
    assert run(*args, "--out", tmp_path / "b.csv") == 0
    text = (tmp_path / "a.csv").read_text()
    assert text == (tmp_path / "b.csv").read_text()
    lines = text.splitlines()[1:]
    assert len(lines) == 3 and all(line.endswith("True") for line in lines)


def test_select_ranking(sim, tmp_path, capsys):
    assert run("select", sim / "train.csv", "--folds", 2, "--m-max", 40, "--step-length", 0.1,
               "--out", tmp_path / "r.csv") == 0
    lines = (tmp_path / "r.csv").read_text().splitlines()[1:]
    stages = [line.split(",")[0] for line in lines]
    assert stages == ["margin1"] * 2 + ["margin2"] * 2 + ["copula"] * 3
    for stage in ("margin1", "margin2", "copula"):
        rows = [line.split(",") for line in lines if line.startswith(stage)]
        best = min(rows, key=lambda r: float(r[3]))
        assert [r[4] for r in rows].count("True") == 1 and best[4] == "True"
    assert capsys.readouterr().out.count("*") == 3


# -- config and errors ------------------------------------------------------------------

def test_config_file_and_precedence(sim, tmp_path):
    (tmp_path / "c.yaml").write_text("mstop: 7\nstep-length: 0.1\n")
    assert run("--config", tmp_path / "c.yaml", "fit", sim / "train.csv", "--out", tmp_path / "a.json") == 0
    assert io.load_model(tmp_path / "a.json").mstop == 7
    assert run("--config", tmp_path / "c.yaml", "fit", sim / "train.csv", "--out", tmp_path / "b.json",
               "--mstop", 3) == 0
    b = io.load_model(tmp_path / "b.json")
    assert b.mstop == 3 and b.config.step_length == 0.1
    (tmp_path / "c.json").write_text(json.dumps({"mstop": 5}))
    assert run("--config", tmp_path / "c.json", "fit", sim / "train.csv", "--out", tmp_path / "c.json.m") == 0
    assert io.load_model(tmp_path / "c.json.m").mstop == 5


@pytest.mark.parametrize("argv, code", [
    (["fit", "{d}/missing.csv", "--out", "{t}/m.json"], 3),
    (["fit", "{t}/bad.csv", "--out", "{t}/m.json"], 3),
    (["fit", "{t}/neg.csv", "--out", "{t}/m.json"], 3),
    (["fit", "{d}/train.csv", "--out", "{t}/m.json", "--copula", "Frank"], 2),
    (["fit", "{d}/train.csv", "--out", "{t}/m.json", "--step-length", "-1"], 2),
    (["fit", "{d}/train.csv", "--out", "{t}/m.json", "--validation", "{d}/validation.csv", "--folds", "3"], 2),
    (["fit", "{d}/train.csv", "--out", "{t}/m.json", "--df", "0.5"], 2),
    (["fit", "{d}/train.csv", "--out", "{t}/m.json", "--linear", "x99"], 2),
    (["fit", "{d}/train.csv", "--out", "{t}/m.json", "--mstop", "abc"], 2),
    (["cv", "{d}/train.csv"], 2),
    (["cv", "{d}/train.csv", "--folds", "1"], 2),
    (["predict", "{t}/garbage.json", "{d}/test.csv", "--out", "{t}/p.csv"], 3),
    (["predict", "{d}/model.json", "{t}/nocov.csv", "--out", "{t}/p.csv"], 3),
    (["predict", "{d}/model.json", "{d}/test.csv", "--out", "{t}/p.csv", "--thresholds", "0", "1"], 2),
    (["score", "{d}/test.csv"], 2),
    (["score", "{d}/test.csv", "--model", "{d}/model.json", "--n-samples", "1"], 2),
    (["score", "{d}/test.csv", "--model", "{d}/model.json", "--thresholds", "1e9", "1e9"], 3),
    (["select", "{d}/train.csv"], 2),
    (["select", "{d}/train.csv", "--folds", "2", "--margin-candidates", "Cauchy"], 2),
    (["simulate", "--out", "{t}/s", "--p", "2"], 2),
    (["simulate", "--out", "{t}/s", "--fixed-theta", "3"], 2),
    (["--config", "{t}/cfg.json", "fit", "{d}/train.csv", "--out", "{t}/m.json"], 2),
    (["frobnicate"], 2),
])
def test_malformed_input_exit_codes(sim, model, tmp_path, capsys, argv, code):
    (tmp_path / "bad.csv").write_text("y1,y2,x1\n1,2,oops\n")
    (tmp_path / "neg.csv").write_text("y1,y2,x1\n1,2,0.1\n-1,2,0.2\n")
    (tmp_path / "nocov.csv").write_text("x1,x2\n0.1,0.2\n")
    (tmp_path / "garbage.json").write_text("[")
    (tmp_path / "cfg.json").write_text(json.dumps({"no_such_option": 1}))
    argv = [a.format(d=sim, t=tmp_path) for a in argv]
    assert cli.main(argv) == code
    err = capsys.readouterr().err.strip()
    assert err and "Traceback" not in err
    if not argv[0].startswith("frob") and "abc" not in argv:
        assert "\n" not in err


def test_numerical_failure_exit_code(sim, tmp_path, monkeypatch, capsys):
    def boom(args):
        raise NumericalError("penalised normal matrix is not positive definite")

    monkeypatch.setitem(cli.COMMANDS, "fit", boom)
    assert run("fit", sim / "train.csv", "--out", tmp_path / "m.json") == 4
    assert "numerical failure" in one_line_error(capsys)
