"""CSV datasets and versioned JSON model files."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .baselearners import is_binary, learner_from_spec
from .data import Dataset
from .engine import BoostConfig, FitResult, LearnerSettings, ModelSpec, PredictorState, SelectionEntry
from .errors import DataError
from .likelihood import likelihood_from_description

MODEL_SCHEMA = "copulaboost-model"
MODEL_SCHEMA_VERSION = 1
_MISSING = {"", "na", "nan", "null", "none"}


def _fmt(v) -> str:
    # shortest round-trip representation
    return repr(float(v))


def read_table(path):
    """Header and float matrix of a CSV file; rejects missing and non-numeric cells."""
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: cannot open ({exc.strerror})") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        if len(set(header)) != len(header):
            raise DataError(f"{path}: duplicate column names in header")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, found {len(row)}")
            vals = []
            for name, cell in zip(header, row):
                cell = cell.strip()
                if cell.lower() in _MISSING:
                    raise DataError(f"{path}:{lineno}: missing value in column {name!r}")
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(f"{path}:{lineno}: non-numeric value {cell!r} in column {name!r}") from None
                if not np.isfinite(v):
                    raise DataError(f"{path}:{lineno}: non-finite value in column {name!r}")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return header, np.array(rows, dtype=float)


def read_dataset(path, responses=("y1", "y2"), covariates=None, drop=()) -> Dataset:
    """Load a dataset: ``responses`` name the response columns, the remaining columns are covariates.

    Responses must be strictly positive. ``drop`` lists further columns to
    ignore (e.g. labels). If ``covariates`` is given only those columns are used.
    """
    header, table = read_table(path)
    responses = tuple(responses)
    for name in responses:
        if name not in header:
            raise DataError(f"{path}: response column {name!r} not found")
    for d, name in enumerate(responses):
        col = table[:, header.index(name)]
        bad = np.flatnonzero(col <= 0)
        if bad.size:
            raise DataError(f"{path}:{bad[0] + 2}: response {name!r} must be strictly positive")
    if covariates is None:
        covariates = [h for h in header if h not in responses and h not in drop]
    else:
        missing = [c for c in covariates if c not in header]
        if missing:
            raise DataError(f"{path}: covariate column(s) not found: {', '.join(missing)}")
    X = table[:, [header.index(c) for c in covariates]] if covariates else np.empty((table.shape[0], 0))
    y = tuple(table[:, header.index(name)] for name in responses)
    return Dataset(y, X, list(covariates), responses)


def binary_columns(data: Dataset):
    """Indices of covariates taking only the values 0 and 1."""
    return tuple(j for j in range(data.p) if is_binary(data.X[:, j]))


def write_table(path, header, columns):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = [np.asarray(c) for c in columns]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(len(cols[0]) if cols else 0):
            w.writerow([c[i] if c.dtype.kind in "OUSb" else _fmt(c[i]) for c in cols])


def write_dataset(path, data: Dataset):
    header = list(data.response_names) + list(data.names)
    write_table(path, header, list(data.y) + [data.X[:, j] for j in range(data.p)])


# -- model files -------------------------------------------------------------

def model_to_dict(fit: FitResult) -> dict:
    spec = fit.spec
    return {
        "schema": MODEL_SCHEMA,
        "schema_version": MODEL_SCHEMA_VERSION,
        "likelihood": fit.likelihood.describe(),
        "config": asdict(fit.config),
        "spec": None if spec is None else {
            "covariates": None if spec.covariates is None else {k: list(map(int, v)) for k, v in spec.covariates.items()},
            "learners": asdict(spec.learners),
            "linear": [int(j) for j in spec.linear],
        },
        "covariate_names": list(fit.covariate_names),
        "covariate_ranges": fit.covariate_ranges,
        "learners": [lrn.spec() for lrn in fit.learners],
        "states": [
            {
                "name": st.name,
                "offset": float(st.offset),
                "coefs": [[int(j), [float(v) for v in c]] for j, c in sorted(st.coefs.items())],
            }
            for st in fit.states
        ],
        "selection_log": [asdict(e) for e in fit.selection_log],
        "risk_path": [float(v) for v in fit.risk_path],
        "validation_risk_path": None if fit.validation_risk_path is None else [float(v) for v in fit.validation_risk_path],
        "increments": None if fit.increments is None else [
            [int(k), int(j), [float(v) for v in inc]] for k, j, inc in fit.increments
        ],
    }


def model_from_dict(d: dict) -> FitResult:
    if d.get("schema") != MODEL_SCHEMA:
        raise DataError("not a copulaboost model file")
    if d.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise DataError(f"unsupported model schema version {d.get('schema_version')!r}")
    lik = likelihood_from_description(d["likelihood"])
    spec = None
    if d.get("spec") is not None:
        s = d["spec"]
        spec = ModelSpec(lik, s["covariates"], LearnerSettings(**s["learners"]), tuple(s["linear"]))
    learners = [learner_from_spec(ls) for ls in d["learners"]]
    states = [
        PredictorState(st["name"], st["offset"], {int(j): np.array(c) for j, c in st["coefs"]}, None)
        for st in d["states"]
    ]
    vr = d.get("validation_risk_path")
    inc = d.get("increments")
    return FitResult(
        likelihood=lik,
        learners=learners,
        states=states,
        selection_log=[SelectionEntry(**e) for e in d["selection_log"]],
        risk_path=np.array(d["risk_path"]),
        validation_risk_path=None if vr is None else np.array(vr),
        config=BoostConfig(**d["config"]),
        spec=spec,
        covariate_names=list(d["covariate_names"]),
        increments=None if inc is None else [(k, j, np.array(c)) for k, j, c in inc],
        covariate_ranges=d.get("covariate_ranges"),
    )


def dumps_model(fit: FitResult) -> str:
    return json.dumps(model_to_dict(fit), indent=1, allow_nan=False)


def save_model(fit: FitResult, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_model(fit) + "\n", encoding="utf-8")


def load_model(path) -> FitResult:
    path = Path(path)
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"{path}: cannot open ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    try:
        return model_from_dict(d)
    except (KeyError, TypeError) as exc:
        raise DataError(f"{path}: malformed model file ({exc})") from exc
