"""Choosing the stopping iteration and comparing candidate models by predictive risk.

Two tuners are provided. :func:`tune_mstop_holdout` boosts once on the
training data while recording the risk on a separate validation set;
:func:`tune_mstop_cv` does the same for each fold of a seeded k-fold
partition and averages the out-of-fold curves pointwise. Both return a
:class:`RiskCurve` whose ``argmin`` is the tuned ``m_stop``.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset
from .engine import Booster, BoostConfig, FitResult, ModelSpec
from .errors import DataError


@dataclass
class RiskCurve:
    """Out-of-sample empirical risk after iterations ``0..m_max``."""

    risk: np.ndarray
    fold_risks: np.ndarray | None = None
    folds: np.ndarray | None = None
    fit: FitResult | None = None

    def __post_init__(self):
        self.risk = np.asarray(self.risk, dtype=float)

    @property
    def argmin(self) -> int:
        return int(np.argmin(self.risk))

    @property
    def m_max(self) -> int:
        return self.risk.size - 1

    @property
    def minimum(self) -> float:
        return float(self.risk[self.argmin])


def _boost_curve(spec, train, validation, config, m_max):
    booster = Booster(spec, train, replace(config, mstop=m_max), validation=validation).run(m_max)
    return booster.result()


def tune_mstop_holdout(spec: ModelSpec, train: Dataset, validation: Dataset, config: BoostConfig,
                       m_max: int) -> RiskCurve:
    """Boost ``m_max`` iterations on ``train`` and record the risk on ``validation``.

    The returned curve keeps the fit, so ``curve.fit.at(curve.argmin)`` is the
    tuned model without refitting.
    """
    if m_max < 0:
        raise ValueError("m_max must be non-negative")
    res = _boost_curve(spec, train, validation, config, m_max)
    return RiskCurve(res.validation_risk_path, fit=res)


def cv_folds(n: int, k: int, seed=0) -> np.ndarray:
    """Fold label of each observation: contiguous blocks of a seeded permutation."""
    if k < 2:
        raise ValueError("at least two folds are required")
    if n < k:
        raise DataError(f"cannot split {n} observations into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    labels = np.empty(n, dtype=int)
    for f, block in enumerate(np.array_split(perm, k)):
        labels[block] = f
    return labels


def _fold_curve(args):
    spec, data, config, m_max, labels, f = args
    train, test = data.subset(labels != f), data.subset(labels == f)
    return _boost_curve(spec, train, test, config, m_max).validation_risk_path


def tune_mstop_cv(spec: ModelSpec, data: Dataset, config: BoostConfig, k: int = 10, m_max: int = 1000,
                  seed=None, folds=None, threads: int = 1) -> RiskCurve:
    """k-fold cross-validated risk curve.

    Parameters
    ----------
    seed
        Seed of the fold permutation; defaults to ``config.seed``.
    folds
        Explicit fold labels (overrides ``k`` and ``seed``).
    threads
        Number of worker processes; 1 runs the folds serially in this process.
        The result does not depend on this value.
    """
    if folds is None:
        labels = cv_folds(data.n, k, config.seed if seed is None else seed)
    else:
        labels = np.asarray(folds, dtype=int)
        if labels.shape != (data.n,):
            raise DataError("one fold label per observation is required")
    ids = np.unique(labels)
    min_train = 2 * len(spec.param_names)
    for f in ids:
        if np.sum(labels != f) < min_train or np.sum(labels == f) < 1:
            raise DataError(f"fold {f} leaves too few observations to fit")
    jobs = [(spec, data, config, m_max, labels, f) for f in ids]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            curves = list(ex.map(_fold_curve, jobs))
    else:
        curves = [_fold_curve(j) for j in jobs]
    curves = np.vstack(curves)
    return RiskCurve(curves.mean(axis=0), fold_risks=curves, folds=labels)


def predictive_risk(fit: FitResult, newdata: Dataset) -> float:
    """Mean negative log-likelihood of ``newdata`` under the fitted model."""
    loss = fit.loss(newdata)
    return float(np.sum(loss) / loss.size)


def risk_components(fit: FitResult, newdata: Dataset) -> dict:
    """Mean loss terms; for copula models ``copula + margin1 + margin2 == total``."""
    terms = fit.loss_terms(newdata)
    n = newdata.n
    names = ("copula", "margin1", "margin2") if len(terms) == 3 else ("margin",)
    out = {name: float(np.sum(t) / n) for name, t in zip(names, terms)}
    out["total"] = predictive_risk(fit, newdata)
    return out


@dataclass
class Selection:
    winner: str
    table: list = field(default_factory=list)


def select_by_predictive_risk(candidates, newdata: Dataset) -> Selection:
    """Rank ``(label, fit)`` pairs by predictive risk on ``newdata``; ties keep list order."""
    candidates = list(candidates)
    if len(candidates) < 1:
        raise ValueError("no candidates given")
    table = []
    for label, fit in candidates:
        table.append({"label": label, "mstop": fit.mstop, "risk": predictive_risk(fit, newdata)})
    best = min(range(len(table)), key=lambda i: (table[i]["risk"], i))
    for i, row in enumerate(table):
        row["winner"] = i == best
    return Selection(table[best]["label"], table)


def tuned_fit(spec: ModelSpec, data: Dataset, config: BoostConfig, *, validation: Dataset | None = None,
              k: int | None = None, m_max: int = 1000, seed=None, threads: int = 1):
    """Tune ``m_stop`` and return ``(fit, curve)``.

    Exactly one tuner must be chosen: a ``validation`` set (the model is the
    training fit stopped at the validation argmin) or ``k`` folds (the model
    is refit on all of ``data`` for the cross-validated ``m_stop``).
    """
    if (validation is None) == (k is None):
        raise ValueError("choose exactly one tuner: a validation set or k folds")
    if validation is not None:
        curve = tune_mstop_holdout(spec, data, validation, config, m_max)
        return curve.fit.at(curve.argmin), curve
    curve = tune_mstop_cv(spec, data, config, k, m_max, seed=seed, threads=threads)
    booster = Booster(spec, data, replace(config, mstop=curve.argmin)).run(curve.argmin)
    return booster.result(), curve
