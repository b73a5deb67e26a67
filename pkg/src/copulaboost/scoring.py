"""Proper scoring rules, joint exceedance probabilities and AUC.

Every function that scores a model accepts either a bivariate copula
:class:`~copulaboost.engine.FitResult` or an :class:`IndependentFit`, the
product of two univariate fits used as the independence benchmark.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .data import Dataset
from .errors import DataError, UndefinedMomentWarning
from .margins import clamp_probability
from .tuning import predictive_risk


@dataclass
class JointPrediction:
    """Fitted per-observation margin parameters and (optional) copula parameter."""

    margins: tuple
    params: tuple  # (mu1, sigma1, mu2, sigma2)
    copula: object | None
    theta: np.ndarray | None

    @property
    def n(self):
        return np.size(self.params[0])


class IndependentFit:
    """Two univariate fits combined under independence."""

    def __init__(self, fit1, fit2):
        self.fits = (fit1, fit2)

    @property
    def label(self):
        return f"{self.fits[0].likelihood.label}-{self.fits[1].likelihood.label}-independent"

    @property
    def mstop(self):
        return tuple(f.mstop for f in self.fits)

    def loss(self, data: Dataset):
        return sum(f.loss(data.response(d)) for d, f in enumerate(self.fits))

    def loss_terms(self, data: Dataset):
        return (np.zeros(data.n),) + tuple(f.loss(data.response(d)) for d, f in enumerate(self.fits))


def predictive(fit, X) -> JointPrediction:
    """The fitted joint predictive distribution at covariate rows ``X``."""
    if isinstance(fit, IndependentFit):
        p1, p2 = (f.predict_params(X) for f in fit.fits)
        margins = tuple(f.likelihood.margin for f in fit.fits)
        return JointPrediction(margins, (p1["mu"], p1["sigma"], p2["mu"], p2["sigma"]), None, None)
    lik = fit.likelihood
    if lik.copula is None:
        raise TypeError("a bivariate fit or an IndependentFit is required")
    p = fit.predict_params(X)
    return JointPrediction(lik.margins, (p["mu1"], p["sigma1"], p["mu2"], p["sigma2"]), lik.copula, p["theta"])


@dataclass
class ScoreReport:
    log_score: float
    energy_score: float
    n_eval: int


def log_score(fit, newdata: Dataset) -> float:
    """Mean negative predictive log-density; the same number as the predictive risk."""
    return predictive_risk(fit, newdata)


def sample_predictive(pred: JointPrediction, n_samples: int, rng) -> np.ndarray:
    """Draw ``(n, n_samples, 2)`` response pairs from the predictive distributions."""
    n = pred.n
    total = n * n_samples
    if pred.copula is None:
        u1, u2 = rng.uniform(size=total), rng.uniform(size=total)
    else:
        u1, u2 = pred.copula.sample(np.repeat(pred.theta, n_samples), total, rng)
    u1, u2 = clamp_probability(u1), clamp_probability(u2)
    mu1, s1, mu2, s2 = (np.repeat(v, n_samples) for v in pred.params)
    y1 = pred.margins[0].quantile(u1, mu1, s1)
    y2 = pred.margins[1].quantile(u2, mu2, s2)
    return np.stack([y1, y2], axis=-1).reshape(n, n_samples, 2)


def energy_score_samples(samples, y) -> np.ndarray:
    """Per-observation energy score estimates from predictive ``samples`` (n, m, 2).

    ``E||X - y||`` is estimated by the sample mean and ``E||X - X'||`` by
    pairing each draw with the next one (cyclically), which is unbiased
    because distinct draws are independent.
    """
    samples = np.asarray(samples, dtype=float)
    y = np.asarray(y, dtype=float)
    if samples.shape[1] < 2:
        raise ValueError("at least two samples per observation are required")
    term1 = np.linalg.norm(samples - y[:, None, :], axis=-1).mean(axis=1)
    term2 = np.linalg.norm(samples - np.roll(samples, -1, axis=1), axis=-1).mean(axis=1)
    return term1 - 0.5 * term2


def _warn_moments(pred: JointPrediction):
    for d, fam in enumerate(pred.margins):
        if fam.name == "LogLogistic" and np.any(np.asarray(pred.params[2 * d + 1]) <= 1.0):
            warnings.warn(f"margin {d + 1}: LogLogistic shape <= 1 for some observations, "
                          "the energy score is not finite in expectation", UndefinedMomentWarning, stacklevel=3)


def energy_score(fit, newdata: Dataset, n_samples: int = 1000, rng=None, chunk: int = 250) -> float:
    """Mean Monte Carlo energy score of the fitted joint predictive distribution.

    Parameters
    ----------
    rng
        Generator or seed; the estimate is deterministic for a fixed seed.
    chunk
        Observations processed per batch (memory use scales with ``chunk * n_samples``).
    """
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    rng = np.random.default_rng(rng)
    pred = predictive(fit, newdata.X)
    _warn_moments(pred)
    y = np.column_stack(newdata.y)
    total = 0.0
    for start in range(0, newdata.n, chunk):
        sl = slice(start, start + chunk)
        part = JointPrediction(pred.margins, tuple(v[sl] for v in pred.params), pred.copula,
                               None if pred.theta is None else pred.theta[sl])
        total += float(np.sum(energy_score_samples(sample_predictive(part, n_samples, rng), y[sl])))
    return total / newdata.n


def score(fit, newdata: Dataset, n_samples: int = 1000, rng=None) -> ScoreReport:
    return ScoreReport(log_score(fit, newdata), energy_score(fit, newdata, n_samples, rng), newdata.n)


def joint_exceedance(fit, X, a, b) -> np.ndarray:
    """``P(Y1 > a, Y2 > b)`` per covariate row; ``a`` and ``b`` may be scalars or vectors."""
    pred = predictive(fit, X)
    a = np.broadcast_to(np.asarray(a, dtype=float), (pred.n,))
    b = np.broadcast_to(np.asarray(b, dtype=float), (pred.n,))
    if np.any(a <= 0) or np.any(b <= 0):
        raise DataError("exceedance thresholds must be positive")
    mu1, s1, mu2, s2 = pred.params
    f1 = pred.margins[0].cdf(a, mu1, s1)
    f2 = pred.margins[1].cdf(b, mu2, s2)
    if pred.copula is None:
        return np.clip((1.0 - f1) * (1.0 - f2), 0.0, 1.0)
    c = pred.copula.cdf(clamp_probability(f1), clamp_probability(f2), pred.theta)
    c = np.where((f1 == 0) | (f2 == 0), 0.0, c)
    return np.clip(1.0 - f1 - f2 + c, 0.0, 1.0)


def auc(scores, labels) -> float:
    """Area under the ROC curve via the Mann-Whitney statistic with midranks for ties."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have the same shape")
    if not np.all(np.isin(labels, (0, 1))):
        raise ValueError("labels must be binary 0/1")
    pos = labels == 1
    n1, n0 = int(pos.sum()), int((~pos).sum())
    if n1 == 0 or n0 == 0:
        raise ValueError("both classes must be present")
    ranks = stats.rankdata(scores)
    return float((ranks[pos].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0))


def roc_curve(scores, labels):
    """False and true positive rates over all distinct score thresholds (descending)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(int)
    thresholds = np.unique(scores)[::-1]
    pos, neg = labels.sum(), (1 - labels).sum()
    tpr = np.array([0.0] + [np.sum((scores >= t) & (labels == 1)) / pos for t in thresholds])
    fpr = np.array([0.0] + [np.sum((scores >= t) & (labels == 0)) / neg for t in thresholds])
    return fpr, tpr, thresholds
