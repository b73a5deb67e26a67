"""Base-learners: penalised least-squares fit units bound to one covariate.

Two kinds are provided:

* :class:`LinearLearner` -- ordinary least squares on ``(1, x)``.
* :class:`PSplineLearner` -- cubic B-splines on equidistant knots with a
  second-order difference penalty whose smoothing parameter is chosen so
  that the trace of the hat matrix equals a target degrees of freedom.

Knot convention for P-splines: ``n_knots`` equidistant knots span the
training range ``[min(x), max(x)]`` inclusive of both end points (so there
are ``n_knots - 1`` intervals), and ``degree`` further knots with the same
spacing are appended on either side. The basis dimension is therefore
``n_knots + degree - 1``; with the defaults (20 knots, cubic) it is 22.
Outside the training range the covariate is clamped to the boundary, i.e.
the fitted function is extrapolated as a constant.

The normal-equation matrix ``X'X + lambda P`` is factorised once at setup.
:class:`LearnerBank` stacks many learners so that a whole set of
gradient vectors can be fitted to every learner with one matrix product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, sparse
from scipy.interpolate import BSpline

from .errors import InfeasibleDFError, NumericalError


@dataclass
class LearnerFit:
    learner: "BaseLearner"
    coef: np.ndarray
    rss: float
    fitted: np.ndarray


class BaseLearner:
    kind = "base"
    lam = 0.0

    def __init__(self, covariate_index: int, name: str | None = None):
        self.covariate_index = int(covariate_index)
        self.name = name if name is not None else f"x{covariate_index + 1}"
        self.coef: np.ndarray | None = None
        self._chol = None

    # subclasses define _basis(x), n_coef, penalty and _prepare(x)
    def design(self, x):
        return self._basis(np.asarray(x, dtype=float))

    def setup(self, x):
        x = np.asarray(x, dtype=float)
        self._prepare(x)
        self.X = self.design(x)
        self.XtX = self.X.T @ self.X
        self._factorize()
        self.coef = np.zeros(self.n_coef)
        return self

    def _factorize(self):
        a = self.XtX + self.lam * self.penalty
        try:
            self._chol = linalg.cho_factor(a, lower=True)
        except linalg.LinAlgError as exc:
            raise NumericalError(f"{self.name}: penalised normal matrix is not positive definite") from exc
        self.normal_matrix = a

    def solve(self, xt_target):
        """Coefficients for a right-hand side ``X' t`` using the cached factorisation."""
        return linalg.cho_solve(self._chol, xt_target)

    def fit_to_residuals(self, target) -> LearnerFit:
        target = np.asarray(target, dtype=float)
        if not np.all(np.isfinite(target)):
            raise NumericalError(f"{self.name}: non-finite target")
        coef = self.solve(self.X.T @ target)
        fitted = self.X @ coef
        self.coef = coef
        return LearnerFit(self, coef, float(np.sum((target - fitted) ** 2)), fitted)

    def evaluate(self, coef, x):
        return self.design(x) @ np.asarray(coef, dtype=float)

    def hat_trace(self, lam=None):
        lam = self.lam if lam is None else lam
        return _hat_trace(self.XtX, self.penalty, lam)

    def spec(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.name})"


class LinearLearner(BaseLearner):
    """Intercept plus slope in one covariate."""

    kind = "linear"
    n_coef = 2

    def _prepare(self, x):
        self.penalty = np.zeros((2, 2))

    def _basis(self, x):
        return np.column_stack([np.ones_like(x), x])

    def spec(self):
        return {"kind": self.kind, "covariate_index": self.covariate_index, "name": self.name}

    @classmethod
    def from_spec(cls, d):
        obj = cls(d["covariate_index"], d["name"])
        obj._prepare(None)
        return obj


class PSplineLearner(BaseLearner):
    """Cubic P-spline with a difference penalty, calibrated to ``df`` degrees of freedom."""

    kind = "pspline"

    def __init__(self, covariate_index, n_knots=20, degree=3, penalty_order=2, df=4.0, name=None):
        super().__init__(covariate_index, name)
        self.n_knots = int(n_knots)
        self.degree = int(degree)
        self.penalty_order = int(penalty_order)
        self.df = float(df)
        self.n_coef = self.n_knots + self.degree - 1

    def _set_knots(self, lo, hi):
        if not hi > lo:
            raise InfeasibleDFError(f"{self.name}: covariate is constant, P-spline undefined")
        self.lower, self.upper = float(lo), float(hi)
        h = (hi - lo) / (self.n_knots - 1)
        self.knots = lo + h * np.arange(-self.degree, self.n_knots + self.degree)
        d = np.diff(np.eye(self.n_coef), self.penalty_order, axis=0)
        self.penalty = d.T @ d

    def _prepare(self, x):
        self._set_knots(np.min(x), np.max(x))

    def _basis(self, x):
        # clip to the knot base interval, which may differ from [lower, upper] by rounding
        xc = np.clip(x, self.knots[self.degree], self.knots[-self.degree - 1])
        return BSpline.design_matrix(xc, self.knots, self.degree, extrapolate=False).toarray()

    def setup(self, x):
        x = np.asarray(x, dtype=float)
        self._prepare(x)
        self.X = self.design(x)
        self.XtX = self.X.T @ self.X
        self.lam = calibrate_lambda(self, self.df)
        self._factorize()
        self.coef = np.zeros(self.n_coef)
        return self

    def spec(self):
        return {
            "kind": self.kind,
            "covariate_index": self.covariate_index,
            "name": self.name,
            "n_knots": self.n_knots,
            "degree": self.degree,
            "penalty_order": self.penalty_order,
            "df": self.df,
            "lambda": self.lam,
            "lower": self.lower,
            "upper": self.upper,
        }

    @classmethod
    def from_spec(cls, d):
        obj = cls(d["covariate_index"], d["n_knots"], d["degree"], d["penalty_order"], d["df"], d["name"])
        obj._set_knots(d["lower"], d["upper"])
        obj.lam = d["lambda"]
        return obj


def learner_from_spec(d) -> BaseLearner:
    return {"linear": LinearLearner, "pspline": PSplineLearner}[d["kind"]].from_spec(d)


def _hat_trace(xtx, penalty, lam):
    return float(np.trace(np.linalg.solve(xtx + lam * penalty, xtx)))


def calibrate_lambda(learner: BaseLearner, target_df: float, tol: float = 1e-10) -> float:
    """Smoothing parameter at which ``trace[(X'X + lam P)^-1 X'X] == target_df``.

    Bisection on ``log(lam)``; the trace decreases strictly from ``rank(X)``
    at ``lam = 0`` to the penalty null-space dimension as ``lam -> inf``.
    """
    xtx, pen = learner.XtX, learner.penalty
    rank = np.linalg.matrix_rank(learner.X)
    null_dim = learner.penalty_order
    if not (null_dim < target_df < rank):
        raise InfeasibleDFError(
            f"{learner.name}: df {target_df} outside the attainable range ({null_dim}, {rank})"
        )
    scale = np.trace(xtx) / max(np.trace(pen), 1e-300)
    lo, hi = np.log(scale) - 30.0, np.log(scale) + 30.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        df = _hat_trace(xtx, pen, np.exp(mid))
        if abs(df - target_df) < tol:
            break
        if df > target_df:
            lo = mid
        else:
            hi = mid
    return float(np.exp(mid))


def fit_to_residuals(learner: BaseLearner, target) -> LearnerFit:
    return learner.fit_to_residuals(target)


def predict(learner: BaseLearner, x_new, coef=None):
    coef = learner.coef if coef is None else coef
    if coef is None:
        coef = np.zeros(learner.n_coef)
    return learner.evaluate(coef, x_new)


def make_learner(x, index, kind="pspline", name=None, **kwargs) -> BaseLearner:
    """Build and set up a learner for covariate column ``x``.

    Binary (0/1) covariates always get a linear learner.
    """
    x = np.asarray(x, dtype=float)
    if kind == "linear" or is_binary(x):
        return LinearLearner(index, name).setup(x)
    if kind == "pspline":
        return PSplineLearner(index, name=name, **kwargs).setup(x)
    raise ValueError(f"unknown learner kind {kind!r}")


def is_binary(x) -> bool:
    vals = np.unique(x)
    return vals.size <= 2 and np.all(np.isin(vals, (0.0, 1.0)))


class LearnerBank:
    """Batched fitting of many set-up learners sharing one set of observations.

    With ``A = X'X + lambda P`` and ``b = X'g`` the residual sum of squares of
    the penalised fit is ``||g||^2 - b'(2 A^-1 - A^-1 X'X A^-1) b``, so the RSS
    of every learner for several gradient vectors costs one product with the
    stacked design plus small batched quadratic forms.
    """

    def __init__(self, learners):
        self.learners = list(learners)
        self.design = np.hstack([lrn.X for lrn in self.learners])
        bounds = np.cumsum([0] + [lrn.n_coef for lrn in self.learners])
        self.starts = bounds[:-1]
        self.slices = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]
        blocks = []
        for lrn in self.learners:
            ainv = np.linalg.inv(lrn.normal_matrix)
            q = 2.0 * ainv - ainv @ lrn.XtX @ ainv
            blocks.append(0.5 * (q + q.T))
        self.quad = sparse.block_diag(blocks, format="csr")

    def __len__(self):
        return len(self.learners)

    def rss_all(self, grads):
        """Return ``(rss, xtg)``: rss has shape (n_learners, k); xtg is the stacked ``X'G``."""
        grads = np.asarray(grads, dtype=float)
        if grads.ndim == 1:
            grads = grads[:, None]
        xtg = self.design.T @ grads
        gg = np.einsum("ik,ik->k", grads, grads)
        explained = np.add.reduceat(xtg * (self.quad @ xtg), self.starts, axis=0)
        return gg[None, :] - explained, xtg

    def coef(self, j, xtg_col):
        """Coefficients of learner ``j`` for one column of ``X'G``."""
        return self.learners[j].solve(xtg_col[self.slices[j]])

    def fit_all(self, grads):
        """Return ``(rss, coefs)``: rss has shape (n_learners, k); coefs[j] is (n_coef_j, k)."""
        rss, xtg = self.rss_all(grads)
        return rss, [lrn.solve(xtg[sl]) for lrn, sl in zip(self.learners, self.slices)]
