"""Direct maximum likelihood for models with linear predictors.

Serves as the reference that boosting with linear base-learners and a very
large number of iterations must converge to.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .data import Dataset
from .errors import NumericalError


@dataclass
class MLEResult:
    coefficients: dict
    x: np.ndarray
    loss: float
    grad_norm: float
    success: bool
    message: str


class LinearPredictorLoss:
    """Total negative log-likelihood as a function of stacked linear coefficients.

    Parameter ``k`` has predictor ``eta_k = b_k0 + sum_j b_kj x_j`` over the
    columns listed in ``covariates[name_k]``.
    """

    def __init__(self, likelihood, data: Dataset, covariates: dict):
        self.lik, self.data = likelihood, data
        self.names = likelihood.param_names
        self.cols = [sorted(covariates.get(name, ())) for name in self.names]
        self.designs = [np.column_stack([np.ones(data.n)] + [data.X[:, j] for j in c]) for c in self.cols]
        sizes = [d.shape[1] for d in self.designs]
        bounds = np.cumsum([0] + sizes)
        self.slices = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]
        self.size = int(bounds[-1])

    def eta(self, x):
        return np.vstack([d @ x[sl] for d, sl in zip(self.designs, self.slices)])

    def value(self, x):
        return float(np.sum(self.lik.evaluate(self.eta(x), self.data.y).loss()))

    def value_and_grad(self, x):
        ev = self.lik.evaluate(self.eta(x), self.data.y)
        g = self.lik.negative_gradient(ev, self.data.y)
        grad = np.concatenate([-(d.T @ g[k]) for k, d in enumerate(self.designs)])
        val = float(np.sum(ev.loss()))
        if not np.isfinite(val):
            return np.inf, np.zeros_like(x)
        return val, grad

    def start(self, offsets):
        x = np.zeros(self.size)
        for k, sl in enumerate(self.slices):
            x[sl.start] = offsets[k]
        return x

    def unpack(self, x) -> dict:
        out = {}
        for k, name in enumerate(self.names):
            b = x[self.slices[k]]
            slopes = {self.data.names[j]: float(v) for j, v in zip(self.cols[k], b[1:])}
            out[name] = {"intercept": float(b[0]), "slopes": slopes}
        return out


def linear_mle(likelihood, data: Dataset, covariates: dict, gtol: float = 1e-8, maxiter: int = 5000) -> MLEResult:
    """Maximise the likelihood over intercepts and slopes by BFGS with the analytic gradient."""
    obj = LinearPredictorLoss(likelihood, data, covariates)
    x0 = obj.start(likelihood.offsets(data.y, data.X))
    res = optimize.minimize(obj.value_and_grad, x0, jac=True, method="BFGS",
                            options={"gtol": gtol, "maxiter": maxiter})
    x = res.x
    # polish with Newton steps on a finite-difference Hessian of the analytic gradient
    for _ in range(5):
        _, g = obj.value_and_grad(x)
        if np.max(np.abs(g)) < gtol:
            break
        h = optimize.approx_fprime(x, lambda z: obj.value_and_grad(z)[1], 1e-6)
        step = np.linalg.solve(0.5 * (h + h.T), g)
        if obj.value(x - step) > obj.value(x) + 1e-9:
            break
        x = x - step
    val, g = obj.value_and_grad(x)
    if not np.isfinite(val):
        raise NumericalError("likelihood maximisation ended at a non-finite loss")
    gn = float(np.max(np.abs(g)))
    return MLEResult(obj.unpack(x), x, val, gn, bool(gn < 1e-4), str(res.message))
