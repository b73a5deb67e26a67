"""Synthetic data from the simulation designs.

Covariates are i.i.d. Uniform(-1, 1); the first margin is Log-Normal and the
second Log-Logistic by default. Two sets of true predictors are available:

* ``"nonlinear"`` -- x1..x4 act through smooth non-linear effects;
* ``"linear"``    -- the purely linear design used for the convergence check.

The same copula predictor is passed through each copula's own response
function, so the three copula designs share their covariate structure. The
copula parameter can instead be held at the independence value
(``independence=True``) or at a constant (``fixed_theta``).

Replicate ``r`` of a master seed ``m`` uses
``SeedSequence(entropy=m, spawn_key=(r,))``, the ``r``-th child that
``SeedSequence(m).spawn`` would produce. Within a replicate, the training,
validation and test sets use children 0, 1, 2 of the replicate seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .copulas import get_copula
from .data import Dataset
from .margins import MarginParams, get_family
from .margins import quantile as _quantile

PARAM_ORDER = ("mu1", "sigma1", "mu2", "sigma2", "theta")

#: true slopes of the linear design, in the order (mu1:x1, mu1:x3, mu2:x1, mu2:x2, sigma1:x3, sigma2:x2, theta:x4)
LINEAR_BETAS = (-1.0, 0.5, -0.7, 0.3, 0.7, 0.5, 1.0)

#: true structure of both designs: parameter -> informative covariate indices (0-based)
INFORMATIVE = {"mu1": (0, 2), "sigma1": (2,), "mu2": (0, 1), "sigma2": (1,), "theta": (3,)}


def truth_nonlinear(x):
    """Link-scale predictors ``(mu1, sigma1, mu2, sigma2, theta)`` of the non-linear design."""
    x = np.asarray(x, dtype=float)
    x1, x2, x3, x4 = x[..., 0], x[..., 1], x[..., 2], x[..., 3]
    mu1 = -0.75 * x1 + 0.5 * np.cos(np.pi * x3)
    mu2 = 0.5 - 0.7 * x1 - 0.02 * np.exp(2.0 * (x2 + 1.0))
    sigma1 = -0.7 + 0.5 * np.sin(np.pi * x3)
    sigma2 = 2.0 + 0.5 * x2
    theta = -0.8 + 1.5 * np.log(4.5 - 1.7 * np.sin(np.pi * x4))
    return np.stack([mu1, sigma1, mu2, sigma2, theta])


def truth_linear(x):
    """Link-scale predictors of the purely linear design."""
    x = np.asarray(x, dtype=float)
    x1, x2, x3, x4 = x[..., 0], x[..., 1], x[..., 2], x[..., 3]
    b = LINEAR_BETAS
    mu1 = b[0] * x1 + b[1] * x3
    mu2 = 0.5 + b[2] * x1 + b[3] * x2
    sigma1 = -0.7 + b[4] * x3
    sigma2 = 2.0 + b[5] * x2
    theta = 1.0 + b[6] * x4
    return np.stack([mu1, sigma1, mu2, sigma2, theta])


TRUTHS = {"nonlinear": truth_nonlinear, "linear": truth_linear}

#: human-readable link-scale predictors, recorded in simulation manifests
TRUTH_DESCRIPTIONS = {
    "nonlinear": {
        "mu1": "-0.75*x1 + 0.5*cos(pi*x3)",
        "sigma1": "-0.7 + 0.5*sin(pi*x3)",
        "mu2": "0.5 - 0.7*x1 - 0.02*exp(2*(x2 + 1))",
        "sigma2": "2 + 0.5*x2",
        "theta": "-0.8 + 1.5*log(4.5 - 1.7*sin(pi*x4))",
    },
    "linear": {
        "mu1": "-1*x1 + 0.5*x3",
        "sigma1": "-0.7 + 0.7*x3",
        "mu2": "0.5 - 0.7*x1 + 0.3*x2",
        "sigma2": "2 + 0.5*x2",
        "theta": "1 + 1*x4",
    },
}


@dataclass
class Scenario:
    n: int = 1000
    p: int = 20
    copula: str = "Gaussian"
    margins: tuple = ("LogNormal", "LogLogistic")
    truth: str = "nonlinear"
    independence: bool = False
    fixed_theta: float | None = None
    seed: int | np.random.SeedSequence = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.p < 4:
            raise ValueError("scenarios need at least 4 covariates")
        if self.truth not in TRUTHS:
            raise ValueError(f"truth must be one of {sorted(TRUTHS)}")
        if self.independence and self.fixed_theta is not None:
            raise ValueError("independence and fixed_theta are mutually exclusive")


def quantile(family, u, p: MarginParams):
    return _quantile(family, u, p)


def true_params(scn: Scenario, X):
    """Response-scale true parameters for covariate rows ``X``."""
    eta = TRUTHS[scn.truth](X)
    m1, m2 = (get_family(m) for m in scn.margins)
    cop = get_copula(scn.copula)
    resp = (m1.response_mu, m1.response_sigma, m2.response_mu, m2.response_sigma, cop.response)
    out = dict(zip(PARAM_ORDER, (r(e) for r, e in zip(resp, eta))))
    if scn.independence:
        out["theta"] = np.full(np.shape(eta[4]), cop.independence_theta)
    elif scn.fixed_theta is not None:
        out["theta"] = np.full(np.shape(eta[4]), float(scn.fixed_theta))
    return out


def generate(scn: Scenario) -> Dataset:
    """Draw one dataset: covariates, true parameters, copula pairs, marginal quantiles."""
    rng = np.random.default_rng(scn.seed)
    X = rng.uniform(-1.0, 1.0, size=(scn.n, scn.p))
    par = true_params(scn, X)
    cop = get_copula(scn.copula)
    if scn.independence:
        u1, u2 = rng.uniform(size=scn.n), rng.uniform(size=scn.n)
    else:
        u1, u2 = cop.sample(par["theta"], scn.n, rng)
    m1, m2 = (get_family(m) for m in scn.margins)
    # keep probabilities away from 0 and 1 so quantiles stay finite
    u1 = np.clip(u1, 1e-15, 1 - 1e-15)
    u2 = np.clip(u2, 1e-15, 1 - 1e-15)
    y1 = m1.quantile(u1, par["mu1"], par["sigma1"])
    y2 = m2.quantile(u2, par["mu2"], par["sigma2"])
    return Dataset((y1, y2), X, [f"x{j + 1}" for j in range(scn.p)])


def _as_seq(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def child_seed(seed, i: int) -> np.random.SeedSequence:
    """Child ``i`` of ``seed``; unlike ``SeedSequence.spawn`` this is stateless."""
    seq = _as_seq(seed)
    return np.random.SeedSequence(seq.entropy, spawn_key=tuple(seq.spawn_key) + (int(i),))


def replicate_seeds(master, n_replicates: int):
    return [child_seed(master, r) for r in range(n_replicates)]


def generate_split(scn: Scenario, sizes=(1000, 1500)):
    """Independent datasets of the given sizes (train, validation, ...) from one seed."""
    out = []
    for i, size in enumerate(sizes):
        kw = {k: getattr(scn, k) for k in ("p", "copula", "margins", "truth", "independence", "fixed_theta", "extra")}
        out.append(generate(Scenario(n=size, seed=child_seed(scn.seed, i), **kw)))
    return out
