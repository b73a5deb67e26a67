"""Noncyclic component-wise gradient boosting for distributional (copula) regression.

Each iteration computes the negative gradient of the loss for every model
parameter, fits it to all of that parameter's base-learners, keeps the
learner with the smallest residual sum of squares, and then updates only the
parameter whose step-scaled candidate update yields the lowest empirical
risk. Ties are broken by parameter order and then by covariate order.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from .baselearners import LearnerBank, learner_from_spec, make_learner
from .data import Dataset
from .errors import DataError, NumericalError
from .likelihood import BivariateCopulaLikelihood, UnivariateLikelihood

STABILIZATION_MODES = ("none", "mad")
OFFSET_MODES = ("mle", "zero")


@dataclass
class BoostConfig:
    step_length: float = 0.01
    mstop: int = 1000
    stabilization: str = "none"
    offsets: str = "mle"
    seed: int = 0

    def __post_init__(self):
        if not self.step_length > 0:
            raise ValueError("step_length must be positive")
        if self.mstop < 0:
            raise ValueError("mstop must be non-negative")
        if self.stabilization not in STABILIZATION_MODES:
            raise ValueError(f"stabilization must be one of {STABILIZATION_MODES}")
        if self.offsets not in OFFSET_MODES:
            raise ValueError(f"offsets must be one of {OFFSET_MODES}")


@dataclass
class LearnerSettings:
    kind: str = "pspline"
    n_knots: int = 20
    degree: int = 3
    penalty_order: int = 2
    df: float = 4.0


@dataclass
class ModelSpec:
    """Likelihood plus the candidate covariates of every model parameter.

    ``covariates`` maps parameter names to covariate column indices; parameters
    that are missing use every column. ``linear`` lists columns that get a
    linear learner regardless of ``learners.kind``.
    """

    likelihood: object
    covariates: dict | None = None
    learners: LearnerSettings = field(default_factory=LearnerSettings)
    linear: tuple = ()

    @property
    def param_names(self):
        return self.likelihood.param_names

    def covariates_for(self, name, p):
        if self.covariates is None or name not in self.covariates:
            return list(range(p))
        return sorted(int(j) for j in self.covariates[name])


def stabilize(gradient, mode="none"):
    """Scale a gradient vector by its median absolute deviation (``mode='mad'``)."""
    g = np.asarray(gradient, dtype=float)
    if mode == "none":
        return g
    if mode == "mad":
        mad = np.median(np.abs(g - np.median(g)))
        return g / max(mad, 1e-10)
    raise ValueError(f"unknown stabilization mode {mode!r}")


@dataclass
class PredictorState:
    """Additive predictor of one model parameter: offset plus accumulated learner coefficients."""

    name: str
    offset: float
    coefs: dict
    eta: np.ndarray

    def recompute(self, learners, X):
        eta = np.full(X.shape[0], self.offset)
        # fixed summation order so that reloaded models predict bit-identically
        for j in sorted(self.coefs):
            lrn = learners[j]
            eta = eta + lrn.evaluate(self.coefs[j], X[:, lrn.covariate_index])
        return eta


@dataclass
class SelectionEntry:
    iteration: int
    parameter: str
    covariate: str
    covariate_index: int
    loss_reduction: float


def _build_learners(spec: ModelSpec, data: Dataset):
    used = sorted({j for name in spec.param_names for j in spec.covariates_for(name, data.p)})
    st = spec.learners
    learners = []
    for j in used:
        kind = "linear" if (j in spec.linear or st.kind == "linear") else "pspline"
        kw = {} if kind == "linear" else dict(
            n_knots=st.n_knots, degree=st.degree, penalty_order=st.penalty_order, df=st.df
        )
        learners.append(make_learner(data.X[:, j], j, kind, name=data.names[j], **kw))
    return learners


class Booster:
    """Stateful boosting run; ``run(m)`` performs ``m`` further iterations.

    If ``validation`` is given, the validation risk is tracked after every
    iteration (index 0 is the offset-only model).
    """

    def __init__(self, spec: ModelSpec, data: Dataset, config: BoostConfig, validation: Dataset | None = None):
        lik = spec.likelihood
        if len(data.y) != lik.n_responses:
            raise DataError(f"likelihood expects {lik.n_responses} response(s)")
        self.spec, self.data, self.config, self.lik = spec, data, config, lik
        self.ys = data.y
        self.learners = _build_learners(spec, data)
        self.bank = LearnerBank(self.learners)
        cols = [lrn.covariate_index for lrn in self.learners]
        names = spec.param_names
        self.allowed = np.zeros((len(self.learners), len(names)), dtype=bool)
        for k, name in enumerate(names):
            use = set(spec.covariates_for(name, data.p))
            self.allowed[:, k] = [c in use for c in cols]

        offsets = lik.offsets(self.ys, data.X) if config.offsets == "mle" else np.zeros(len(names))
        self.offsets = np.asarray(offsets, dtype=float)
        self.eta = np.repeat(self.offsets[:, None], data.n, axis=1)
        self.coefs = [dict() for _ in names]
        self.ev = lik.evaluate(self.eta, self.ys)
        risk = self._mean_loss(self.ev.loss())
        if not np.isfinite(risk):
            raise NumericalError("offset model has non-finite risk")
        self.risk_path = [risk]
        self.log: list[SelectionEntry] = []
        self.increments: list = []

        self.validation = validation
        self.validation_risk_path = None
        if validation is not None:
            self.val_designs = [lrn.design(validation.X[:, lrn.covariate_index]) for lrn in self.learners]
            self.val_ev = lik.evaluate(np.repeat(self.offsets[:, None], validation.n, axis=1), validation.y)
            self.validation_risk_path = [self._mean_loss(self.val_ev.loss())]

    @staticmethod
    def _mean_loss(loss):
        return float(np.sum(loss) / loss.size)

    @property
    def iteration(self):
        return len(self.log)

    def step(self):
        lik, ys, s = self.lik, self.ys, self.config.step_length
        grads = lik.negative_gradient(self.ev, ys)
        usable = np.all(np.isfinite(grads), axis=1)
        grads = np.where(usable[:, None], grads, 0.0)
        if self.config.stabilization != "none":
            grads = np.vstack([stabilize(g, self.config.stabilization) for g in grads])
        rss, xtg = self.bank.rss_all(grads.T)
        rss = np.where(self.allowed, rss, np.inf)

        current = float(np.sum(self.ev.loss()))
        best = None
        for k in range(len(lik.param_names)):
            if not usable[k] or not np.any(self.allowed[:, k]):
                continue
            j = int(np.argmin(rss[:, k]))
            beta = self.bank.coef(j, xtg[:, k])
            cand = self.eta[k] + s * (self.learners[j].X @ beta)
            cand_ev = lik.update(self.ev, k, cand, ys)
            total = float(np.sum(cand_ev.loss()))
            if np.isfinite(total) and (best is None or total < best[0]):
                best = (total, k, j, beta, cand_ev)
        if best is None:
            raise NumericalError(f"iteration {self.iteration + 1}: every candidate update has non-finite risk")

        total, k, j, beta, cand_ev = best
        inc = s * beta
        self.ev = cand_ev
        self.eta = cand_ev.eta
        self.coefs[k][j] = self.coefs[k].get(j, 0.0) + inc
        n = self.data.n
        self.risk_path.append(self._mean_loss(self.ev.loss()))
        lrn = self.learners[j]
        self.log.append(
            SelectionEntry(self.iteration + 1, lik.param_names[k], lrn.name, lrn.covariate_index, (current - total) / n)
        )
        self.increments.append((k, j, inc))
        if self.validation is not None:
            self.val_ev = lik.update(self.val_ev, k, self.val_ev.eta[k] + self.val_designs[j] @ inc, self.validation.y)
            self.validation_risk_path.append(self._mean_loss(self.val_ev.loss()))

    def run(self, m):
        for _ in range(int(m)):
            try:
                self.step()
            except NumericalError:
                raise
            except (FloatingPointError, np.linalg.LinAlgError) as exc:
                raise NumericalError(f"iteration {self.iteration + 1}: {exc}") from exc
        return self

    def gradient_norm(self) -> float:
        """Largest ``|X_j' g_k| / n`` over allowed (learner, parameter) pairs.

        Zero exactly at a stationary point of the empirical risk within the
        span of the base-learners, so it measures convergence independently
        of the step length.
        """
        grads = self.lik.negative_gradient(self.ev, self.ys)
        xtg = np.abs(self.bank.design.T @ grads.T)
        per = np.maximum.reduceat(xtg, self.bank.starts, axis=0)
        return float(np.max(np.where(self.allowed, per, 0.0)) / self.data.n)

    def run_until_converged(self, tol=1e-6, max_iter=100_000, check_every=250):
        """Iterate until :meth:`gradient_norm` falls below ``tol`` (checked every ``check_every``)."""
        while self.iteration < max_iter and self.gradient_norm() >= tol:
            self.run(min(check_every, max_iter - self.iteration))
        return self

    def result(self) -> "FitResult":
        learners = [learner_from_spec(lrn.spec()) for lrn in self.learners]
        states = [
            PredictorState(name, float(self.offsets[k]), {j: c.copy() for j, c in self.coefs[k].items()},
                           self.eta[k].copy())
            for k, name in enumerate(self.lik.param_names)
        ]
        return FitResult(
            likelihood=self.lik,
            learners=learners,
            states=states,
            selection_log=list(self.log),
            risk_path=np.array(self.risk_path),
            validation_risk_path=None if self.validation_risk_path is None else np.array(self.validation_risk_path),
            config=self.config,
            spec=self.spec,
            covariate_names=list(self.data.names),
            increments=list(self.increments),
            covariate_ranges=[[float(lo), float(hi)] for lo, hi in zip(self.data.X.min(0), self.data.X.max(0))],
        )


@dataclass
class FitResult:
    likelihood: object
    learners: list
    states: list
    selection_log: list
    risk_path: np.ndarray
    validation_risk_path: np.ndarray | None
    config: BoostConfig
    spec: ModelSpec | None = None
    covariate_names: list = field(default_factory=list)
    increments: list | None = None
    covariate_ranges: list | None = None

    @property
    def param_names(self):
        return self.likelihood.param_names

    @property
    def mstop(self):
        return len(self.selection_log)

    def at(self, m) -> "FitResult":
        """The model after the first ``m`` iterations (requires stored increments)."""
        if self.increments is None:
            raise ValueError("coefficient increments were not kept for this fit")
        m = int(m)
        if not 0 <= m <= self.mstop:
            raise ValueError(f"m must lie in [0, {self.mstop}]")
        coefs = [dict() for _ in self.param_names]
        for k, j, inc in self.increments[:m]:
            coefs[k][j] = coefs[k].get(j, 0.0) + inc
        states = [PredictorState(st.name, st.offset, coefs[k], None) for k, st in enumerate(self.states)]
        return FitResult(
            self.likelihood, self.learners, states, self.selection_log[:m], self.risk_path[: m + 1],
            None if self.validation_risk_path is None else self.validation_risk_path[: m + 1],
            self.config, self.spec, self.covariate_names, self.increments[:m], self.covariate_ranges,
        )

    def predict_eta(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if self.covariate_names and X.shape[1] != len(self.covariate_names):
            raise DataError(f"expected {len(self.covariate_names)} covariates, got {X.shape[1]}")
        return np.vstack([st.recompute(self.learners, X) for st in self.states])

    def predict_params(self, X) -> dict:
        eta = self.predict_eta(X)
        return dict(zip(self.param_names, self.likelihood.to_params(eta)))

    def loss(self, data: Dataset):
        """Per-observation negative log-likelihood on ``data``."""
        ev = self.likelihood.evaluate(self.predict_eta(data.X), data.y)
        return ev.loss()

    def loss_terms(self, data: Dataset):
        ev = self.likelihood.evaluate(self.predict_eta(data.X), data.y)
        return self.likelihood.loss_terms(ev)

    def selected(self) -> dict:
        """Covariate names selected at least once, per parameter (in selection order)."""
        out = {name: [] for name in self.param_names}
        for e in self.selection_log:
            if e.covariate not in out[e.parameter]:
                out[e.parameter].append(e.covariate)
        return out

    def selection_counts(self) -> dict:
        out = {name: {} for name in self.param_names}
        for e in self.selection_log:
            out[e.parameter][e.covariate] = out[e.parameter].get(e.covariate, 0) + 1
        return out

    def linear_coefficients(self) -> dict:
        """Intercept and per-covariate slopes when every learner is linear."""
        out = {}
        for st in self.states:
            intercept = st.offset
            slopes = {}
            for j, c in st.coefs.items():
                lrn = self.learners[j]
                if lrn.kind != "linear":
                    raise ValueError("linear_coefficients requires linear learners only")
                intercept += c[0]
                slopes[lrn.name] = float(c[1])
            out[st.name] = {"intercept": float(intercept), "slopes": slopes}
        return out


def fit(spec: ModelSpec, data: Dataset, config: BoostConfig, validation: Dataset | None = None) -> FitResult:
    """Run ``config.mstop`` boosting iterations from the offset model."""
    return Booster(spec, data, config, validation).run(config.mstop).result()


def neg_log_lik(likelihood, eta, data: Dataset) -> float:
    """Total negative log-likelihood at a predictor matrix ``eta``."""
    return float(np.sum(likelihood.evaluate(eta, data.y).loss()))


def negative_gradient(likelihood, eta, data: Dataset, parameter=None):
    g = likelihood.negative_gradient(likelihood.evaluate(eta, data.y), data.y)
    if parameter is None:
        return g
    k = parameter if isinstance(parameter, int) else likelihood.param_names.index(parameter)
    return g[k]


def copula_spec(margin1="LogNormal", margin2="LogLogistic", copula="Gaussian", **kwargs) -> ModelSpec:
    return ModelSpec(BivariateCopulaLikelihood(margin1, margin2, copula), **kwargs)


def univariate_spec(margin, **kwargs) -> ModelSpec:
    return ModelSpec(UnivariateLikelihood(margin), **kwargs)


def config_dict(config: BoostConfig):
    return asdict(config)
