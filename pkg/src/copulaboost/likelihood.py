"""Negative log-likelihood losses and their gradients on the predictor scale.

A likelihood object knows its parameter names and response functions and,
given a matrix of additive predictors ``eta`` (one row per parameter),
evaluates per-observation loss terms and the negative gradient
``-d loss / d eta``. It also supports cheap re-evaluation of the loss when a
single predictor row changes, which is what the boosting loop needs when it
compares candidate updates.
"""

from __future__ import annotations

import numpy as np
from scipy import stats

from .copulas import CopulaFamily, get_copula
from .margins import MarginalFamily, clamp_probability, get_family

#: Kendall's tau used for copula offsets is clipped into this interval
TAU_CLIP = (0.01, 0.95)


class Evaluation:
    """Per-observation quantities at one value of the predictors."""

    __slots__ = ("eta", "params", "logf", "u", "clamped", "logc")

    def __init__(self, eta, params, logf, u, clamped, logc):
        self.eta = eta
        self.params = params
        self.logf = logf
        self.u = u
        self.clamped = clamped
        self.logc = logc

    def loss(self):
        total = -sum(self.logf)
        if self.logc is not None:
            total = total - self.logc
        return total


class BivariateCopulaLikelihood:
    """Loss of the bivariate copula model ``-log c(F1, F2) - log f1 - log f2``."""

    n_responses = 2

    def __init__(self, margin1, margin2, copula):
        self.margins: tuple[MarginalFamily, MarginalFamily] = (get_family(margin1), get_family(margin2))
        self.copula: CopulaFamily = get_copula(copula)
        self.param_names = ("mu1", "sigma1", "mu2", "sigma2", "theta")
        m1, m2 = self.margins
        self.responses = (
            m1.response_mu, m1.response_sigma, m2.response_mu, m2.response_sigma, self.copula.response
        )

    def describe(self):
        return {
            "type": "bivariate",
            "margin1": self.margins[0].name,
            "margin2": self.margins[1].name,
            "copula": self.copula.name,
        }

    @property
    def label(self):
        return f"{self.margins[0].name}-{self.margins[1].name}-{self.copula.name}"

    def to_params(self, eta):
        return [r(e) for r, e in zip(self.responses, eta)]

    def _margin(self, d, y, mu, sigma):
        fam = self.margins[d]
        logf = fam.logpdf(y, mu, sigma)
        f = fam.cdf(y, mu, sigma)
        u = clamp_probability(f)
        return logf, u, u != f

    def evaluate(self, eta, ys) -> Evaluation:
        eta = np.asarray(eta, dtype=float)
        y1, y2 = ys
        p = self.to_params(eta)
        with np.errstate(all="ignore"):
            lf1, u1, c1 = self._margin(0, y1, p[0], p[1])
            lf2, u2, c2 = self._margin(1, y2, p[2], p[3])
            logc = self.copula.logpdf(u1, u2, p[4])
        return Evaluation(eta, p, (lf1, lf2), (u1, u2), (c1, c2), logc)

    def loss_terms(self, ev: Evaluation):
        """Per-observation ``(-log c, -log f1, -log f2)``."""
        return -ev.logc, -ev.logf[0], -ev.logf[1]

    def update(self, ev: Evaluation, k: int, eta_k, ys) -> Evaluation:
        """Evaluation after replacing predictor row ``k`` by ``eta_k``; unchanged parts are shared."""
        eta = ev.eta.copy()
        eta[k] = eta_k
        params = list(ev.params)
        params[k] = self.responses[k](eta_k)
        logf, u, clamped = list(ev.logf), list(ev.u), list(ev.clamped)
        with np.errstate(all="ignore"):
            if k < 4:
                d = k // 2
                logf[d], u[d], clamped[d] = self._margin(d, ys[d], params[2 * d], params[2 * d + 1])
            logc = self.copula.logpdf(u[0], u[1], params[4])
        return Evaluation(eta, params, tuple(logf), tuple(u), tuple(clamped), logc)

    def candidate_loss(self, ev: Evaluation, k: int, eta_k, ys):
        """Per-observation loss when predictor row ``k`` is replaced by ``eta_k``."""
        return self.update(ev, k, eta_k, ys).loss()

    def negative_gradient(self, ev: Evaluation, ys):
        """Return the (5, n) array ``-d loss / d eta``."""
        p = ev.params
        eta = ev.eta
        with np.errstate(all="ignore"):
            dc1, dc2, dct = self.copula.dlogpdf(ev.u[0], ev.u[1], p[4])
            out = np.empty((5, eta.shape[1]))
            for d, dc in ((0, dc1), (1, dc2)):
                fam = self.margins[d]
                mu, sigma = p[2 * d], p[2 * d + 1]
                gm, gs = fam.dlogpdf(ys[d], mu, sigma)
                fm, fs = fam.dcdf(ys[d], mu, sigma)
                free = ~ev.clamped[d]
                out[2 * d] = (gm + np.where(free, dc * fm, 0.0)) * self.responses[2 * d].derivative(eta[2 * d])
                out[2 * d + 1] = (gs + np.where(free, dc * fs, 0.0)) * self.responses[2 * d + 1].derivative(
                    eta[2 * d + 1]
                )
            out[4] = dct * self.responses[4].derivative(eta[4])
        return out

    def offsets(self, ys, X=None):
        """Links of intercept-only margin MLEs and of the tau-inverted copula parameter.

        With covariates ``X`` the copula offset uses Kendall's tau of the
        residuals of least-squares regressions of ``log y_d`` on ``(1, X)``.
        Covariates shared by both margins otherwise induce rank correlation
        between the responses that the copula would have to unlearn.
        """
        out = []
        for fam, y in zip(self.margins, ys):
            mp = fam.fit_mle(y)
            out += [float(fam.response_mu.link(mp.mu)), float(fam.response_sigma.link(mp.sigma))]
        tau = residual_kendall_tau(ys, X)
        lo, hi = TAU_CLIP
        if self.copula.name == "Gaussian":
            tau = float(np.clip(tau, -hi, hi))
        else:
            tau = float(np.clip(tau, lo, hi))
        out.append(float(self.copula.response.link(self.copula.tau_to_theta(tau))))
        return np.array(out)


class UnivariateLikelihood:
    """Negative log-likelihood of a single two-parameter margin."""

    n_responses = 1

    def __init__(self, margin):
        self.margin = get_family(margin)
        self.margins = (self.margin,)
        self.copula = None
        self.param_names = ("mu", "sigma")
        self.responses = (self.margin.response_mu, self.margin.response_sigma)

    def describe(self):
        return {"type": "univariate", "margin": self.margin.name}

    @property
    def label(self):
        return self.margin.name

    def to_params(self, eta):
        return [r(e) for r, e in zip(self.responses, eta)]

    def evaluate(self, eta, ys) -> Evaluation:
        eta = np.asarray(eta, dtype=float)
        p = self.to_params(eta)
        with np.errstate(all="ignore"):
            logf = self.margin.logpdf(ys[0], p[0], p[1])
        return Evaluation(eta, p, (logf,), None, None, None)

    def loss_terms(self, ev):
        return (-ev.logf[0],)

    def update(self, ev, k, eta_k, ys):
        eta = ev.eta.copy()
        eta[k] = eta_k
        params = list(ev.params)
        params[k] = self.responses[k](eta_k)
        with np.errstate(all="ignore"):
            logf = self.margin.logpdf(ys[0], params[0], params[1])
        return Evaluation(eta, params, (logf,), None, None, None)

    def candidate_loss(self, ev, k, eta_k, ys):
        return self.update(ev, k, eta_k, ys).loss()

    def negative_gradient(self, ev, ys):
        mu, sigma = ev.params
        with np.errstate(all="ignore"):
            gm, gs = self.margin.dlogpdf(ys[0], mu, sigma)
            return np.vstack(
                [gm * self.responses[0].derivative(ev.eta[0]), gs * self.responses[1].derivative(ev.eta[1])]
            )

    def offsets(self, ys, X=None):
        mp = self.margin.fit_mle(ys[0])
        return np.array([float(self.responses[0].link(mp.mu)), float(self.responses[1].link(mp.sigma))])


def residual_kendall_tau(ys, X=None):
    """Kendall's tau of ``(log y1, log y2)`` after removing a linear fit on ``X``."""
    r = [np.log(np.asarray(y, dtype=float)) for y in ys]
    if X is not None and np.size(X):
        A = np.column_stack([np.ones(len(r[0])), np.asarray(X, dtype=float)])
        if A.shape[1] < A.shape[0]:
            r = [v - A @ np.linalg.lstsq(A, v, rcond=None)[0] for v in r]
    tau = stats.kendalltau(r[0], r[1]).statistic
    return 0.0 if not np.isfinite(tau) else float(tau)


def likelihood_from_description(d):
    if d["type"] == "bivariate":
        return BivariateCopulaLikelihood(d["margin1"], d["margin2"], d["copula"])
    if d["type"] == "univariate":
        return UnivariateLikelihood(d["margin"])
    raise ValueError(f"unknown likelihood type {d['type']!r}")
