"""Two-parameter continuous marginal distributions on the positive half-line.

Every family is parametrised by ``(mu, sigma)``:

========== ================= =================
family     mu                sigma
========== ================= =================
LogNormal  location of log Y scale of log Y
LogLogistic scale (median)   shape
Gamma      scale             shape
Weibull    scale             shape
========== ================= =================

All methods are vectorised over ``y`` and the parameters and perform no
input validation; the module-level functions (:func:`log_pdf`, :func:`cdf`,
...) validate their arguments and raise :class:`~copulaboost.errors.DomainError`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .errors import DomainError, UndefinedMomentError
from .links import Exp, Identity, Response

#: probabilities handed to a copula are kept inside [PROB_EPS, 1 - PROB_EPS]
PROB_EPS = 1e-12

_LOG_2PI = np.log(2.0 * np.pi)


def clamp_probability(u):
    return np.clip(u, PROB_EPS, 1.0 - PROB_EPS)


@dataclass(frozen=True)
class MarginParams:
    mu: float
    sigma: float


class MarginalFamily:
    """Interface shared by the marginal families."""

    name: str = ""
    response_mu: Response = Exp()
    response_sigma: Response = Exp()
    mu_positive = True

    # -- densities ---------------------------------------------------------
    def logpdf(self, y, mu, sigma):
        raise NotImplementedError

    def pdf(self, y, mu, sigma):
        return np.exp(self.logpdf(y, mu, sigma))

    def cdf(self, y, mu, sigma):
        raise NotImplementedError

    def quantile(self, u, mu, sigma):
        raise NotImplementedError

    # -- analytic partial derivatives ---------------------------------------
    def dlogpdf(self, y, mu, sigma):
        """Return ``(d log f / d mu, d log f / d sigma)``."""
        raise NotImplementedError

    def dcdf(self, y, mu, sigma):
        """Return ``(d F / d mu, d F / d sigma)``."""
        raise NotImplementedError

    # -- moments and sampling ------------------------------------------------
    def mean(self, mu, sigma):
        raise NotImplementedError

    def sample(self, mu, sigma, n, rng):
        u = rng.uniform(size=n)
        return self.quantile(u, mu, sigma)

    # -- intercept-only maximum likelihood ----------------------------------
    def start_values(self, y):
        raise NotImplementedError

    def fit_mle(self, y) -> MarginParams:
        """Maximum likelihood estimate of constant ``(mu, sigma)`` for a sample."""
        y = np.asarray(y, dtype=float)
        mu0, s0 = self.start_values(y)
        rm, rs = self.response_mu, self.response_sigma
        x0 = np.array([rm.link(mu0), rs.link(s0)])
        n = y.size

        def objective(eta):
            mu, sigma = rm(eta[0]), rs(eta[1])
            if not (np.isfinite(mu) and np.isfinite(sigma) and sigma > 0):
                return np.inf, np.zeros(2)
            val = -np.sum(self.logpdf(y, mu, sigma)) / n
            gm, gs = self.dlogpdf(y, mu, sigma)
            grad = -np.array(
                [np.sum(gm) * rm.derivative(eta[0]), np.sum(gs) * rs.derivative(eta[1])]
            ) / n
            if not np.isfinite(val):
                return np.inf, np.zeros(2)
            return val, grad

        res = optimize.minimize(objective, x0, jac=True, method="BFGS", options={"gtol": 1e-10})
        return MarginParams(float(rm(res.x[0])), float(rs(res.x[1])))

    def __repr__(self):
        return f"{type(self).__name__}()"


class LogNormal(MarginalFamily):
    name = "LogNormal"
    response_mu = Identity()
    mu_positive = False

    def logpdf(self, y, mu, sigma):
        z = (np.log(y) - mu) / sigma
        return -0.5 * _LOG_2PI - np.log(sigma) - np.log(y) - 0.5 * z * z

    def cdf(self, y, mu, sigma):
        return special.ndtr((np.log(y) - mu) / sigma)

    def quantile(self, u, mu, sigma):
        return np.exp(mu + sigma * special.ndtri(u))

    def dlogpdf(self, y, mu, sigma):
        z = (np.log(y) - mu) / sigma
        return z / sigma, (z * z - 1.0) / sigma

    def dcdf(self, y, mu, sigma):
        z = (np.log(y) - mu) / sigma
        phi = np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)
        return -phi / sigma, -phi * z / sigma

    def mean(self, mu, sigma):
        return np.exp(mu + 0.5 * np.asarray(sigma) ** 2)

    def sample(self, mu, sigma, n, rng):
        return np.exp(mu + sigma * rng.standard_normal(n))

    def start_values(self, y):
        ly = np.log(y)
        return ly.mean(), ly.std()

    def fit_mle(self, y):
        ly = np.log(np.asarray(y, dtype=float))
        return MarginParams(float(ly.mean()), float(ly.std()))


class LogLogistic(MarginalFamily):
    name = "LogLogistic"

    def logpdf(self, y, mu, sigma):
        q = sigma * (np.log(y) - np.log(mu))
        return np.log(sigma) - np.log(y) + q - 2.0 * np.logaddexp(0.0, q)

    def cdf(self, y, mu, sigma):
        return special.expit(sigma * (np.log(y) - np.log(mu)))

    def quantile(self, u, mu, sigma):
        return mu * np.exp(special.logit(u) / sigma)

    def dlogpdf(self, y, mu, sigma):
        ly = np.log(y) - np.log(mu)
        w = 1.0 - 2.0 * special.expit(sigma * ly)
        return -(sigma / mu) * w, 1.0 / sigma + ly * w

    def dcdf(self, y, mu, sigma):
        ly = np.log(y) - np.log(mu)
        p = special.expit(sigma * ly)
        dens = p * (1.0 - p)
        return -dens * sigma / mu, dens * ly

    def mean(self, mu, sigma):
        sigma = np.asarray(sigma, dtype=float)
        if np.any(sigma <= 1.0):
            raise UndefinedMomentError("LogLogistic mean requires shape sigma > 1")
        b = np.pi / sigma
        return mu * b / np.sin(b)

    def start_values(self, y):
        ly = np.log(y)
        sd = max(ly.std(), 1e-8)
        return float(np.exp(np.median(ly))), float(np.pi / (np.sqrt(3.0) * sd))


def _dgammainc_da(a, x):
    """d P(a, x) / d a for the regularised lower incomplete gamma function.

    Term-wise differentiation of ``P(a, x) = sum_n x**(a+n) exp(-x) / Gamma(a+n+1)``.
    Far in the upper tail the leading-order asymptotic of the complement is used.
    """
    a, x = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(x, dtype=float))
    out = np.zeros(a.shape)
    pos = x > 0
    tail = pos & (x > a + 40.0 * np.sqrt(a) + 60.0)
    ser = pos & ~tail

    if np.any(ser):
        aa, xx = a[ser], x[ser]
        lx = np.log(xx)
        total = np.zeros(aa.shape)
        psum = np.zeros(aa.shape)
        start = 0
        chunk = 64
        while True:
            n = np.arange(start, start + chunk)[:, None]
            an1 = aa[None, :] + n + 1.0
            logt = (an1 - 1.0) * lx[None, :] - xx[None, :] - special.gammaln(an1)
            t = np.exp(logt)
            total += np.sum(t * (lx[None, :] - special.digamma(an1)), axis=0)
            psum += t.sum(axis=0)
            start += chunk
            last = t[-1]
            past_peak = (aa + start) > xx
            if np.all(past_peak & (last <= 1e-17 * np.maximum(psum, 1e-300))) or start > 50000:
                break
        out[ser] = total

    if np.any(tail):
        aa, xx = a[tail], x[tail]
        q = special.gammaincc(aa, xx)
        out[tail] = -q * (np.log(xx) - special.digamma(aa))
    return out


class Gamma(MarginalFamily):
    """Gamma with scale ``mu`` and shape ``sigma``."""

    name = "Gamma"

    def logpdf(self, y, mu, sigma):
        return (sigma - 1.0) * np.log(y) - y / mu - sigma * np.log(mu) - special.gammaln(sigma)

    def cdf(self, y, mu, sigma):
        return special.gammainc(sigma, y / mu)

    def quantile(self, u, mu, sigma):
        return mu * special.gammaincinv(sigma, u)

    def dlogpdf(self, y, mu, sigma):
        return y / mu**2 - sigma / mu, np.log(y) - np.log(mu) - special.digamma(sigma)

    def dcdf(self, y, mu, sigma):
        dens = self.pdf(y, mu, sigma)
        return -dens * y / mu, _dgammainc_da(sigma, y / mu)

    def mean(self, mu, sigma):
        return np.asarray(mu) * sigma

    def sample(self, mu, sigma, n, rng):
        return rng.gamma(sigma, mu, size=n)

    def start_values(self, y):
        m, v = y.mean(), y.var()
        return float(v / m), float(m * m / v)


class Weibull(MarginalFamily):
    """Weibull with scale ``mu`` and shape ``sigma``."""

    name = "Weibull"

    def logpdf(self, y, mu, sigma):
        lz = np.log(y) - np.log(mu)
        return np.log(sigma) - np.log(mu) + (sigma - 1.0) * lz - np.exp(sigma * lz)

    def cdf(self, y, mu, sigma):
        return -np.expm1(-np.exp(sigma * (np.log(y) - np.log(mu))))

    def quantile(self, u, mu, sigma):
        return mu * (-np.log1p(-u)) ** (1.0 / sigma)

    def dlogpdf(self, y, mu, sigma):
        lz = np.log(y) - np.log(mu)
        p = np.exp(sigma * lz)
        return (sigma / mu) * (p - 1.0), 1.0 / sigma + lz - p * lz

    def dcdf(self, y, mu, sigma):
        lz = np.log(y) - np.log(mu)
        p = np.exp(sigma * lz)
        s = np.exp(-p) * p
        return -s * sigma / mu, s * lz

    def mean(self, mu, sigma):
        return np.asarray(mu) * special.gamma(1.0 + 1.0 / np.asarray(sigma))

    def sample(self, mu, sigma, n, rng):
        return mu * rng.weibull(sigma, size=n)

    def start_values(self, y):
        ly = np.log(y)
        k = np.pi / (np.sqrt(6.0) * max(ly.std(), 1e-8))
        return float(np.exp(ly.mean() + np.euler_gamma / k)), float(k)


FAMILIES: dict[str, MarginalFamily] = {
    f.name: f for f in (LogNormal(), LogLogistic(), Gamma(), Weibull())
}


def get_family(family) -> MarginalFamily:
    """Look up a family by (case-insensitive) name; instances pass through."""
    if isinstance(family, MarginalFamily):
        return family
    for key, fam in FAMILIES.items():
        if key.lower() == str(family).lower():
            return fam
    raise KeyError(f"unknown marginal family {family!r}; choose from {sorted(FAMILIES)}")


# -- validated functional interface ------------------------------------------


def check_params(family, p: MarginParams):
    fam = get_family(family)
    mu, sigma = np.asarray(p.mu, dtype=float), np.asarray(p.sigma, dtype=float)
    if np.any(~np.isfinite(mu)) or np.any(~(sigma > 0)) or np.any(~np.isfinite(sigma)):
        raise DomainError(f"{fam.name}: need finite mu and sigma > 0")
    if fam.mu_positive and np.any(~(mu > 0)):
        raise DomainError(f"{fam.name}: mu must be positive")
    return fam, mu, sigma


def _check_y(y):
    y = np.asarray(y, dtype=float)
    if np.any(~(y > 0)) or np.any(~np.isfinite(y)):
        raise DomainError("responses must be finite and strictly positive")
    return y


def log_pdf(family, y, p: MarginParams):
    fam, mu, sigma = check_params(family, p)
    return fam.logpdf(_check_y(y), mu, sigma)


def cdf(family, y, p: MarginParams):
    fam, mu, sigma = check_params(family, p)
    return fam.cdf(_check_y(y), mu, sigma)


def dlogpdf_dparam(family, y, p: MarginParams, which: str):
    fam, mu, sigma = check_params(family, p)
    return fam.dlogpdf(_check_y(y), mu, sigma)[_which(which)]


def dcdf_dparam(family, y, p: MarginParams, which: str):
    fam, mu, sigma = check_params(family, p)
    return fam.dcdf(_check_y(y), mu, sigma)[_which(which)]


def mean(family, p: MarginParams):
    fam, mu, sigma = check_params(family, p)
    return fam.mean(mu, sigma)


def quantile(family, u, p: MarginParams):
    fam, mu, sigma = check_params(family, p)
    u = np.asarray(u, dtype=float)
    if np.any(~(u > 0)) or np.any(~(u < 1)):
        raise DomainError("quantile level must lie in (0, 1)")
    return fam.quantile(u, mu, sigma)


def sample(family, p: MarginParams, n: int, rng: np.random.Generator):
    if n < 1:
        raise ValueError("n must be >= 1")
    fam, mu, sigma = check_params(family, p)
    return fam.sample(mu, sigma, n, rng)


def _which(which: str) -> int:
    try:
        return {"mu": 0, "sigma": 1}[which]
    except KeyError:
        raise ValueError(f"which must be 'mu' or 'sigma', got {which!r}") from None
