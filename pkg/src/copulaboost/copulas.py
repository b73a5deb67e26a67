"""One-parameter bivariate copulas: Gaussian, Clayton and Gumbel.

Each family provides the CDF, the log-density together with its analytic
partial derivatives in both arguments and the dependence parameter, the
Kendall's tau and tail-dependence maps, and a sampler. As in
:mod:`copulaboost.margins`, the class methods are vectorised and unchecked;
the module-level functions validate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError
from .links import Exp, Response, ShiftedExp, Tanh

#: |log c| is capped here so that risk sums stay finite in corners
LOG_DENSITY_CAP = 1e8

_RHO_MAX = 1.0 - 1e-12


@dataclass(frozen=True)
class DependenceSummary:
    kendall_tau: float
    lambda_lower: float
    lambda_upper: float


def _cap(logc):
    return np.clip(np.nan_to_num(logc, nan=np.nan, posinf=LOG_DENSITY_CAP, neginf=-LOG_DENSITY_CAP),
                   -LOG_DENSITY_CAP, LOG_DENSITY_CAP)


class CopulaFamily:
    name: str = ""
    response: Response
    #: parameter value giving the independence copula (may be a boundary limit)
    independence_theta: float

    @property
    def theta_domain(self):
        return self.response.domain

    def cdf(self, u1, u2, theta):
        raise NotImplementedError

    def _logpdf(self, u1, u2, theta):
        raise NotImplementedError

    def logpdf(self, u1, u2, theta):
        return _cap(self._logpdf(u1, u2, theta))

    def dlogpdf(self, u1, u2, theta):
        """Return ``(d log c/d u1, d log c/d u2, d log c/d theta)``."""
        raise NotImplementedError

    def kendall_tau(self, theta):
        raise NotImplementedError

    def tau_to_theta(self, tau):
        raise NotImplementedError

    def tail_dependence(self, theta) -> DependenceSummary:
        raise NotImplementedError

    def sample(self, theta, n, rng):
        """Draw ``n`` pairs; ``theta`` may be a scalar or a length-``n`` vector."""
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}()"


def _bvn_cdf(h, k, rho):
    """Standard bivariate normal CDF via Owen's T function."""
    h, k, rho = np.broadcast_arrays(
        np.asarray(h, dtype=float), np.asarray(k, dtype=float), np.asarray(rho, dtype=float)
    )
    s = np.sqrt((1.0 - rho) * (1.0 + rho))
    out = np.empty(h.shape)
    both0 = (h == 0) & (k == 0)
    out[both0] = 0.25 + np.arcsin(rho[both0]) / (2.0 * np.pi)
    rest = ~both0
    hh, kk, rr, ss = h[rest], k[rest], rho[rest], s[rest]
    with np.errstate(divide="ignore", invalid="ignore"):
        ah = np.where(hh == 0, np.copysign(np.inf, kk), (kk - rr * hh) / (hh * ss))
        ak = np.where(kk == 0, np.copysign(np.inf, hh), (hh - rr * kk) / (kk * ss))
    delta = np.where((hh * kk < 0) | ((hh * kk == 0) & (hh + kk < 0)), 0.5, 0.0)
    val = 0.5 * (special.ndtr(hh) + special.ndtr(kk)) - special.owens_t(hh, ah) - special.owens_t(kk, ak) - delta
    out[rest] = val
    return np.clip(out, 0.0, 1.0)


class Gaussian(CopulaFamily):
    name = "Gaussian"
    response = Tanh()
    independence_theta = 0.0

    def cdf(self, u1, u2, theta):
        rho = np.clip(theta, -_RHO_MAX, _RHO_MAX)
        return _bvn_cdf(special.ndtri(u1), special.ndtri(u2), rho)

    def _logpdf(self, u1, u2, theta):
        rho = np.clip(theta, -_RHO_MAX, _RHO_MAX)
        z1, z2 = special.ndtri(u1), special.ndtri(u2)
        om = (1.0 - rho) * (1.0 + rho)
        return -0.5 * np.log(om) - (rho * rho * (z1 * z1 + z2 * z2) - 2.0 * rho * (z1 * z2)) / (2.0 * om)

    def dlogpdf(self, u1, u2, theta):
        rho = np.clip(theta, -_RHO_MAX, _RHO_MAX)
        z1, z2 = special.ndtri(u1), special.ndtri(u2)
        om = (1.0 - rho) * (1.0 + rho)
        # dz/du = 1/phi(z)
        inv_phi1 = np.sqrt(2.0 * np.pi) * np.exp(0.5 * z1 * z1)
        inv_phi2 = np.sqrt(2.0 * np.pi) * np.exp(0.5 * z2 * z2)
        d1 = (rho * z2 - rho * rho * z1) / om * inv_phi1
        d2 = (rho * z1 - rho * rho * z2) / om * inv_phi2
        a = z1 * z1 + z2 * z2
        b = z1 * z2
        dt = rho / om - (rho * a - b * (1.0 + rho * rho)) / (om * om)
        return d1, d2, dt

    def kendall_tau(self, theta):
        return 2.0 / np.pi * np.arcsin(theta)

    def tau_to_theta(self, tau):
        return np.sin(0.5 * np.pi * np.asarray(tau, dtype=float))

    def tail_dependence(self, theta):
        return DependenceSummary(float(self.kendall_tau(theta)), 0.0, 0.0)

    def sample(self, theta, n, rng):
        rho = np.broadcast_to(np.asarray(theta, dtype=float), (n,))
        z1 = rng.standard_normal(n)
        z2 = rho * z1 + np.sqrt((1.0 - rho) * (1.0 + rho)) * rng.standard_normal(n)
        return special.ndtr(z1), special.ndtr(z2)


def _clayton_log_a(a1, a2):
    """log(exp(a1) + exp(a2) - 1) for a1, a2 >= 0 without overflow or cancellation."""
    hi = np.maximum(a1, a2)
    lo = np.minimum(a1, a2)
    with np.errstate(over="ignore", invalid="ignore"):
        small = np.log1p(np.expm1(a1) + np.expm1(a2))
        large = hi + np.log1p(np.exp(lo - hi) - np.exp(-hi))
    return np.where(hi < 0.5, small, large)


class Clayton(CopulaFamily):
    name = "Clayton"
    response = Exp()
    independence_theta = 0.0

    def _parts(self, u1, u2, theta):
        l1, l2 = np.log(u1), np.log(u2)
        a1, a2 = -theta * l1, -theta * l2
        log_a = _clayton_log_a(a1, a2)
        return l1, l2, a1, a2, log_a

    def cdf(self, u1, u2, theta):
        _, _, _, _, log_a = self._parts(u1, u2, theta)
        return np.exp(-log_a / theta)

    def _logpdf(self, u1, u2, theta):
        l1, l2, _, _, log_a = self._parts(u1, u2, theta)
        return np.log1p(theta) - (1.0 + theta) * (l1 + l2) - (2.0 + 1.0 / theta) * log_a

    def dlogpdf(self, u1, u2, theta):
        l1, l2, a1, a2, log_a = self._parts(u1, u2, theta)
        r1 = np.exp(a1 - log_a)
        r2 = np.exp(a2 - log_a)
        d1 = (-(1.0 + theta) + (2.0 * theta + 1.0) * r1) / u1
        d2 = (-(1.0 + theta) + (2.0 * theta + 1.0) * r2) / u2
        dt = (
            1.0 / (1.0 + theta)
            - (l1 + l2)
            + log_a / theta**2
            + (2.0 + 1.0 / theta) * (r1 * l1 + r2 * l2)
        )
        return d1, d2, dt

    def kendall_tau(self, theta):
        theta = np.asarray(theta, dtype=float)
        return theta / (theta + 2.0)

    def tau_to_theta(self, tau):
        tau = np.asarray(tau, dtype=float)
        return 2.0 * tau / (1.0 - tau)

    def tail_dependence(self, theta):
        return DependenceSummary(float(self.kendall_tau(theta)), float(2.0 ** (-1.0 / theta)), 0.0)

    def sample(self, theta, n, rng):
        # Marshall-Olkin: gamma frailty V, U_i = (1 + E_i / V)^(-1/theta)
        theta = np.broadcast_to(np.asarray(theta, dtype=float), (n,))
        v = rng.gamma(1.0 / theta, 1.0)
        e = rng.standard_exponential((2, n))
        u = np.exp(-np.log1p(e / v) / theta)
        return u[0], u[1]


class Gumbel(CopulaFamily):
    name = "Gumbel"
    response = ShiftedExp()
    independence_theta = 1.0

    def _parts(self, u1, u2, theta):
        l1, l2 = np.log(u1), np.log(u2)
        lt1, lt2 = np.log(-l1), np.log(-l2)
        lv1, lv2 = theta * lt1, theta * lt2
        big_l = np.logaddexp(lv1, lv2)
        w = np.exp(big_l / theta)
        return l1, l2, lt1, lt2, lv1, lv2, big_l, w

    def cdf(self, u1, u2, theta):
        w = self._parts(u1, u2, theta)[-1]
        return np.exp(-w)

    def _logpdf(self, u1, u2, theta):
        l1, l2, lt1, lt2, _, _, big_l, w = self._parts(u1, u2, theta)
        return (
            -w - (l1 + l2) + (theta - 1.0) * (lt1 + lt2) + (1.0 / theta - 2.0) * big_l
            + np.log(w + theta - 1.0)
        )

    def dlogpdf(self, u1, u2, theta):
        l1, l2, lt1, lt2, lv1, lv2, big_l, w = self._parts(u1, u2, theta)
        q1 = np.exp(lv1 - big_l)
        q2 = np.exp(lv2 - big_l)
        wt = w + theta - 1.0
        t1, t2 = -l1, -l2

        def d_dt(q, t):
            return (-w * q + (theta - 1.0) + (1.0 - 2.0 * theta) * q + w * q / wt) / t

        d1 = -1.0 / u1 - d_dt(q1, t1) / u1
        d2 = -1.0 / u2 - d_dt(q2, t2) / u2
        ld = q1 * lt1 + q2 * lt2
        dw = w * (ld / theta - big_l / theta**2)
        dt = -dw + lt1 + lt2 - big_l / theta**2 + (1.0 / theta - 2.0) * ld + (dw + 1.0) / wt
        return d1, d2, dt

    def log_h(self, u2, u1, theta):
        """log of the conditional CDF P(U2 <= u2 | U1 = u1) = dC/du1."""
        l1, _, lt1, _, _, _, big_l, w = self._parts(u1, u2, theta)
        return -w - l1 + (theta - 1.0) * lt1 + (1.0 / theta - 1.0) * big_l

    def kendall_tau(self, theta):
        return 1.0 - 1.0 / np.asarray(theta, dtype=float)

    def tau_to_theta(self, tau):
        return 1.0 / (1.0 - np.asarray(tau, dtype=float))

    def tail_dependence(self, theta):
        return DependenceSummary(float(self.kendall_tau(theta)), 0.0, float(2.0 - 2.0 ** (1.0 / theta)))

    def sample(self, theta, n, rng, iterations=60):
        # conditional inversion: solve h(u2 | u1) = p by bisection on logit(u2)
        theta = np.broadcast_to(np.asarray(theta, dtype=float), (n,))
        u1 = rng.uniform(size=n)
        logp = np.log(rng.uniform(size=n))
        lo = np.full(n, -40.0)
        hi = np.full(n, 40.0)
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            below = self.log_h(special.expit(mid), u1, theta) < logp
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return u1, special.expit(0.5 * (lo + hi))


COPULAS: dict[str, CopulaFamily] = {c.name: c for c in (Gaussian(), Clayton(), Gumbel())}


def get_copula(copula) -> CopulaFamily:
    if isinstance(copula, CopulaFamily):
        return copula
    for key, fam in COPULAS.items():
        if key.lower() == str(copula).lower() or (key == "Gaussian" and str(copula).lower() == "gauss"):
            return fam
    raise KeyError(f"unknown copula {copula!r}; choose from {sorted(COPULAS)}")


# -- validated functional interface ------------------------------------------


def _check(fam, u1, u2, theta):
    fam = get_copula(fam)
    u1, u2 = np.asarray(u1, dtype=float), np.asarray(u2, dtype=float)
    for u in (u1, u2):
        if np.any(~(u > 0)) or np.any(~(u < 1)):
            raise DomainError("copula arguments must lie strictly inside (0, 1)")
    return fam, u1, u2, _check_theta(fam, theta)


def _check_theta(fam, theta):
    theta = np.asarray(theta, dtype=float)
    lo, hi = fam.theta_domain
    if np.any(~(theta > lo)) or np.any(~(theta < hi)):
        raise DomainError(f"{fam.name}: theta must lie in ({lo}, {hi})")
    return theta


def copula_cdf(fam, u1, u2, theta):
    fam, u1, u2, theta = _check(fam, u1, u2, theta)
    return fam.cdf(u1, u2, theta)


def log_copula_density(fam, u1, u2, theta):
    fam, u1, u2, theta = _check(fam, u1, u2, theta)
    return fam.logpdf(u1, u2, theta)


def dlogc_du(fam, u1, u2, theta, which: str):
    fam, u1, u2, theta = _check(fam, u1, u2, theta)
    d1, d2, _ = fam.dlogpdf(u1, u2, theta)
    if which == "u1":
        return d1
    if which == "u2":
        return d2
    raise ValueError("which must be 'u1' or 'u2'")


def dlogc_dtheta(fam, u1, u2, theta):
    fam, u1, u2, theta = _check(fam, u1, u2, theta)
    return fam.dlogpdf(u1, u2, theta)[2]


def kendall_tau(fam, theta):
    fam = get_copula(fam)
    return fam.kendall_tau(_check_theta(fam, theta))


def tail_dependence(fam, theta) -> DependenceSummary:
    fam = get_copula(fam)
    return fam.tail_dependence(float(_check_theta(fam, theta)))


def sample_pair(fam, theta, n: int, rng: np.random.Generator):
    if n < 1:
        raise ValueError("n must be >= 1")
    fam = get_copula(fam)
    return fam.sample(_check_theta(fam, theta), n, rng)


def response_theta(fam, eta):
    return get_copula(fam).response(eta)


def link_theta(fam, theta):
    return get_copula(fam).response.link(theta)
