"""Monotone response functions and their inverse links.

A response function maps an unconstrained additive predictor onto the
parameter space of a distribution parameter; the link is its inverse.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError


class Response:
    """Base class. Subclasses implement ``__call__``, ``link`` and ``derivative``."""

    name = "base"
    domain = (-np.inf, np.inf)

    def __call__(self, eta):
        raise NotImplementedError

    def link(self, theta):
        raise NotImplementedError

    def derivative(self, eta):
        """d theta / d eta evaluated at ``eta``."""
        raise NotImplementedError

    def _check(self, theta):
        theta = np.asarray(theta, dtype=float)
        lo, hi = self.domain
        if np.any(~(theta > lo)) or np.any(~(theta < hi)):
            raise DomainError(f"{self.name} link: argument outside ({lo}, {hi})")
        return theta

    def __repr__(self):
        return f"{type(self).__name__}()"


class Identity(Response):
    name = "identity"

    def __call__(self, eta):
        return np.asarray(eta, dtype=float)

    def link(self, theta):
        return self._check(theta)

    def derivative(self, eta):
        return np.ones_like(np.asarray(eta, dtype=float))


class Exp(Response):
    """theta = exp(eta), log link."""

    name = "exp"
    domain = (0.0, np.inf)

    def __call__(self, eta):
        return np.exp(eta)

    def link(self, theta):
        return np.log(self._check(theta))

    def derivative(self, eta):
        return np.exp(eta)


class ShiftedExp(Response):
    """theta = 1 + exp(eta), link log(theta - 1)."""

    name = "shifted_exp"
    domain = (1.0, np.inf)

    def __call__(self, eta):
        return 1.0 + np.exp(eta)

    def link(self, theta):
        return np.log(self._check(theta) - 1.0)

    def derivative(self, eta):
        return np.exp(eta)


class Tanh(Response):
    """theta = tanh(eta), Fisher z link."""

    name = "tanh"
    domain = (-1.0, 1.0)

    def __call__(self, eta):
        return np.tanh(eta)

    def link(self, theta):
        return np.arctanh(self._check(theta))

    def derivative(self, eta):
        # 1 / cosh^2 stays accurate where 1 - tanh^2 would round to zero
        return 1.0 / np.cosh(np.clip(eta, -350.0, 350.0)) ** 2
