"""In-memory dataset container."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError


@dataclass
class Dataset:
    """Responses ``y`` (tuple of 1 or 2 vectors) and an ``(n, p)`` covariate matrix."""

    y: tuple
    X: np.ndarray
    names: list = field(default_factory=list)
    response_names: tuple = ("y1", "y2")

    def __post_init__(self):
        self.y = tuple(np.asarray(v, dtype=float) for v in self.y)
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim == 1:
            self.X = self.X[:, None]
        n = self.X.shape[0]
        if any(v.shape != (n,) for v in self.y):
            raise DataError("responses and covariates must have the same number of rows")
        if not self.names:
            self.names = [f"x{j + 1}" for j in range(self.X.shape[1])]
        if len(self.names) != self.X.shape[1]:
            raise DataError("one name per covariate column is required")
        self.response_names = tuple(self.response_names)[: len(self.y)]

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    def subset(self, idx):
        idx = np.asarray(idx)
        return Dataset(tuple(v[idx] for v in self.y), self.X[idx], list(self.names), self.response_names)

    def response(self, d):
        """Univariate dataset for response ``d``."""
        return Dataset((self.y[d],), self.X, list(self.names), (self.response_names[d],))

    def validate(self):
        for name, v in zip(self.response_names, self.y):
            if not np.all(np.isfinite(v)):
                raise DataError(f"response {name} has missing or non-finite values")
            if not np.all(v > 0):
                raise DataError(f"response {name} must be strictly positive")
        if not np.all(np.isfinite(self.X)):
            raise DataError("covariates contain missing or non-finite values")
        return self
