"""Component-wise gradient boosting for bivariate distributional copula regression."""

from .copulas import Clayton, Gaussian, Gumbel, get_copula
from .data import Dataset
from .engine import BoostConfig, Booster, FitResult, LearnerSettings, ModelSpec, copula_spec, fit, univariate_spec
from .likelihood import BivariateCopulaLikelihood, UnivariateLikelihood
from .margins import Gamma, LogLogistic, LogNormal, MarginParams, Weibull, get_family

__version__ = "0.1.0"

__all__ = [
    "BivariateCopulaLikelihood",
    "BoostConfig",
    "Booster",
    "Clayton",
    "Dataset",
    "FitResult",
    "Gamma",
    "Gaussian",
    "Gumbel",
    "LearnerSettings",
    "LogLogistic",
    "LogNormal",
    "MarginParams",
    "ModelSpec",
    "UnivariateLikelihood",
    "Weibull",
    "copula_spec",
    "fit",
    "get_copula",
    "get_family",
    "univariate_spec",
]
