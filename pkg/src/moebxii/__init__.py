"""Marshall-Olkin extended Burr XII distribution and robust estimators of its
parameters (maximum likelihood, least squares, Tukey M, OBRE)."""
from ._backend import BACKEND
from .dist import (DomainError, Params, Sample, cdf, fisher_information, log_pdf, pdf,
                   quantile, sample, score, survival)
from .estimators import (EstimationError, EstimationResult, FitSettings, Method, fit_many,
                         fit_ls, fit_m_tukey, fit_ml, fit_obre)
from .numkit import OptimConfig, QuadratureConfig

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DomainError",
    "Params",
    "Sample",
    "pdf",
    "cdf",
    "survival",
    "quantile",
    "sample",
    "log_pdf",
    "score",
    "fisher_information",
    "Method",
    "EstimationResult",
    "EstimationError",
    "FitSettings",
    "fit_ml",
    "fit_ls",
    "fit_m_tukey",
    "fit_obre",
    "fit_many",
    "OptimConfig",
    "QuadratureConfig",
]
