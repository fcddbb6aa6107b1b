"""Parameter estimators: ML, least squares, Tukey M and OBRE."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ..numkit import OptimConfig
from ._common import (DegenerateSampleError, EstimationError, EstimationResult, Method,
                      TransformedSample)
from .ls import fit_ls
from .ml import fit_ml
from .obre import ObreConfig, ObreFit, ObreState, fit_obre, fit_obre_state, obre_solve_Aa, obre_weights
from .tukey import MEstConfig, fit_m_tukey

__all__ = [
    "Method",
    "EstimationResult",
    "EstimationError",
    "DegenerateSampleError",
    "TransformedSample",
    "MEstConfig",
    "ObreConfig",
    "ObreState",
    "ObreFit",
    "FitSettings",
    "fit_ml",
    "fit_ls",
    "fit_m_tukey",
    "fit_obre",
    "fit_obre_state",
    "obre_solve_Aa",
    "obre_weights",
    "fit_many",
]

# failures that are reported per method instead of aborting a batch
FIT_ERRORS = (EstimationError, ArithmeticError, np.linalg.LinAlgError)


@dataclass(frozen=True)
class FitSettings:
    """Configuration for every estimator in one bundle."""

    optim: OptimConfig = field(default_factory=OptimConfig)
    mest: MEstConfig = field(default_factory=MEstConfig)
    obre: ObreConfig = field(default_factory=ObreConfig)


def fit_many(s, methods: Iterable, settings: FitSettings | None = None) -> dict:
    """Run several estimators on one sample with the usual starting values.

    M starts from the LS estimate and OBRE from the ML estimate; a
    prerequisite fit is computed once and reused.  Returns a dict from
    :class:`Method` to :class:`EstimationResult`, or to the exception that
    stopped that method.
    """
    settings = settings or FitSettings()
    methods = [m if isinstance(m, Method) else Method.parse(m) for m in methods]
    cache: dict = {}

    def run(method):
        if method not in cache:
            try:
                cache[method] = _fit_one(method, s, settings, run)
            except FIT_ERRORS as exc:
                cache[method] = exc
        return cache[method]

    return {m: run(m) for m in methods}


def _fit_one(method, s, settings, run):
    if method is Method.ML:
        return fit_ml(s, settings.optim)
    if method is Method.LS:
        return fit_ls(s, settings.optim)
    if method is Method.M_TUKEY:
        init = run(Method.LS)
        if isinstance(init, Exception):
            raise EstimationError(f"no LS starting value: {init}")
        return fit_m_tukey(s, settings.mest, init=init.params)
    init = run(Method.ML)
    if isinstance(init, Exception):
        raise EstimationError(f"no ML starting value: {init}")
    return fit_obre(s, settings.obre, init=init.params)
