from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..dist import DomainError, Params, Sample


class Method(str, enum.Enum):
    ML = "ML"
    LS = "LS"
    M_TUKEY = "M_TUKEY"
    OBRE = "OBRE"

    @classmethod
    def parse(cls, name: str) -> "Method":
        key = name.strip().upper().replace("-", "_")
        aliases = {"M": "M_TUKEY", "TUKEY": "M_TUKEY", "OBR": "OBRE"}
        return cls(aliases.get(key, key))


class DegenerateSampleError(DomainError):
    """The sample cannot identify three parameters."""


class EstimationError(RuntimeError):
    """An estimator could not produce an estimate at all."""


@dataclass(frozen=True)
class EstimationResult:
    params: Params
    method: Method
    converged: bool
    iterations: int
    objective: float

    def as_dict(self) -> dict:
        return {
            "method": self.method.value,
            "alpha": self.params.alpha,
            "c": self.params.c,
            "k": self.params.k,
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "objective": float(self.objective),
        }


def as_sample(s) -> Sample:
    return s if isinstance(s, Sample) else Sample(s)


def positive_log_values(s: Sample, min_n: int = 4) -> np.ndarray:
    """``log x`` of the ascending observations, after the checks every
    estimator shares.  Sorting makes every sum over the sample, and so every
    estimate, independent of the order the data arrived in."""
    x = s.sorted
    if x.size < min_n:
        raise DegenerateSampleError(f"need at least {min_n} observations, got {x.size}")
    if np.any(x <= 0.0):
        raise DomainError("all observations must be strictly positive")
    if np.all(x == x[0]):
        raise DegenerateSampleError("all observations are equal")
    return np.log(x)


@dataclass(frozen=True)
class TransformedSample:
    """Order statistics and their log-survival plotting positions.

    ``y[i] = -log(1 - (i + 0.5)/n)`` for the ascending observations, ``i``
    counted from zero.  The model counterpart ``u = -log S(x)`` is computed
    on demand.
    """

    y: np.ndarray
    x_sorted: np.ndarray

    @classmethod
    def from_sample(cls, s: Sample) -> "TransformedSample":
        n = len(s)
        i = np.arange(1, n + 1)
        y = -np.log1p(-(i - 0.5) / n)
        return cls(y=y, x_sorted=np.asarray(s.sorted, dtype=float))

    @property
    def log_x(self) -> np.ndarray:
        return np.log(self.x_sorted)

    def model(self, p: Params) -> np.ndarray:
        """``u_(i) = k log(1 + x^c) - log(alpha) + log(h)``."""
        from .._backend import kernels
        return self.y - kernels.log_survival_residuals(p.alpha, p.c, p.k, self.log_x, self.y)
