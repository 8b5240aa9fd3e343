"""The 1-periodic, mean-zero driving potential and its moments."""

import json
import logging
import math
from typing import Any, Dict, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import InvalidInputError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]

ANTISYMMETRY_GRID = 256


class PeriodicPotential(BaseModel):
    """psi(x) = sum_k a_k cos(2 pi k x) + b_k sin(2 pi k x), k = 1..K.

    There is no constant term, so the mean over a period is zero exactly.
    """

    model_config = ConfigDict(frozen=True)

    cos_coeffs: tuple[float, ...] = Field(default=(), description="a_k, coefficient of cos(2 pi k x)")
    sin_coeffs: tuple[float, ...] = Field(default=(), description="b_k, coefficient of sin(2 pi k x)")

    @field_validator("cos_coeffs", "sin_coeffs", mode="before")
    @classmethod
    def coerce_finite(cls, v):
        values = tuple(float(c) for c in v)
        if not all(math.isfinite(c) for c in values):
            raise ValueError("coefficients must be finite")
        return values

    @model_validator(mode="after")
    def check_lengths(self):
        if len(self.cos_coeffs) != len(self.sin_coeffs):
            raise ValueError("cos_coeffs and sin_coeffs must have equal length")
        return self

    @property
    def bandwidth(self) -> int:
        return len(self.cos_coeffs)

    @property
    def coefficient_sum(self) -> float:
        """sum |a_k| + |b_k|, an upper bound for max |psi|."""
        return float(sum(abs(c) for c in self.cos_coeffs) + sum(abs(c) for c in self.sin_coeffs))

    def _phases(self, x: ArrayLike) -> np.ndarray:
        x = np.mod(np.asarray(x, dtype=float), 1.0)
        k = np.arange(1, self.bandwidth + 1)
        return 2.0 * np.pi * k * x[..., None]

    def eval(self, x: ArrayLike) -> Union[float, np.ndarray]:
        """psi(x); any real x, periodic extension applies."""
        phase = self._phases(x)
        value = np.cos(phase) @ np.asarray(self.cos_coeffs) + np.sin(phase) @ np.asarray(self.sin_coeffs)
        return float(value) if np.ndim(value) == 0 else value

    def eval_derivative(self, x: ArrayLike) -> Union[float, np.ndarray]:
        """Exact derivative psi'(x)."""
        phase = self._phases(x)
        k = 2.0 * np.pi * np.arange(1, self.bandwidth + 1)
        value = np.cos(phase) @ (k * np.asarray(self.sin_coeffs)) - np.sin(phase) @ (k * np.asarray(self.cos_coeffs))
        return float(value) if np.ndim(value) == 0 else value

    def sample(self, x_grid: ArrayLike) -> np.ndarray:
        return np.atleast_1d(self.eval(x_grid))

    def oscillation(self, n_points: int = 1024) -> float:
        """max psi - min psi on a uniform grid."""
        values = self.sample(np.arange(n_points) / n_points)
        return float(values.max() - values.min())

    def reflected(self) -> "PeriodicPotential":
        """The mirror image x -> psi(-x)."""
        return PeriodicPotential(cos_coeffs=self.cos_coeffs, sin_coeffs=tuple(-b for b in self.sin_coeffs))

    def complex_coefficients(self) -> Dict[int, complex]:
        """Fourier coefficients c_m with psi(x) = sum_m c_m exp(2 pi i m x)."""
        coeffs: Dict[int, complex] = {}
        for k, (a, b) in enumerate(zip(self.cos_coeffs, self.sin_coeffs), start=1):
            coeffs[k] = complex(a, -b) / 2.0
            coeffs[-k] = complex(a, b) / 2.0
        return coeffs

    def to_dict(self) -> Dict[str, Any]:
        return {"cos": list(self.cos_coeffs), "sin": list(self.sin_coeffs)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PeriodicPotential":
        unknown = set(data) - {"cos", "sin"}
        if unknown:
            raise InvalidInputError(f"unknown potential keys: {sorted(unknown)}")
        return make_trig_potential(data.get("cos", []), data.get("sin", []))

    @classmethod
    def from_json(cls, text: str) -> "PeriodicPotential":
        return cls.from_dict(json.loads(text))


def make_trig_potential(cos_coeffs: Sequence[float], sin_coeffs: Sequence[float]) -> PeriodicPotential:
    """Build a potential from equal-length coefficient lists (K = 0 gives psi = 0)."""
    if len(cos_coeffs) != len(sin_coeffs):
        raise InvalidInputError(
            f"coefficient lists differ in length: {len(cos_coeffs)} cos vs {len(sin_coeffs)} sin"
        )
    if not all(math.isfinite(float(c)) for c in list(cos_coeffs) + list(sin_coeffs)):
        raise InvalidInputError("potential coefficients must be finite")
    return PeriodicPotential(cos_coeffs=tuple(cos_coeffs), sin_coeffs=tuple(sin_coeffs))


def random_trig_potential(K: int, amplitude: float, rng: np.random.Generator) -> PeriodicPotential:
    """Coefficients drawn uniformly from [-amplitude, amplitude]."""
    return make_trig_potential(
        rng.uniform(-amplitude, amplitude, K).tolist(),
        rng.uniform(-amplitude, amplitude, K).tolist(),
    )


def moment(p: PeriodicPotential, j: int, n_points: int) -> float:
    """M_j = integral of psi^j over a period, by the uniform periodic trapezoid rule.

    The rule is exact for trigonometric polynomials of degree below n_points,
    hence the requirement n_points >= 4*K*j.
    """
    if j < 0:
        raise InvalidInputError(f"moment order must be non-negative, got {j}")
    if j == 0:
        return 1.0
    required = max(4 * p.bandwidth * j, 1)
    if n_points < required:
        raise InvalidInputError(f"n_points={n_points} too small for moment {j}; need >= {required}")
    x = np.arange(n_points) / n_points
    return float(np.mean(p.eval(x) ** j))


def is_antisymmetric(p: PeriodicPotential, tol: float) -> bool:
    """True when max |psi(x) + psi(-x)| over a 256-point grid is at most tol."""
    if tol <= 0:
        raise InvalidInputError("tol must be positive")
    x = np.arange(ANTISYMMETRY_GRID) / ANTISYMMETRY_GRID
    return bool(np.max(np.abs(p.eval(x) + p.eval(-x)), initial=0.0) <= tol)
