"""Moving-frame steady state: current, density and mean velocity.

In the moving frame z = x - Vt the stationary density solves

    sigma * rho_z + (psi_z + V) * rho = I,    integral of rho over a period = 1.

With f_+-(z) = exp(+-(Vz + psi(z))/sigma) and F_+-(z) = int_0^z f_+-, the solution is
rho = f_-(beta + J F_+) where J = I/sigma is the reduced current. Periodicity and
normalization give

    exp(-V/sigma) H_- + H_+ = (1 - exp(-V/sigma)) / J,   H_+ = int F_+ f_-,  H_- = int F_- f_+.

The factor exp(+-psi/sigma) is periodic, so every integral is taken term by term over
its discrete Fourier series; only the tilt exp(+-Vz/sigma) is handled in closed form.
"""

import json
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy import linalg

from .errors import (
    InternalConsistencyError,
    InvalidInputError,
    NumericalFailureError,
    OverflowRiskError,
)
from .potential import PeriodicPotential

logger = logging.getLogger(__name__)

EXPONENT_LIMIT = 700.0


class ChannelParams(BaseModel):
    """Temperature sigma and applied voltage V."""

    model_config = ConfigDict(frozen=True)

    sigma: float = Field(gt=0, description="Temperature / diffusivity")
    v: float = Field(default=0.0, description="Applied voltage (speed of the traveling potential)")

    @field_validator("sigma", "v")
    @classmethod
    def check_finite(cls, value):
        if not math.isfinite(value):
            raise ValueError("channel parameters must be finite")
        return value

    @property
    def tilt(self) -> float:
        """V / sigma."""
        return self.v / self.sigma


class QuadratureSpec(BaseModel):
    """Uniform periodic grid of n_points nodes on [0, 1)."""

    model_config = ConfigDict(frozen=True)

    n_points: int = Field(default=1024, ge=64, description="Grid size, a power of two")

    @field_validator("n_points")
    @classmethod
    def check_power_of_two(cls, value):
        if value & (value - 1):
            raise ValueError(f"n_points must be a power of two, got {value}")
        return value

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.n_points) / self.n_points

    @property
    def gauss_nodes(self) -> int:
        """Gauss-Legendre nodes used for non-periodic partial-interval integrals."""
        return max(64, self.n_points // 8)


def exponent_ratio(p: PeriodicPotential, c: ChannelParams) -> float:
    return (abs(c.v) + 2.0 * p.coefficient_sum) / c.sigma


def check_overflow(p: PeriodicPotential, c: ChannelParams) -> None:
    ratio = exponent_ratio(p, c)
    if ratio > EXPONENT_LIMIT:
        raise OverflowRiskError(ratio, EXPONENT_LIMIT)


def _fourier(values: np.ndarray) -> np.ndarray:
    """Coefficients c_m with values_j = sum_m c_m exp(2 pi i m j/n), FFT ordering."""
    return np.fft.fft(values) / values.size


def _wavenumbers(n: int) -> np.ndarray:
    return np.fft.fftfreq(n, d=1.0 / n)


def _reversed(coeffs: np.ndarray) -> np.ndarray:
    """c_{-m} in FFT ordering."""
    return np.roll(coeffs[::-1], 1)


def _tilted_antiderivative(coeffs: np.ndarray, a: float, shift: float) -> np.ndarray:
    """exp(-shift) * int_0^z exp(a s) c(s) ds at z = j/n, j = 0..n.

    c(s) = sum_m coeffs_m exp(2 pi i m s); each mode integrates in closed form.
    """
    n = coeffs.size
    z = np.arange(n + 1) / n
    m = _wavenumbers(n)
    mu = a + 2j * np.pi * m
    w = np.zeros(n, dtype=complex)
    nonzero = m != 0
    w[nonzero] = coeffs[nonzero] / mu[nonzero]
    s = n * np.fft.ifft(w)
    s = np.append(s, s[0])
    oscillating = (np.exp(a * z - shift) * s - math.exp(-shift) * w.sum()).real
    if a == 0.0:
        drift = z * math.exp(-shift)
    elif shift > 0.0:
        drift = (np.exp(a * z - shift) - math.exp(-shift)) / a
    else:
        drift = np.expm1(a * z) / a
    return coeffs[0].real * drift + oscillating


@dataclass(frozen=True)
class WeightTables:
    """f_+-, F_+- sampled at z = j/n, j = 0..n.

    Stored values are divided by exp(log_scale_plus) / exp(log_scale_minus);
    both scales are zero on the unscaled path.
    """

    z: np.ndarray
    f_plus: np.ndarray
    f_minus: np.ndarray
    F_plus: np.ndarray
    F_minus: np.ndarray
    log_scale_plus: float
    log_scale_minus: float
    tilt: float
    alpha: np.ndarray  # Fourier coefficients of the stored periodic part of f_+
    beta: np.ndarray   # Fourier coefficients of the stored periodic part of f_-

    @property
    def scaled(self) -> bool:
        return self.log_scale_plus != 0.0 or self.log_scale_minus != 0.0

    def unscaled(self, name: str) -> np.ndarray:
        """One of f_plus, f_minus, F_plus, F_minus with the scale undone."""
        scale = self.log_scale_plus if name.endswith("plus") else self.log_scale_minus
        return getattr(self, name) * math.exp(scale)

    def h_integrals(self) -> Tuple[float, float]:
        """(H_+, H_-) = (int F_+ f_-, int F_- f_+) over [0, 1], in closed form.

        Needs V != 0 and unscaled tables.
        """
        a = self.tilt
        if a == 0.0:
            raise InvalidInputError("H integrals are evaluated for V != 0 only")
        if self.scaled:
            raise InvalidInputError("H integrals need unscaled tables")
        m = _wavenumbers(self.alpha.size)
        mu = a + 2j * np.pi * m
        nu = -a + 2j * np.pi * m
        p_sum = np.sum(self.alpha / mu)
        q_sum = np.sum(self.beta / nu)
        h_plus = np.sum(self.alpha * _reversed(self.beta) / mu) - np.expm1(-a) * p_sum * q_sum
        h_minus = np.sum(self.beta * _reversed(self.alpha) / nu) - np.expm1(a) * p_sum * q_sum
        return float(h_plus.real), float(h_minus.real)


def weight_tables(
    p: PeriodicPotential, c: ChannelParams, q: QuadratureSpec, scaled: bool = False
) -> WeightTables:
    """Sample f_+- and their antiderivatives F_+- on [0, 1].

    The unscaled path refuses inputs whose exponents could overflow; the scaled path
    stores exp(g - max g) and reports the shifts.
    """
    if not scaled:
        check_overflow(p, c)
    n = q.n_points
    z = np.arange(n + 1) / n
    a = c.tilt
    psi = p.eval(q.grid) / c.sigma
    if scaled:
        psi_max, psi_min = float(psi.max()), float(psi.min())
        shift_plus, shift_minus = max(a, 0.0), max(-a, 0.0)
    else:
        psi_max = psi_min = shift_plus = shift_minus = 0.0
    a_periodic = np.exp(psi - psi_max)
    b_periodic = np.exp(-(psi - psi_min))
    alpha = _fourier(a_periodic)
    beta = _fourier(b_periodic)
    psi_closed = np.append(psi, psi[0])
    tables = WeightTables(
        z=z,
        f_plus=np.exp(a * z + psi_closed - psi_max - shift_plus),
        f_minus=np.exp(-a * z - psi_closed + psi_min - shift_minus),
        F_plus=_tilted_antiderivative(alpha, a, shift_plus),
        F_minus=_tilted_antiderivative(beta, -a, shift_minus),
        log_scale_plus=psi_max + shift_plus,
        log_scale_minus=-psi_min + shift_minus,
        tilt=a,
        alpha=alpha,
        beta=beta,
    )
    logger.debug(
        "weight tables n=%d tilt=%.6g scales=(%.6g, %.6g)",
        n, a, tables.log_scale_plus, tables.log_scale_minus,
    )
    return tables


def _collapsed_kernel(p: PeriodicPotential, c: ChannelParams, q: QuadratureSpec):
    """Scaled pieces of the current and density at V != 0.

    Returns (b, s, t, log_gap) with rho = b * s / t and J = exp(-log_gap) / t, where
    b = exp(-(psi - min psi)/sigma), s = sum_m alpha_m exp(2 pi i m z)/(V/sigma + 2 pi i m)
    and t = sum_m alpha_m beta_{-m}/(V/sigma + 2 pi i m).
    """
    n = q.n_points
    psi = p.eval(q.grid) / c.sigma
    psi_max, psi_min = float(psi.max()), float(psi.min())
    alpha = _fourier(np.exp(psi - psi_max))
    b = np.exp(-(psi - psi_min))
    beta = _fourier(b)
    mu = c.tilt + 2j * np.pi * _wavenumbers(n)
    weights = alpha / mu
    s = (n * np.fft.ifft(weights)).real
    t = float(np.sum(weights * _reversed(beta)).real)
    return b, s, t, psi_max - psi_min


def steady_current(
    p: PeriodicPotential, c: ChannelParams, q: Optional[QuadratureSpec] = None, scaled: bool = False
) -> float:
    """The physical current I of sigma rho_z + (psi_z + V) rho = I.

    I = sigma * (1 - exp(-V/sigma)) / (exp(-V/sigma) H_- + H_+); V = 0 gives exactly 0.
    """
    q = q or QuadratureSpec()
    if c.v == 0.0:
        return 0.0
    if p.coefficient_sum == 0.0:
        # flat channel: rho = 1 and I = V exactly
        return c.v
    if scaled:
        _, _, t, log_gap = _collapsed_kernel(p, c, q)
        reduced = math.exp(-log_gap) / t
    else:
        tables = weight_tables(p, c, q)
        h_plus, h_minus = tables.h_integrals()
        a = c.tilt
        if a > 0:
            reduced = -math.expm1(-a) / (math.exp(-a) * h_minus + h_plus)
        else:
            reduced = math.expm1(a) / (h_minus + math.exp(a) * h_plus)
    current = c.sigma * reduced
    if not math.isfinite(current):
        raise NumericalFailureError(f"non-finite current for sigma={c.sigma}, V={c.v}")
    return current


@dataclass(frozen=True)
class SteadyState:
    """Periodic steady density on z_i = i/n with its current and mean velocity.

    current is the physical I; beta is the constant of rho = f_-(beta + J F_+)
    with J = I/sigma, i.e. beta = rho(0) exp(psi(0)/sigma).
    """

    params: ChannelParams
    grid: np.ndarray
    rho: np.ndarray
    current: float
    beta: float
    kappa: float

    @property
    def n(self) -> int:
        return self.grid.size

    @property
    def reduced_current(self) -> float:
        return self.current / self.params.sigma

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sigma": self.params.sigma,
            "v": self.params.v,
            "current": self.current,
            "kappa": self.kappa,
            "beta": self.beta,
            "n": self.n,
            "rho": self.rho.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def write_csv(self, path) -> None:
        np.savetxt(
            path, np.column_stack([self.grid, self.rho]), delimiter=",", header="z,rho", comments="", fmt="%.12g"
        )


def steady_density(
    p: PeriodicPotential, c: ChannelParams, q: Optional[QuadratureSpec] = None, scaled: bool = False
) -> SteadyState:
    """Assemble rho = f_-(beta + J F_+) from the periodicity and normalization conditions."""
    q = q or QuadratureSpec()
    n = q.n_points
    a = c.tilt
    if not scaled:
        check_overflow(p, c)
    if p.coefficient_sum == 0.0:
        rho = np.ones(n)
        current = c.v
        beta = 1.0
    elif a == 0.0:
        weight = np.exp(-p.eval(q.grid) / c.sigma)
        rho = weight / np.mean(weight)
        current = 0.0
        beta = float(rho[0] * math.exp(p.eval(0.0) / c.sigma))
    elif scaled:
        b, s, t, _ = _collapsed_kernel(p, c, q)
        rho = b * s / t
        current = steady_current(p, c, q, scaled=True)
        beta = float(rho[0] * math.exp(p.eval(0.0) / c.sigma))
    else:
        tables = weight_tables(p, c, q)
        current = steady_current(p, c, q)
        reduced = current / c.sigma
        f_minus, F_plus = tables.f_minus, tables.F_plus
        if a > 0:
            beta = reduced * math.exp(-a) * F_plus[-1] / -math.expm1(-a)
        else:
            beta = reduced * F_plus[-1] / math.expm1(a)
        rho = (f_minus * (beta + reduced * F_plus))[:n]
    if not np.all(np.isfinite(rho)) or np.any(rho <= 0.0):
        raise InternalConsistencyError(
            f"assembled density is not positive (min={np.min(rho):.3e}); quadrature failure"
        )
    return SteadyState(
        params=c, grid=q.grid, rho=rho, current=current, beta=float(beta), kappa=c.v - current
    )


def harmonic_integral(ss: SteadyState) -> float:
    """Trapezoid value of the integral of 1/rho over a period."""
    return float(np.mean(1.0 / ss.rho))


def mean_velocity(ss: SteadyState) -> Tuple[float, float]:
    """(kappa, kappa_harmonic) = (V - I, V (1 - 1/int rho^-1))."""
    v = ss.params.v
    return ss.kappa, v * (1.0 - 1.0 / harmonic_integral(ss))


def spectral_derivative(values: np.ndarray) -> np.ndarray:
    """d/dz of periodic samples on [0, 1), Nyquist mode dropped."""
    n = values.size
    m = _wavenumbers(n)
    m[n // 2] = 0.0
    return np.fft.ifft(2j * np.pi * m * np.fft.fft(values)).real


def flux_residual(ss: SteadyState, p: PeriodicPotential) -> np.ndarray:
    """Pointwise sigma rho_z + psi_z rho + V rho - I."""
    c = ss.params
    drift = p.eval_derivative(ss.grid) + c.v
    return c.sigma * spectral_derivative(ss.rho) + drift * ss.rho - ss.current


def ode_oracle_current(p: PeriodicPotential, c: ChannelParams, n: int) -> Tuple[float, np.ndarray]:
    """Independent Fourier-Galerkin solve of sigma rho' + (psi' + V) rho = I, mean rho = 1.

    Unknowns are the modes rho_m, 0 < |m| < n/2, and I; the zero mode is pinned to 1
    by normalization. Returns (I, rho at z_i = i/n).
    """
    if n < 128:
        raise InvalidInputError(f"oracle grid needs n >= 128, got {n}")
    M = n // 2 - 1
    size = 2 * M + 1
    drift = {m: 2j * np.pi * m * coeff for m, coeff in p.complex_coefficients().items()}
    drift[0] = complex(c.v)
    modes = np.arange(-M, M + 1)
    system = np.zeros((size, size), dtype=complex)
    system[np.arange(size), np.arange(size)] += c.sigma * 2j * np.pi * modes
    for k, w_k in drift.items():
        # row m couples to rho_{m-k}
        rows = np.arange(max(0, k), min(size, size + k))
        system[rows, rows - k] += w_k
    rhs = -system[:, M].copy()
    system[:, M] = 0.0
    system[M, M] = -1.0
    try:
        solution = linalg.solve(system, rhs)
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailureError(f"oracle system is singular: {exc}") from exc
    if not np.all(np.isfinite(solution)):
        raise NumericalFailureError("oracle system produced non-finite values")
    current = float(solution[M].real)
    rho_modes = solution.copy()
    rho_modes[M] = 1.0
    spectrum = np.zeros(n, dtype=complex)
    spectrum[modes % n] = rho_modes
    rho = (n * np.fft.ifft(spectrum)).real
    return current, rho


def response_surface(
    p: PeriodicPotential,
    sigmas: Sequence[float],
    vs: Sequence[float],
    q: Optional[QuadratureSpec] = None,
    scaled: bool = False,
) -> np.ndarray:
    """Current I(V, sigma) on a grid, rows sigma-major."""
    q = q or QuadratureSpec()
    surface = np.empty((len(sigmas), len(vs)))
    for i, sigma in enumerate(sigmas):
        for j, v in enumerate(vs):
            surface[i, j] = steady_current(p, ChannelParams(sigma=sigma, v=v), q, scaled=scaled)
    return surface
