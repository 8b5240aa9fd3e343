"""Time-dependent Fokker-Planck solver in conservation form.

Finite volumes on n periodic cells centred at x_i = i/n. The face flux between cells
i and i+1 is the Scharfetter-Gummel flux with the exact potential drop across the face,
so the Boltzmann density of a frozen potential is an exact discrete equilibrium.
Time stepping is the implicit theta scheme; each step is one cyclic tridiagonal solve.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .errors import InvalidInputError, NumericalFailureError
from .linalg import solve_cyclic_tridiagonal
from .potential import PeriodicPotential
from .steady import ChannelParams, QuadratureSpec, steady_density

logger = logging.getLogger(__name__)

MASS_TOLERANCE = 1e-12


@dataclass(frozen=True)
class DensityField:
    """Cell averages of rho on n periodic cells at a given time."""

    values: np.ndarray
    time: float = 0.0
    renormalized: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 3:
            raise InvalidInputError("density needs a one-dimensional array of at least 3 cells")
        if not np.all(np.isfinite(values)) or np.any(values < 0.0):
            raise InvalidInputError("density values must be finite and non-negative")
        if abs(values.mean() - 1.0) > MASS_TOLERANCE:
            raise InvalidInputError(
                f"density mass is {values.mean():.15g}; use DensityField.from_values to renormalize"
            )
        object.__setattr__(self, "values", values)

    @classmethod
    def from_values(cls, values, time: float = 0.0) -> "DensityField":
        """Accept any non-negative data, rescaling to unit mass when needed."""
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or not np.all(np.isfinite(values)) or np.any(values < 0.0):
            raise InvalidInputError("initial data must be a finite, non-negative 1-D array")
        mass = values.mean()
        if mass <= 0.0:
            raise InvalidInputError("initial data has zero mass")
        renormalized = bool(abs(mass - 1.0) > MASS_TOLERANCE)
        if renormalized:
            logger.warning("initial data had mass %.6g; renormalized to 1", mass)
            values = values / mass
        return cls(values=values, time=time, renormalized=renormalized)

    @classmethod
    def _signed(cls, values: np.ndarray, time: float) -> "DensityField":
        """Theta-scheme output; below theta = 1 a step may undershoot zero on sharp data."""
        if not np.all(np.isfinite(values)):
            raise NumericalFailureError(f"non-finite density at t = {time:.6g}")
        if abs(values.mean() - 1.0) > MASS_TOLERANCE:
            raise NumericalFailureError(f"step lost mass: {values.mean():.15g}")
        field = object.__new__(cls)
        object.__setattr__(field, "values", values)
        object.__setattr__(field, "time", float(time))
        object.__setattr__(field, "renormalized", False)
        return field

    @property
    def grid_n(self) -> int:
        return self.values.size

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.grid_n) / self.grid_n

    @property
    def mass(self) -> float:
        return float(self.values.mean())


class EvolveConfig(BaseModel):
    """Time step, frame and theta of the implicit scheme."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    dt: float = Field(default=1e-3, gt=0, le=0.5, description="Time step")
    frame: Literal["lab", "moving"] = Field(default="moving", description="Reference frame")
    theta: float = Field(default=1.0, ge=0.5, le=1.0, description="0.5 trapezoidal, 1 backward Euler")


@dataclass(frozen=True)
class RelaxationReport:
    field: DensityField
    l1_gap: float
    steps: int
    converged: bool
    last_change: float


def uniform_field(n: int) -> DensityField:
    return DensityField(values=np.ones(n))


def bump_field(n: int, center: float = 0.5, width: float = 0.05) -> DensityField:
    """A narrow periodic Gaussian bump of unit mass."""
    x = np.arange(n) / n
    offset = (x - center + 0.5) % 1.0 - 0.5
    return DensityField.from_values(np.exp(-0.5 * (offset / width) ** 2))


def l1_distance(a: DensityField, b: DensityField) -> float:
    if a.grid_n != b.grid_n:
        raise InvalidInputError("fields live on different grids")
    return float(np.mean(np.abs(a.values - b.values)))


def bernoulli(x: np.ndarray) -> np.ndarray:
    """B(x) = x / (exp(x) - 1), B(0) = 1."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        y = x / np.expm1(x)
    small = np.abs(x) < 1e-12
    y[small] = 1.0 - 0.5 * x[small]
    return y


def _operator_bands(drops: np.ndarray, sigma: float):
    """Bands (lower, diag, upper) of d rho_i/dt = (L rho)_i.

    drops[i] is the potential difference across the face between cells i and i+1,
    divided by sigma. Every column of L sums to zero.
    """
    n = drops.size
    k = sigma * n * n
    b_plus = bernoulli(drops)
    b_minus = bernoulli(-drops)
    upper = k * b_minus
    lower = k * np.roll(b_plus, 1)
    diag = -k * (b_plus + np.roll(b_minus, 1))
    return lower, diag, upper


def _apply(lower, diag, upper, values):
    return diag * values + upper * np.roll(values, -1) + lower * np.roll(values, 1)


def _theta_step(field: DensityField, drops: np.ndarray, sigma: float, cfg: EvolveConfig) -> DensityField:
    lower, diag, upper = _operator_bands(drops, sigma)
    rho = field.values
    implicit = cfg.theta * cfg.dt
    rhs = rho.copy()
    if cfg.theta < 1.0:
        rhs += (1.0 - cfg.theta) * cfg.dt * _apply(lower, diag, upper, rho)
    new = solve_cyclic_tridiagonal(-implicit * lower, 1.0 - implicit * diag, -implicit * upper, rhs)
    # the scheme conserves mass; this removes solver rounding drift
    new *= rho.sum() / new.sum()
    if cfg.theta < 1.0:
        return DensityField._signed(new, field.time + cfg.dt)
    return DensityField(values=new, time=field.time + cfg.dt)


def moving_frame_drops(p: PeriodicPotential, c: ChannelParams, n: int) -> np.ndarray:
    """(psi(x_i + h) - psi(x_i) + V h) / sigma."""
    x = np.arange(n) / n
    h = 1.0 / n
    return (p.eval(x + h) - p.eval(x) + c.v * h) / c.sigma


def lab_frame_drops(p: PeriodicPotential, c: ChannelParams, n: int, t: float) -> np.ndarray:
    """(Psi(x_i + h, t) - Psi(x_i, t)) / sigma with Psi(x, t) = psi(x - V t)."""
    x = np.arange(n) / n
    h = 1.0 / n
    shift = c.v * t
    if shift == 0.0:
        return (p.eval(x + h) - p.eval(x)) / c.sigma
    return (p.eval(x + h - shift) - p.eval(x - shift)) / c.sigma


def step_moving_frame(
    field: DensityField, p: PeriodicPotential, c: ChannelParams, cfg: EvolveConfig
) -> DensityField:
    """One theta step of rho_t = (sigma rho_z + (psi_z + V) rho)_z."""
    if cfg.frame != "moving":
        raise InvalidInputError("step_moving_frame needs frame='moving'")
    return _theta_step(field, moving_frame_drops(p, c, field.grid_n), c.sigma, cfg)


def step_lab_frame(
    field: DensityField, p: PeriodicPotential, c: ChannelParams, cfg: EvolveConfig
) -> DensityField:
    """One theta step of rho_t = (sigma rho_x + Psi_x rho)_x, Psi frozen at t + theta dt."""
    if cfg.frame != "lab":
        raise InvalidInputError("step_lab_frame needs frame='lab'")
    t_mid = field.time + cfg.theta * cfg.dt
    return _theta_step(field, lab_frame_drops(p, c, field.grid_n, t_mid), c.sigma, cfg)


def evolve_until(
    field: DensityField,
    p: PeriodicPotential,
    c: ChannelParams,
    cfg: EvolveConfig,
    t_end: float,
) -> DensityField:
    """Step in the configured frame until t_end (the last step lands on t_end)."""
    step = step_lab_frame if cfg.frame == "lab" else step_moving_frame
    steps = max(1, int(round((t_end - field.time) / cfg.dt)))
    for _ in range(steps):
        field = step(field, p, c, cfg)
    return field


def relax_to_steady(
    field: DensityField,
    p: PeriodicPotential,
    c: ChannelParams,
    cfg: EvolveConfig,
    tol: float,
    max_steps: int,
    callback: Optional[Callable[[int, DensityField], None]] = None,
) -> RelaxationReport:
    """Iterate moving-frame steps until the L1 change per step drops below tol * dt.

    Non-convergence is reported through ``converged`` rather than raised.
    """
    if cfg.frame != "moving":
        raise InvalidInputError("relaxation runs in the moving frame")
    if tol <= 0:
        raise InvalidInputError("tol must be positive")
    if max_steps < 1:
        raise InvalidInputError("max_steps must be at least 1")
    n = field.grid_n
    if n < 64 or n & (n - 1):
        raise InvalidInputError(f"relaxation needs a power-of-two grid of at least 64 cells, got {n}")
    target = steady_density(p, c, QuadratureSpec(n_points=n), scaled=True)
    drops = moving_frame_drops(p, c, n)

    steps = 0
    change = math.inf
    converged = False
    while steps < max_steps:
        new = _theta_step(field, drops, c.sigma, cfg)
        change = l1_distance(new, field)
        field = new
        steps += 1
        if callback is not None:
            callback(steps, field)
        if steps % 1000 == 0:
            logger.debug("relaxation step %d: L1 change %.3e", steps, change)
        if change < tol * cfg.dt:
            converged = True
            break

    gap = float(np.mean(np.abs(field.values - target.rho)))
    if converged:
        logger.info("relaxed in %d steps, L1 gap %.3e", steps, gap)
    else:
        logger.info("no convergence after %d steps (last change %.3e)", steps, change)
    return RelaxationReport(field=field, l1_gap=gap, steps=steps, converged=converged, last_change=change)


class SnapshotWriter:
    """Appends t,x,rho rows every ``every`` steps; use as a relax_to_steady callback."""

    def __init__(self, path, every: int = 100):
        if every < 1:
            raise InvalidInputError("snapshot interval must be at least 1")
        self.path = path
        self.every = every
        self._handle = None

    def __enter__(self) -> "SnapshotWriter":
        self._handle = open(self.path, "w")
        self._handle.write("t,x,rho\n")
        return self

    def __exit__(self, *exc) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None

    def write(self, field: DensityField) -> None:
        rows = np.column_stack([np.full(field.grid_n, field.time), field.grid, field.values])
        np.savetxt(self._handle, rows, delimiter=",", fmt="%.12g")

    def __call__(self, step: int, field: DensityField) -> None:
        if step % self.every == 0:
            self.write(field)
