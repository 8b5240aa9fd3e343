"""Current-velocity field, deterministic orbits and the empirical mean velocity."""

import logging
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DegenerateDensityError, InvalidInputError, StepRejectedError
from .evolve import DensityField
from .potential import PeriodicPotential
from .steady import ChannelParams, SteadyState

logger = logging.getLogger(__name__)

DensitySource = Union[SteadyState, DensityField]

MAX_STEP_FRACTION = 0.25
DENSITY_FLOOR = 1e-300
MIN_PATH_POINTS = 16


@dataclass(frozen=True)
class OrbitPath:
    """Orbit samples; positions are unwrapped (not reduced mod 1)."""

    times: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        if self.times.shape != self.positions.shape or self.times.ndim != 1:
            raise InvalidInputError("times and positions must be matching 1-D arrays")
        if np.any(np.diff(self.times) <= 0):
            raise InvalidInputError("orbit times must be strictly increasing")
        if not np.all(np.isfinite(self.positions)):
            raise InvalidInputError("orbit positions must be finite")

    def __len__(self) -> int:
        return self.times.size

    def write_csv(self, path) -> None:
        np.savetxt(
            path, np.column_stack([self.times, self.positions]), delimiter=",", header="t,x", comments="", fmt="%.12g"
        )


def periodic_spline(values: np.ndarray) -> CubicSpline:
    """Periodic C2 cubic through samples at i/n, i = 0..n-1."""
    n = values.size
    nodes = np.arange(n + 1) / n
    return CubicSpline(nodes, np.append(values, values[0]), bc_type="periodic")


class VelocityField:
    """v(x, t) = -Psi_x(x, t) - sigma rho_x / rho from an interpolated density.

    A SteadyState lives in the moving frame, so it is read at z = x - V t.
    A DensityField is a lab-frame snapshot and is read at x.
    """

    def __init__(self, source: DensitySource, p: PeriodicPotential, c: ChannelParams):
        self.source = source
        self.p = p
        self.c = c
        self.moving = isinstance(source, SteadyState)
        values = source.rho if self.moving else source.values
        self._spline = periodic_spline(values)
        self._slope = self._spline.derivative()

    def density(self, x):
        return self._spline(np.mod(x, 1.0))

    def __call__(self, x, t: float = 0.0):
        x = np.asarray(x, dtype=float)
        shifted = x - self.c.v * t
        at = np.mod(shifted if self.moving else x, 1.0)
        rho = self._spline(at)
        if np.any(rho < DENSITY_FLOOR):
            raise DegenerateDensityError(f"interpolated density {np.min(rho):.3e} at x={x}")
        v = -self.p.eval_derivative(shifted) - self.c.sigma * self._slope(at) / rho
        return float(v) if v.ndim == 0 else v


def velocity_field(
    rho_source: DensitySource, p: PeriodicPotential, c: ChannelParams, x, t: float = 0.0
):
    return VelocityField(rho_source, p, c)(x, t)


def _rk4(rhs, y0: np.ndarray, t_end: float, dt: float):
    """Classical fourth-order steps; rejects any step that would move more than a quarter period."""
    if dt <= 0 or t_end < dt:
        raise InvalidInputError(f"need dt > 0 and t_end >= dt, got dt={dt}, t_end={t_end}")
    steps = int(round(t_end / dt))
    times = np.arange(steps + 1) * dt
    out = np.empty((steps + 1,) + y0.shape)
    out[0] = y = y0
    for i in range(steps):
        t = times[i]
        k1 = rhs(y, t)
        reach = float(np.max(np.abs(k1))) * dt
        if reach > MAX_STEP_FRACTION:
            raise StepRejectedError(i, reach)
        k2 = rhs(y + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = rhs(y + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = rhs(y + dt * k3, t + dt)
        y = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[i + 1] = y
    return times, out


def integrate_orbits(
    rho_source: DensitySource,
    p: PeriodicPotential,
    c: ChannelParams,
    x0s: Sequence[float],
    t_end: float,
    dt: float,
) -> list[OrbitPath]:
    """dx/dt = v(x, t) for several starting points at once."""
    field = VelocityField(rho_source, p, c)
    start = np.asarray(x0s, dtype=float)
    times, positions = _rk4(lambda x, t: np.atleast_1d(field(x, t)), start, t_end, dt)
    logger.debug("integrated %d orbits over %d steps", start.size, times.size - 1)
    return [OrbitPath(times=times, positions=positions[:, j].copy()) for j in range(start.size)]


def integrate_orbit(
    rho_source: DensitySource,
    p: PeriodicPotential,
    c: ChannelParams,
    x0: float,
    t_end: float,
    dt: float,
) -> OrbitPath:
    return integrate_orbits(rho_source, p, c, [x0], t_end, dt)[0]


def moving_frame_orbit(ss: SteadyState, z0: float, t_end: float, dt: float) -> OrbitPath:
    """dz/dt = -I / rho(z); x(t) = z(t) + V t is the lab-frame orbit."""
    spline = periodic_spline(ss.rho)
    current = ss.current

    def rhs(z, t):
        rho = spline(np.mod(z, 1.0))
        if np.any(rho < DENSITY_FLOOR):
            raise DegenerateDensityError(f"interpolated density {np.min(rho):.3e} at z={z}")
        return -current / rho

    times, positions = _rk4(rhs, np.array([float(z0)]), t_end, dt)
    return OrbitPath(times=times, positions=positions[:, 0].copy())


def empirical_mean_velocity(path: OrbitPath, burn_in_fraction: float = 0.1) -> float:
    """Least-squares slope of position against time after discarding the burn-in."""
    if not 0.0 <= burn_in_fraction < 1.0:
        raise InvalidInputError(f"burn_in_fraction must lie in [0, 1), got {burn_in_fraction}")
    if len(path) < MIN_PATH_POINTS:
        raise InvalidInputError(f"path has {len(path)} points; need at least {MIN_PATH_POINTS}")
    start = int(burn_in_fraction * len(path))
    times, positions = path.times[start:], path.positions[start:]
    if times.size < 2:
        raise InvalidInputError("burn-in leaves fewer than two points")
    slope, _ = np.polyfit(times - times[0], positions, 1)
    return float(slope)


def period_average_velocity(ss: SteadyState, p: PeriodicPotential, refine: int = 4) -> float:
    """Time average of v along one period of the steady orbit.

    In the moving frame a particle spends dt = rho dz / I per dz, so the average is
    int v rho dz / int rho dz, with v taken from the interpolated density.
    """
    if ss.current == 0.0:
        return 0.0
    field = VelocityField(ss, p, ss.params)
    z = np.arange(refine * ss.n) / (refine * ss.n)
    rho = field.density(z)
    return float(np.mean(field(z, 0.0) * rho) / np.mean(rho))
