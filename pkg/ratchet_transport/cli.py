"""Ratchet Transport command-line front-end.

One JSON config in, CSV/JSON files out. Exit codes: 0 success, 2 input or module error,
3 relaxation did not converge, 4 the recovery precondition (antisymmetry) failed.
"""

import argparse
import asyncio
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, List, Literal, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .config import DEFAULTS, Settings
from .errors import AntisymmetryError, InvalidInputError, OverflowRiskError, TransportError
from .evolve import EvolveConfig, SnapshotWriter, bump_field, relax_to_steady, uniform_field
from .particles import empirical_mean_velocity, integrate_orbits
from .potential import PeriodicPotential, make_trig_potential
from .response import geometric_sigmas, recover_moments, transform_identity_residual
from .steady import ChannelParams, QuadratureSpec, SteadyState, mean_velocity, steady_density

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 2
EXIT_NOT_CONVERGED = 3
EXIT_PRECONDITION = 4


class PotentialArgs(BaseModel):
    """Inline potential: cos and sin coefficient lists of equal length."""
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    cos: List[float] = Field(default_factory=list, description="Coefficients of cos(2 pi k x), k = 1..K")
    sin: List[float] = Field(default_factory=list, description="Coefficients of sin(2 pi k x), k = 1..K")

    def build(self) -> PeriodicPotential:
        return make_trig_potential(self.cos, self.sin)


class GeometricRange(BaseModel):
    """count temperatures spaced geometrically from min to max."""
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    min: float = Field(gt=0)
    max: float = Field(gt=0)
    count: int = Field(ge=1)

    @model_validator(mode="after")
    def check_order(self):
        if self.max < self.min:
            raise ValueError("range max must not be below min")
        return self

    def values(self) -> List[float]:
        return geometric_sigmas(self.min, self.max, self.count).tolist()


class LinearRange(BaseModel):
    """count voltages spaced evenly from min to max."""
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    min: float
    max: float
    count: int = Field(ge=1)

    @model_validator(mode="after")
    def check_order(self):
        if self.max < self.min:
            raise ValueError("range max must not be below min")
        return self

    def values(self) -> List[float]:
        return np.linspace(self.min, self.max, self.count).tolist()


class RunConfig(BaseModel):
    """A whole run; anything not given falls back to config.DEFAULTS."""
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    potential: PotentialArgs = Field(default_factory=PotentialArgs)
    sigma: Union[float, GeometricRange, None] = Field(default=None, description="Temperature or geometric range")
    v: Union[float, LinearRange] = Field(default=0.0, description="Voltage or linear range")
    n_points: int = Field(default=DEFAULTS["n_points"], ge=64)
    dt: Optional[float] = Field(default=None, gt=0, description="Evolution or orbit time step")
    theta: float = Field(default=DEFAULTS["theta"], ge=0.5, le=1.0)
    tol: float = Field(default=DEFAULTS["tol"], gt=0)
    max_steps: int = Field(default=DEFAULTS["max_steps"], ge=1)
    sample_every: int = Field(default=DEFAULTS["sample_every"], ge=1)
    initial: Literal["uniform", "bump"] = "uniform"
    t_end: float = Field(default=DEFAULTS["t_end"], gt=0)
    x0: Union[float, List[float]] = 0.0
    seed: Optional[int] = Field(default=None, description="Draws one random start point when set")
    burn_in: float = Field(default=DEFAULTS["burn_in"], ge=0, lt=1)
    K: int = Field(default=DEFAULTS["K"], ge=1, le=8)

    def quadrature(self) -> QuadratureSpec:
        return QuadratureSpec(n_points=self.n_points)

    def sigma_values(self) -> List[float]:
        if self.sigma is None:
            raise InvalidInputError("config needs sigma")
        if isinstance(self.sigma, GeometricRange):
            return self.sigma.values()
        return [self.sigma]

    def v_values(self) -> List[float]:
        if isinstance(self.v, LinearRange):
            return self.v.values()
        return [self.v]

    def single_point(self) -> ChannelParams:
        if isinstance(self.sigma, GeometricRange) or isinstance(self.v, LinearRange):
            raise InvalidInputError("this command takes a single (sigma, v), not a range")
        return ChannelParams(sigma=self.sigma_values()[0], v=self.v)

    def start_points(self) -> List[float]:
        if self.seed is not None:
            return [float(np.random.default_rng(self.seed).uniform(0.0, 1.0))]
        return list(self.x0) if isinstance(self.x0, list) else [self.x0]


COMMANDS = [
    ("steady", "Steady density, current I and mean velocity kappa at one (sigma, V)"),
    ("sweep", "Current and kappa on a sigma x V grid (response.csv)"),
    ("evolve", "Relax initial data to the moving-frame steady state (snapshots.csv)"),
    ("orbit", "Deterministic orbit and its empirical mean velocity (orbit.csv)"),
    ("recover", "Resistance curve, 1/sigma series fit and even moments (recovery.json)"),
    ("identity-check", "Laplace-identity residuals on a sigma x V grid (residuals.csv)"),
]


class OutputSet:
    """Tracks files written by a command so a failed run leaves none behind."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.written: List[Path] = []

    def path(self, name: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        target = self.out_dir / name
        self.written.append(target)
        return target

    def write_text(self, name: str, text: str) -> Path:
        target = self.path(name)
        target.write_text(text)
        logger.info("wrote %s", target)
        return target

    def discard(self) -> None:
        for target in self.written:
            try:
                target.unlink()
            except FileNotFoundError:
                pass


def _fmt(value: float) -> str:
    return f"{value:.12g}"


def _steady(p: PeriodicPotential, c: ChannelParams, q: QuadratureSpec) -> SteadyState:
    try:
        return steady_density(p, c, q)
    except OverflowRiskError:
        logger.warning("sigma=%g V=%g too steep for the unscaled path; using the scaled path", c.sigma, c.v)
        return steady_density(p, c, q, scaled=True)


async def _run_grid(fn: Callable[..., Any], points: Sequence[tuple], threads: int) -> List[Any]:
    """fn(*point) for every point, at most `threads` at a time; results keep point order."""
    gate = asyncio.Semaphore(threads)

    async def one(point):
        async with gate:
            return await asyncio.to_thread(fn, *point)

    return await asyncio.gather(*(one(point) for point in points))


def _sweep_row(p: PeriodicPotential, q: QuadratureSpec, sigma: float, v: float) -> tuple:
    ss = _steady(p, ChannelParams(sigma=sigma, v=v), q)
    return sigma, v, ss.current, ss.kappa


def _identity_row(p: PeriodicPotential, q: QuadratureSpec, sigma: float, v: float) -> tuple:
    return sigma, v, transform_identity_residual(p, sigma, v, q)


def cmd_steady(cfg: RunConfig, out: OutputSet, **_) -> int:
    p, q = cfg.potential.build(), cfg.quadrature()
    ss = _steady(p, cfg.single_point(), q)
    out.write_text("steady.json", ss.to_json())
    ss.write_csv(out.path("rho.csv"))
    print(f"I={ss.current:#.12g} kappa={ss.kappa:#.12g}")
    return EXIT_OK


async def sweep_rows(cfg: RunConfig, threads: int) -> List[tuple]:
    """Rows (sigma, v, I, kappa), sigma-major."""
    p, q = cfg.potential.build(), cfg.quadrature()
    points = [(p, q, s, v) for s in cfg.sigma_values() for v in cfg.v_values()]
    return await _run_grid(_sweep_row, points, threads)


def cmd_sweep(cfg: RunConfig, out: OutputSet, threads: int = 1, **_) -> int:
    if not isinstance(cfg.sigma, GeometricRange) and not isinstance(cfg.v, LinearRange):
        raise InvalidInputError("sweep needs a range for sigma or v")
    rows = asyncio.run(sweep_rows(cfg, threads))
    lines = ["sigma,v,I,kappa"] + [",".join(_fmt(x) for x in row) for row in rows]
    out.write_text("response.csv", "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_evolve(cfg: RunConfig, out: OutputSet, **_) -> int:
    p, c = cfg.potential.build(), cfg.single_point()
    evolve_cfg = EvolveConfig(dt=cfg.dt or DEFAULTS["dt"], frame="moving", theta=cfg.theta)
    field = uniform_field(cfg.n_points) if cfg.initial == "uniform" else bump_field(cfg.n_points)
    with SnapshotWriter(out.path("snapshots.csv"), every=cfg.sample_every) as snapshots:
        snapshots.write(field)
        report = relax_to_steady(field, p, c, evolve_cfg, cfg.tol, cfg.max_steps, callback=snapshots)
    summary = {
        "converged": bool(report.converged),
        "l1_gap": float(report.l1_gap),
        "steps": int(report.steps),
        "last_change": float(report.last_change),
        "time": float(report.field.time),
        "renormalized": bool(field.renormalized),
    }
    out.write_text("report.json", json.dumps(summary, indent=2))
    print(f"converged={report.converged} steps={report.steps} l1_gap={report.l1_gap:#.12g}")
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def cmd_orbit(cfg: RunConfig, out: OutputSet, **_) -> int:
    p, q, c = cfg.potential.build(), cfg.quadrature(), cfg.single_point()
    ss = _steady(p, c, q)
    starts = cfg.start_points()
    paths = integrate_orbits(ss, p, c, starts, cfg.t_end, cfg.dt or DEFAULTS["orbit_dt"])
    slopes = [empirical_mean_velocity(path, cfg.burn_in) for path in paths]
    for j, path in enumerate(paths):
        path.write_csv(out.path("orbit.csv" if j == 0 else f"orbit_{j}.csv"))
    kappa, kappa_harmonic = mean_velocity(ss)
    summary = {"x0": starts, "kappa_hat": slopes, "kappa": kappa, "kappa_harmonic": kappa_harmonic}
    out.write_text("orbit.json", json.dumps(summary, indent=2))
    print(f"kappa_hat={slopes[0]:#.12g} kappa={kappa:#.12g}")
    return EXIT_OK


def cmd_recover(cfg: RunConfig, out: OutputSet, force: bool = False, **_) -> int:
    p, q = cfg.potential.build(), cfg.quadrature()
    if isinstance(cfg.sigma, GeometricRange):
        sigmas = cfg.sigma.values()
    else:
        sigmas = geometric_sigmas(
            DEFAULTS["recover_sigma_min"], DEFAULTS["recover_sigma_max"], DEFAULTS["recover_sigma_count"]
        ).tolist()
    recovery, curve = recover_moments(p, sigmas, cfg.K, q, force=force)
    curve.write_csv(out.path("resistance.csv"))
    out.write_text("recovery.json", recovery.to_json())
    print(" ".join(f"M_{2 * (i + 1)}={m:#.12g}" for i, m in enumerate(recovery.even_moments)))
    return EXIT_OK


def cmd_identity_check(cfg: RunConfig, out: OutputSet, threads: int = 1, **_) -> int:
    p, q = cfg.potential.build(), cfg.quadrature()
    points = [(p, q, s, v) for s in cfg.sigma_values() for v in cfg.v_values() if v != 0.0]
    if not points:
        raise InvalidInputError("identity grid is empty (V = 0 points are skipped)")
    rows = asyncio.run(_run_grid(_identity_row, points, threads))
    lines = ["sigma,v,residual"] + [",".join(_fmt(x) for x in row) for row in rows]
    out.write_text("residuals.csv", "\n".join(lines) + "\n")
    print(f"max_residual={max(row[2] for row in rows):#.12g}")
    return EXIT_OK


def run_command(name: str, cfg: RunConfig, out: OutputSet, force: bool = False, threads: int = 1) -> int:
    """Dispatch one subcommand."""
    if name == "steady":
        return cmd_steady(cfg, out)
    elif name == "sweep":
        return cmd_sweep(cfg, out, threads=threads)
    elif name == "evolve":
        return cmd_evolve(cfg, out)
    elif name == "orbit":
        return cmd_orbit(cfg, out)
    elif name == "recover":
        return cmd_recover(cfg, out, force=force)
    elif name == "identity-check":
        return cmd_identity_check(cfg, out, threads=threads)
    else:
        raise InvalidInputError(f"Unknown command: {name}")


def load_config(path: Union[str, Path]) -> RunConfig:
    return RunConfig.model_validate_json(Path(path).read_text())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ratchet-transport", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in COMMANDS:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="JSON run configuration")
        cmd.add_argument("--out", default=".", help="Output directory (default: current directory)")
        cmd.add_argument("--force", action="store_true", help="Recover moments even if psi is not antisymmetric")
        cmd.add_argument("--threads", type=int, default=None, help="Worker threads (default: $RT_THREADS or 1)")
        cmd.add_argument("--log-level", default=None, help="Logging level (default: $RT_LOG_LEVEL or WARNING)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    out = OutputSet(Path(args.out))
    try:
        settings = Settings(threads=args.threads, log_level=args.log_level)
        settings.configure_logging()
        cfg = load_config(args.config)
        logger.info("running %s with %s", args.command, args.config)
        code = run_command(args.command, cfg, out, force=args.force, threads=settings.threads)
        logger.info("%s finished with exit code %d", args.command, code)
        return code
    except AntisymmetryError as exc:
        out.discard()
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except ValidationError as exc:
        out.discard()
        first = exc.errors()[0]
        where = ".".join(str(part) for part in first.get("loc", ()))
        print(f"error: invalid config at {where or '<root>'}: {first.get('msg')}", file=sys.stderr)
        return EXIT_ERROR
    except (TransportError, OSError, ValueError) as exc:
        out.discard()
        print(f"error: {' '.join(str(exc).split())}", file=sys.stderr)
        return EXIT_ERROR


def cli_main():
    """Entry point for the CLI script."""
    sys.exit(main())


if __name__ == "__main__":
    cli_main()
