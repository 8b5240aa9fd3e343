"""The inverse problem: what the current response I(V, sigma) reveals about psi.

Conventions: the correlation function is F(sigma, z) = int_0^1 exp((psi(x) - psi(x+z))/sigma) dx.
Identities involving the current use the reduced current J = I / sigma; the resistance
(dI/dV)^-1 at V = 0 uses the physical current I.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import roots_legendre

from .errors import (
    AntisymmetryError,
    IllConditionedFitError,
    InvalidInputError,
    OverflowRiskError,
)
from .potential import PeriodicPotential, is_antisymmetric
from .steady import EXPONENT_LIMIT, ChannelParams, QuadratureSpec, steady_current

logger = logging.getLogger(__name__)

MAX_SERIES_ORDER = 12
MAX_FIT_ORDER = 8
FIT_SIGMA_MIN = 4.0
FIT_CONDITION_LIMIT = 1e12
ODD_COEFF_TOL = 1e-5
ANTISYMMETRY_TOL = 1e-12
STEHFEST_TERMS = (8, 10, 12, 14)
STEHFEST_AGREEMENT = 1e-3


@dataclass(frozen=True)
class CorrelationProfile:
    sigma: float
    z_grid: np.ndarray
    values: np.ndarray

    def write_csv(self, path) -> None:
        np.savetxt(
            path, np.column_stack([self.z_grid, self.values]), delimiter=",", header="z,F", comments="", fmt="%.12g"
        )


@dataclass(frozen=True)
class ResistanceCurve:
    """R(sigma) = int_{-1}^0 F(sigma, z) dz on a set of temperatures."""

    sigmas: np.ndarray
    resistance: np.ndarray

    def __post_init__(self):
        if self.sigmas.shape != self.resistance.shape:
            raise InvalidInputError("sigmas and resistance must have the same length")

    def write_csv(self, path) -> None:
        np.savetxt(
            path, np.column_stack([self.sigmas, self.resistance]), delimiter=",", header="sigma,R", comments="", fmt="%.12g"
        )


@dataclass(frozen=True)
class SeriesFit:
    coeffs: np.ndarray  # c_1..c_K
    residual: float
    condition: float


@dataclass(frozen=True)
class MomentRecovery:
    coeffs: np.ndarray
    even_moments: np.ndarray  # M_2, M_4, ...
    fit_residual: float
    condition_estimate: float
    warnings: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "c": [float(c) for c in self.coeffs],
            "M_even": [float(m) for m in self.even_moments],
            "residual": float(self.fit_residual),
            "condition": float(self.condition_estimate),
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass(frozen=True)
class LaplaceRecovery:
    u_points: np.ndarray
    estimates: np.ndarray  # F(sigma, -u)
    reliable: np.ndarray


def _check_sigma(sigma: float) -> None:
    if not (sigma > 0 and math.isfinite(sigma)):
        raise InvalidInputError(f"sigma must be positive and finite, got {sigma}")


def _exp_mean(exponent: np.ndarray) -> np.ndarray:
    """mean(exp(exponent)) along the last axis, refusing results beyond double range."""
    top = np.max(exponent, axis=-1, keepdims=True)
    if np.any(top > EXPONENT_LIMIT):
        raise OverflowRiskError(float(np.max(top)), EXPONENT_LIMIT)
    return np.exp(top[..., 0]) * np.mean(np.exp(exponent - top), axis=-1)


def correlation_F(p: PeriodicPotential, sigma: float, z: float, q: Optional[QuadratureSpec] = None) -> float:
    """Periodic trapezoid value of F(sigma, z); exact to rounding for band-limited psi."""
    return float(correlation_profile(p, sigma, [z], q).values[0])


def correlation_profile(
    p: PeriodicPotential, sigma: float, z_grid: Sequence[float], q: Optional[QuadratureSpec] = None
) -> CorrelationProfile:
    _check_sigma(sigma)
    q = q or QuadratureSpec()
    x = q.grid
    z = np.asarray(z_grid, dtype=float)
    exponent = (p.eval(x)[None, :] - p.eval(x[None, :] + z[:, None])) / sigma
    return CorrelationProfile(sigma=sigma, z_grid=z, values=_exp_mean(exponent))


@lru_cache(maxsize=16)
def _gauss_legendre(n: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = roots_legendre(n)
    return nodes, weights


def _integrate_on(lower: np.ndarray, integrand, n: int) -> np.ndarray:
    """int_lower^1 integrand(x, row) dx for each row, Gauss-Legendre on [lower, 1]."""
    nodes, weights = _gauss_legendre(n)
    half = 0.5 * (1.0 - lower)[:, None]
    x = lower[:, None] + half * (nodes[None, :] + 1.0)
    return np.sum(half * weights[None, :] * integrand(x), axis=1)


def h_kernels(p: PeriodicPotential, sigma: float, z, q: Optional[QuadratureSpec] = None):
    """(h_+(z), h_-(z)).

    h_+(z) = int_z^1 exp((psi(x-z) - psi(x))/sigma) dx on [0, 1], 0 elsewhere;
    h_-(z) = int_{-z}^1 exp((psi(x) - psi(x+z))/sigma) dx on [-1, 0], 0 elsewhere.
    """
    _check_sigma(sigma)
    q = q or QuadratureSpec()
    if 2.0 * p.coefficient_sum / sigma > EXPONENT_LIMIT:
        raise OverflowRiskError(2.0 * p.coefficient_sum / sigma, EXPONENT_LIMIT)
    zs = np.atleast_1d(np.asarray(z, dtype=float))
    h_plus = np.zeros_like(zs)
    h_minus = np.zeros_like(zs)

    plus = (zs >= 0.0) & (zs <= 1.0)
    if np.any(plus):
        zp = zs[plus][:, None]
        h_plus[plus] = _integrate_on(
            zs[plus], lambda x: np.exp((p.eval(x - zp) - p.eval(x)) / sigma), q.gauss_nodes
        )
    minus = (zs >= -1.0) & (zs <= 0.0)
    if np.any(minus):
        zm = zs[minus][:, None]
        h_minus[minus] = _integrate_on(
            -zs[minus], lambda x: np.exp((p.eval(x) - p.eval(x + zm)) / sigma), q.gauss_nodes
        )
    if np.ndim(z) == 0:
        return float(h_plus[0]), float(h_minus[0])
    return h_plus, h_minus


def transform_identity_residual(
    p: PeriodicPotential, sigma: float, v: float, q: Optional[QuadratureSpec] = None
) -> float:
    """Relative residual of int_{-1}^0 exp(-Vz/sigma) (h_-(z) + h_+(z+1)) dz = (exp(V/sigma) - 1) / J."""
    _check_sigma(sigma)
    if v == 0.0:
        raise InvalidInputError("the transform identity needs V != 0; use resistance() at V = 0")
    q = q or QuadratureSpec()
    nodes, weights = _gauss_legendre(q.gauss_nodes)
    z = 0.5 * (nodes - 1.0)  # [-1, 0]
    h_minus = h_kernels(p, sigma, z, q)[1]
    h_plus = h_kernels(p, sigma, z + 1.0, q)[0]
    lhs = 0.5 * np.sum(weights * np.exp(-v * z / sigma) * (h_minus + h_plus))
    reduced = steady_current(p, ChannelParams(sigma=sigma, v=v), q) / sigma
    rhs = math.expm1(v / sigma) / reduced
    return float(abs(lhs - rhs) / abs(rhs))


def resistance(p: PeriodicPotential, sigma: float, q: Optional[QuadratureSpec] = None) -> Tuple[float, float]:
    """(r_integral, r_fd): the double integral of F and the central difference (dI/dV)^-1 at V = 0."""
    _check_sigma(sigma)
    q = q or QuadratureSpec()
    r_integral = _resistance_integral(p, sigma, q)
    h = 1e-4 * sigma
    up = steady_current(p, ChannelParams(sigma=sigma, v=h), q)
    down = steady_current(p, ChannelParams(sigma=sigma, v=-h), q)
    r_fd = 2.0 * h / (up - down)
    return r_integral, float(r_fd)


def geometric_sigmas(sigma_min: float, sigma_max: float, count: int) -> np.ndarray:
    if not (0 < sigma_min <= sigma_max) or count < 1:
        raise InvalidInputError("need 0 < sigma_min <= sigma_max and count >= 1")
    return np.geomspace(sigma_min, sigma_max, count)


def resistance_curve(
    p: PeriodicPotential, sigmas: Sequence[float], q: Optional[QuadratureSpec] = None
) -> ResistanceCurve:
    q = q or QuadratureSpec()
    sigmas = np.asarray(sigmas, dtype=float)
    values = np.array([_resistance_integral(p, s, q) for s in sigmas])
    return ResistanceCurve(sigmas=sigmas, resistance=values)


def _resistance_integral(p: PeriodicPotential, sigma: float, q: QuadratureSpec) -> float:
    _check_sigma(sigma)
    # int_{-1}^0 F dz factors into the two zero modes
    psi = p.eval(q.grid) / sigma
    return float(_exp_mean(psi) * _exp_mean(-psi))


def series_coefficients_from_moments(moments: Sequence[float], k: int) -> float:
    """c_k = (1/k!) sum_j (-1)^j C(k, j) M_j M_{k-j}, the 1/sigma^k coefficient of R."""
    if len(moments) == 0 or moments[0] != 1.0:
        raise InvalidInputError("moments[0] must be 1")
    order = len(moments) - 1
    if not 1 <= k <= min(order, MAX_SERIES_ORDER):
        raise InvalidInputError(f"k={k} outside 1..{min(order, MAX_SERIES_ORDER)}")
    total = sum((-1) ** j * math.comb(k, j) * moments[j] * moments[k - j] for j in range(k + 1))
    return total / math.factorial(k)


def fit_series_coefficients(curve: ResistanceCurve, K: int) -> SeriesFit:
    """Least squares of R(sigma) - 1 on sigma^-1 .. sigma^-K over the samples with sigma >= 4."""
    if not 1 <= K <= MAX_FIT_ORDER:
        raise InvalidInputError(f"K must lie in 1..{MAX_FIT_ORDER}, got {K}")
    usable = curve.sigmas >= FIT_SIGMA_MIN
    sigmas = curve.sigmas[usable]
    if sigmas.size < K + 3:
        raise InvalidInputError(
            f"need at least {K + 3} samples with sigma >= {FIT_SIGMA_MIN:g}, got {sigmas.size}"
        )
    # columns in u = sigma_min / sigma keep the design matrix well scaled
    scale = sigmas.min()
    u = scale / sigmas
    design = np.column_stack([u ** k for k in range(1, K + 1)])
    condition = float(np.linalg.cond(design))
    if condition > FIT_CONDITION_LIMIT:
        raise IllConditionedFitError(condition)
    target = curve.resistance[usable] - 1.0
    scaled, _, _, _ = np.linalg.lstsq(design, target, rcond=None)
    residual = float(np.linalg.norm(design @ scaled - target))
    coeffs = scaled * scale ** np.arange(1, K + 1)
    logger.debug("series fit K=%d condition=%.3e residual=%.3e", K, condition, residual)
    return SeriesFit(coeffs=coeffs, residual=residual, condition=condition)


def recover_even_moments(coeffs: Sequence[float], m_max: int) -> np.ndarray:
    """[M_2, M_4, ..., M_m_max] from c_1..c_K, assuming every odd moment vanishes."""
    if m_max < 2 or m_max % 2:
        raise InvalidInputError(f"m_max must be an even integer >= 2, got {m_max}")
    if m_max > len(coeffs):
        raise InvalidInputError(f"recovering M_{m_max} needs c_{m_max}; only {len(coeffs)} given")
    moments = {0: 1.0}
    for k in range(2, m_max + 1, 2):
        cross = sum(math.comb(k, j) * moments[j] * moments[k - j] for j in range(2, k - 1, 2))
        moments[k] = (math.factorial(k) * coeffs[k - 1] - cross) / 2.0
    return np.array([moments[k] for k in range(2, m_max + 1, 2)])


def recover_moments(
    p: PeriodicPotential,
    sigmas: Sequence[float],
    K: int,
    q: Optional[QuadratureSpec] = None,
    force: bool = False,
) -> Tuple[MomentRecovery, ResistanceCurve]:
    """Resistance curve, series fit and moment recursion in one pass."""
    warnings: List[str] = []
    antisymmetric = is_antisymmetric(p, ANTISYMMETRY_TOL)
    if not antisymmetric:
        if not force:
            raise AntisymmetryError("moment recovery needs an antisymmetric potential (use --force)")
        message = "potential is not antisymmetric; odd moments were assumed to vanish"
        logger.warning(message)
        warnings.append(message)
    curve = resistance_curve(p, sigmas, q)
    fit = fit_series_coefficients(curve, K)
    if antisymmetric:
        for k in range(1, K + 1, 2):
            if abs(fit.coeffs[k - 1]) > ODD_COEFF_TOL:
                message = f"fitted c_{k} = {fit.coeffs[k - 1]:.3e} exceeds {ODD_COEFF_TOL:g}"
                logger.warning(message)
                warnings.append(message)
    m_max = K - K % 2
    even = recover_even_moments(fit.coeffs, m_max) if m_max >= 2 else np.array([])
    recovery = MomentRecovery(
        coeffs=fit.coeffs,
        even_moments=even,
        fit_residual=fit.residual,
        condition_estimate=fit.condition,
        warnings=warnings,
    )
    return recovery, curve


@lru_cache(maxsize=8)
def stehfest_weights(n_terms: int) -> np.ndarray:
    """Salzer summation weights V_1..V_N of the Gaver-Stehfest formula, summed exactly."""
    half = n_terms // 2
    weights = np.zeros(n_terms)
    for k in range(1, n_terms + 1):
        total = Fraction(0)
        for j in range((k + 1) // 2, min(k, half) + 1):
            total += Fraction(
                j ** half * math.factorial(2 * j),
                math.factorial(half - j)
                * math.factorial(j)
                * math.factorial(j - 1)
                * math.factorial(k - j)
                * math.factorial(2 * j - k),
            )
        weights[k - 1] = (-1) ** (k + half) * float(total)
    return weights


def _stehfest(transform, u: float, n_terms: int) -> float:
    weights = stehfest_weights(n_terms)
    s = np.arange(1, n_terms + 1) * math.log(2.0) / u
    return math.log(2.0) / u * math.fsum(weights * np.array([transform(sk) for sk in s]))


def gaver_stehfest_recover_F(
    p: PeriodicPotential,
    sigma: float,
    u_points: Sequence[float],
    n_terms: int = 12,
    q: Optional[QuadratureSpec] = None,
    periodic_extension: bool = True,
) -> LaplaceRecovery:
    """Estimate F(sigma, -u) on (0, 1) from the current response alone (experimental).

    With the reduced current J, (exp(-s) - 1) / J(-sigma s, sigma) is the Laplace transform
    of u -> F(sigma, -u) restricted to [0, 1], and (1 - exp(-s)) / J(sigma s, sigma) that of
    w -> F(sigma, w). Dividing by 1 - exp(-s) gives the transforms of the 1-periodic
    extensions, -1 / J(-sigma s) and 1 / J(sigma s), which have no jump at the end of the
    period and are the default targets. Since F(sigma, -u) = F(sigma, 1 - u), points with
    u > 1/2 are inverted from the positive-tilt branch at w = 1 - u, where the Stehfest
    kernel is narrower. A point is flagged unreliable when the estimates for every term
    count in STEHFEST_TERMS spread by more than 1e-3 relative.
    """
    _check_sigma(sigma)
    if n_terms not in STEHFEST_TERMS:
        raise InvalidInputError(f"n_terms must be one of {STEHFEST_TERMS}, got {n_terms}")
    u = np.asarray(u_points, dtype=float)
    if np.any((u <= 0.0) | (u >= 1.0)):
        raise InvalidInputError("u_points must lie strictly inside (0, 1)")
    q = q or QuadratureSpec()

    @lru_cache(maxsize=None)
    def reduced(tilt: float) -> float:
        return steady_current(p, ChannelParams(sigma=sigma, v=sigma * tilt), q, scaled=True) / sigma

    if periodic_extension:
        def backward(s):
            return -1.0 / reduced(-s)

        def forward(s):
            return 1.0 / reduced(s)
    else:
        def backward(s):
            return math.expm1(-s) / reduced(-s)

        def forward(s):
            return -math.expm1(-s) / reduced(s)

    estimates = np.empty_like(u)
    reliable = np.empty(u.shape, dtype=bool)
    for i, point in enumerate(u):
        transform, at = (backward, point) if point <= 0.5 else (forward, 1.0 - point)
        by_terms = {n: _stehfest(transform, at, n) for n in STEHFEST_TERMS}
        best = by_terms[n_terms]
        spread = max(by_terms.values()) - min(by_terms.values())
        estimates[i] = best
        reliable[i] = bool(spread <= STEHFEST_AGREEMENT * max(1.0, abs(best)))
        if not reliable[i]:
            logger.warning(
                "Gaver-Stehfest estimate at u=%.3g unreliable (N=%d: %.6g, spread over N=%s: %.3g)",
                point, n_terms, best, STEHFEST_TERMS, spread,
            )
    return LaplaceRecovery(u_points=u, estimates=estimates, reliable=reliable)
