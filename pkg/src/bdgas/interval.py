"""Standard Brownian motion on (0,1) absorbed at the endpoints: heat
kernels, absorption probabilities, exact time-t marginal sampling, the
boundary driven gas built on them, and deterministic dual-side
densities.

Generator convention: standard Brownian motion (variance t at time t),
so every spectral exponent is k^2 pi^2 t / 2.  This matches the
diffusive limit X_{tN^2}/N of the rate-1/2-per-edge chain walk.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .core import (ContinuumConfiguration, KernelValue, ReservoirParams,
                   ValidationError)
from . import quadrature

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class HeatKernelConfig:
    """Series truncation tolerance and the spectral/image crossover time."""

    tol: float = 1e-12
    t_switch: float = 0.1

    def __post_init__(self):
        if not self.tol > 0 or not self.t_switch > 0:
            raise ValidationError("tol and t_switch must be positive")


DEFAULT_CONFIG = HeatKernelConfig()


@dataclass(frozen=True)
class AbsorptionSplit:
    """Probabilities of having been absorbed at 0, at 1, or of still
    being inside (0,1) at time t."""

    q0: float
    q1: float
    survive: float


class MarginalOutcome(NamedTuple):
    """Time-t state of one absorbed path: 'left', 'right' or 'interior'
    with the interior position."""

    kind: str
    position: Optional[float]


def _check_interior(x: float) -> None:
    if not 0.0 < x < 1.0:
        raise ValidationError(f"point {x} must lie strictly inside (0,1)")


def _spectral_terms(t: float, tol: float) -> tuple[np.ndarray, np.ndarray, float]:
    """Modes k, weights 2 exp(-k^2 pi^2 t/2), and the series tail bound."""
    a = 0.5 * math.pi * math.pi * t
    k_max = max(1, math.ceil(math.sqrt(max(math.log(2.0 / tol), 1.0) / a)))
    k = np.arange(1, k_max + 1, dtype=float)
    w = 2.0 * np.exp(-a * k * k)
    tail = 2.0 * math.exp(-a * (k_max + 1) ** 2) / max(1.0 - math.exp(-a * (2 * k_max + 3)), 0.5)
    return k, w, tail


def _gauss(u: np.ndarray, t: float) -> np.ndarray:
    return np.exp(-u * u / (2.0 * t)) / (_SQRT_2PI * math.sqrt(t))


def _image_range(t: float, tol: float) -> int:
    # images beyond |2k| - 2 > u_max contribute below tol
    u_max = math.sqrt(max(2.0 * t * math.log(1.0 / (tol * _SQRT_2PI * math.sqrt(t))), 0.0))
    return max(2, math.ceil(0.5 * (u_max + 2.0)) + 1)


def density_array(x: float, ys: np.ndarray, t: float,
                  cfg: HeatKernelConfig = DEFAULT_CONFIG) -> tuple[np.ndarray, float]:
    """Absorbed-kernel density p_t(x, y) on an array of interior points,
    with one truncation bound valid for every entry."""
    if t <= 0:
        raise ValidationError("density needs t > 0")
    _check_interior(x)
    ys = np.asarray(ys, dtype=float)
    if t >= cfg.t_switch:
        k, w, tail = _spectral_terms(t, cfg.tol)
        vals = np.sin(np.pi * np.outer(ys, k)) @ (w * np.sin(np.pi * k * x))
        return np.maximum(vals, 0.0), tail
    k_max = _image_range(t, cfg.tol)
    vals = np.zeros_like(ys)
    for k in range(-k_max, k_max + 1):
        vals += _gauss(ys - x + 2.0 * k, t) - _gauss(ys + x + 2.0 * k, t)
    tail = 8.0 * float(_gauss(np.array([2.0 * k_max - 2.0]), t)[0])
    return np.maximum(vals, 0.0), tail


def abs_density(x: float, y: float, t: float,
                cfg: HeatKernelConfig = DEFAULT_CONFIG) -> KernelValue:
    """Transition density of the absorbed Brownian motion.

    Spectral sine series for t >= t_switch, method-of-images alternating
    Gaussian sum below it; the returned bound certifies the truncation.
    """
    _check_interior(y)
    vals, tail = density_array(x, np.array([y]), t, cfg)
    return KernelValue(float(vals[0]), tail)


def _q0_scalar(x: float, t: float, tol: float) -> float:
    if t == 0.0:
        return 0.0
    if t < 1e-6:
        # two-sided interaction is below double precision here; use the
        # one-barrier reflection probability, zero away from the wall
        if x > 8.0 * math.sqrt(t):
            return 0.0
        return math.erfc(x / math.sqrt(2.0 * t))
    a = 0.5 * math.pi * math.pi * t
    k_max = max(1, math.ceil(math.sqrt(max(math.log(2.0 / (math.pi * tol)), 1.0) / a)))
    k = np.arange(1, k_max + 1, dtype=float)
    series = np.sum((2.0 / (np.pi * k)) * np.exp(-a * k * k) * np.sin(np.pi * k * x))
    return min(max((1.0 - x) - float(series), 0.0), 1.0)


def q0_array(xs: np.ndarray, t: float, tol: float = 1e-12) -> np.ndarray:
    """Vectorized probability of absorption at 0 by time t."""
    xs = np.asarray(xs, dtype=float)
    if t == 0.0:
        return np.zeros_like(xs)
    if t < 1e-6:
        out = np.zeros_like(xs)
        near = np.flatnonzero(xs <= 8.0 * math.sqrt(t))
        for i in near:
            out[i] = math.erfc(xs[i] / math.sqrt(2.0 * t))
        return out
    a = 0.5 * math.pi * math.pi * t
    k_max = max(1, math.ceil(math.sqrt(max(math.log(2.0 / (math.pi * tol)), 1.0) / a)))
    k = np.arange(1, k_max + 1, dtype=float)
    w = (2.0 / (np.pi * k)) * np.exp(-a * k * k)
    series = np.sin(np.pi * np.outer(xs, k)) @ w
    return np.clip((1.0 - xs) - series, 0.0, 1.0)


def absorption_split(x: float, t: float,
                     cfg: HeatKernelConfig = DEFAULT_CONFIG) -> AbsorptionSplit:
    """Three-way split (absorbed at 0, absorbed at 1, still interior)."""
    _check_interior(x)
    if t < 0:
        raise ValidationError("time must be non-negative")
    q0 = _q0_scalar(x, t, cfg.tol)
    q1 = _q0_scalar(1.0 - x, t, cfg.tol)
    return AbsorptionSplit(q0, q1, max(1.0 - q0 - q1, 0.0))


def gas_intensity(x: float, t: float, p: ReservoirParams,
                  cfg: HeatKernelConfig = DEFAULT_CONFIG) -> float:
    """Injection intensity lambda(t,x) = lambda_L q0(x,t) + lambda_R q1(x,t)."""
    s = absorption_split(x, t, cfg)
    return p.lambda_left * s.q0 + p.lambda_right * s.q1


def gas_intensity_array(xs: np.ndarray, t: float, p: ReservoirParams,
                        cfg: HeatKernelConfig = DEFAULT_CONFIG) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    return (p.lambda_left * q0_array(xs, t, cfg.tol)
            + p.lambda_right * q0_array(1.0 - xs, t, cfg.tol))


def total_intensity(t: float, p: ReservoirParams,
                    cfg: HeatKernelConfig = DEFAULT_CONFIG,
                    tol: float = 1e-10) -> float:
    """Lambda_t = integral of lambda(t, x) over (0,1)."""
    if t == 0.0:
        return 0.0
    return quadrature.adaptive(lambda xs: gas_intensity_array(xs, t, p, cfg),
                               0.0, 1.0, tol)


def stationary_intensity(x, p: ReservoirParams):
    """Linear limit profile lambda_L (1-x) + lambda_R x."""
    return p.lambda_left * (1.0 - np.asarray(x, dtype=float)) + p.lambda_right * np.asarray(x, dtype=float)


_MAX_REJECTIONS = 10_000
_GRID_SIZE = 4096


def _interior_inverse_cdf(x: float, t: float, cfg: HeatKernelConfig) -> Callable:
    """Tabulated inverse CDF of the normalized interior density, used
    when rejection sampling stalls (vanishing survival probability)."""
    grid = np.linspace(0.0, 1.0, _GRID_SIZE + 2)[1:-1]
    pdf, _ = density_array(x, grid, t, cfg)
    cdf = np.concatenate(([0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(grid))))
    total = cdf[-1]
    if total <= 0.0:
        return lambda u: np.full_like(np.asarray(u, dtype=float), x)
    cdf = cdf / total

    def sample(u):
        return np.interp(u, cdf, grid)

    return sample


def sample_interior_conditional(x: float, t: float, rng: np.random.Generator,
                                cfg: HeatKernelConfig = DEFAULT_CONFIG,
                                size: int = 1,
                                stats: Optional[dict] = None) -> np.ndarray:
    """Positions distributed as the absorbed path at time t conditioned
    on survival.

    Rejection against the free Gaussian proposal (acceptance ratio
    p_t(x,y)/phi_t(y-x) <= 1); after _MAX_REJECTIONS consecutive
    failures a draw falls back to the tabulated inverse CDF.
    """
    out = np.empty(size)
    pending = np.arange(size)
    attempts = 0
    sqrt_t = math.sqrt(t)
    while pending.size:
        m = pending.size
        y = x + sqrt_t * rng.standard_normal(m)
        u = rng.random(m)
        ok = (y > 0.0) & (y < 1.0)
        if np.any(ok):
            dens, _ = density_array(x, y[ok], t, cfg)
            free = _gauss(y[ok] - x, t)
            acc = np.zeros(m, dtype=bool)
            acc[np.flatnonzero(ok)] = u[ok] * free <= dens
        else:
            acc = np.zeros(m, dtype=bool)
        out[pending[acc]] = y[acc]
        pending = pending[~acc]
        attempts += 1
        if attempts >= _MAX_REJECTIONS and pending.size:
            inv = _interior_inverse_cdf(x, t, cfg)
            out[pending] = inv(rng.random(pending.size))
            if stats is not None:
                stats["inverse_cdf_fallbacks"] = stats.get("inverse_cdf_fallbacks", 0) + int(pending.size)
            pending = pending[:0]
    return out


def sample_abs_bm_marginal(x: float, t: float, rng: np.random.Generator,
                           cfg: HeatKernelConfig = DEFAULT_CONFIG,
                           stats: Optional[dict] = None) -> MarginalOutcome:
    """Exact time-t marginal of one absorbed Brownian path from x."""
    if t <= 0:
        raise ValidationError("marginal sampling needs t > 0")
    split = absorption_split(x, t, cfg)
    u = rng.random()
    if u < split.q0:
        return MarginalOutcome("left", None)
    if u < split.q0 + split.q1:
        return MarginalOutcome("right", None)
    y = sample_interior_conditional(x, t, rng, cfg, size=1, stats=stats)
    return MarginalOutcome("interior", float(y[0]))


def sample_poisson_positions(t: float, p: ReservoirParams,
                             rng: np.random.Generator, count: int,
                             cfg: HeatKernelConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Positions of the injected cloud: thinning of uniform proposals
    against the constant bound max(lambda_L, lambda_R)."""
    bound = max(p.lambda_left, p.lambda_right)
    if count == 0 or bound == 0.0:
        return np.empty(0)
    out = np.empty(count)
    filled = 0
    while filled < count:
        m = max(count - filled, 16)
        y = rng.random(m)
        u = rng.random(m)
        lam = gas_intensity_array(y, t, p, cfg)
        acc = y[u * bound <= lam]
        take = min(acc.size, count - filled)
        out[filled:filled + take] = acc[:take]
        filled += take
    return out


def sample_bdbg(eta0: ContinuumConfiguration, t: float, p: ReservoirParams,
                rng: np.random.Generator,
                cfg: HeatKernelConfig = DEFAULT_CONFIG,
                lam_total: Optional[float] = None,
                stats: Optional[dict] = None) -> ContinuumConfiguration:
    """One sample of the boundary driven Brownian gas at time t:
    absorbed evolution of the initial points superposed with an
    independent Poisson cloud of intensity lambda(t, .)."""
    if t <= 0:
        raise ValidationError("gas sampling needs t > 0")
    survivors: list[float] = []
    absorbed_l = eta0.absorbed_left
    absorbed_r = eta0.absorbed_right
    for x in eta0.positions:
        outcome = sample_abs_bm_marginal(x, t, rng, cfg, stats=stats)
        if outcome.kind == "left":
            absorbed_l += 1
        elif outcome.kind == "right":
            absorbed_r += 1
        else:
            survivors.append(outcome.position)
    if lam_total is None:
        lam_total = total_intensity(t, p, cfg)
    count = int(rng.poisson(lam_total))
    born = sample_poisson_positions(t, p, rng, count, cfg)
    return ContinuumConfiguration(tuple(survivors) + tuple(float(y) for y in born),
                                  absorbed_l, absorbed_r)


def _pair_mul(a: tuple[float, float], b: tuple[float, float]) -> tuple[float, float]:
    # first-order interval product: (value, error bound)
    va, ea = a
    vb, eb = b
    return va * vb, abs(va) * eb + abs(vb) * ea + ea * eb


def _subset_sum_density(n: int, m: int,
                        lam_terms: list[tuple[float, float]],
                        kernel_terms: list[list[tuple[float, float]]],
                        deform_theta: float) -> tuple[float, float]:
    """Common subset-over-[n] evaluation for the plain and deformed dual
    densities.  ``kernel_terms[j][a]`` is the (value, bound) of the
    kernel factor joining dual point j to initial particle a (of m).
    With a deformation, each non-absorbed subset S is expanded once more
    over kept particles I with (-theta)^{|S|-|I|} weights (the boundary-
    extended measure integrates the kernel to exactly 1)."""
    total = (0.0, 0.0)

    def tuple_sum(slots: tuple[int, ...]) -> tuple[float, float]:
        if not slots:
            return (1.0, 0.0)
        acc = (0.0, 0.0)
        for perm in itertools.permutations(range(m), len(slots)):
            term = (1.0, 0.0)
            for j, a in zip(slots, perm):
                term = _pair_mul(term, kernel_terms[j][a])
            acc = (acc[0] + term[0], acc[1] + term[1])
        return acc

    for absorbed in itertools.product((False, True), repeat=n):
        w = (1.0, 0.0)
        for j in range(n):
            if absorbed[j]:
                w = _pair_mul(w, lam_terms[j])
        slots = tuple(j for j in range(n) if not absorbed[j])
        if deform_theta == 0.0:
            contrib = tuple_sum(slots)
        else:
            contrib = (0.0, 0.0)
            r = len(slots)
            for keep in itertools.product((False, True), repeat=r):
                kept = tuple(slots[i] for i in range(r) if keep[i])
                sign = (-deform_theta) ** (r - len(kept))
                part = tuple_sum(kept)
                contrib = (contrib[0] + sign * part[0], contrib[1] + abs(sign) * part[1])
        term = _pair_mul(w, contrib)
        total = (total[0] + term[0], total[1] + term[1])
    return total


def _dual_inputs(z: Sequence[float], t: float, eta0: ContinuumConfiguration,
                 p: ReservoirParams, cfg: HeatKernelConfig, cap: int,
                 factor: Callable[[float, float], tuple[float, float]]):
    n = len(z)
    if n < 1 or n > cap:
        raise ValidationError(f"need 1 <= n <= {cap} dual points, got {n}")
    for zi in z:
        _check_interior(zi)
    if _enumeration_cap_exceeded(len(eta0.positions), n):
        raise ValidationError("initial configuration too large for tuple enumeration")
    lam_terms = []
    lam_err = (p.lambda_left + p.lambda_right) * cfg.tol
    for zi in z:
        s = absorption_split(zi, t, cfg)
        lam_terms.append((p.lambda_left * s.q0 + p.lambda_right * s.q1, lam_err))
    kernel_terms = [[factor(zi, xa) for xa in eta0.positions] for zi in z]
    return lam_terms, kernel_terms


def _enumeration_cap_exceeded(m: int, n: int, cap: int = 10**7) -> bool:
    terms = 1
    for j in range(n):
        terms *= max(m - j, 1)
    return terms * 2 ** n > cap


def dual_density(z: Sequence[float], t: float, eta0: ContinuumConfiguration,
                 p: ReservoirParams, cfg: HeatKernelConfig = DEFAULT_CONFIG,
                 cap: int = 4) -> KernelValue:
    """Density of the n-th factorial moment measure of the gas at the
    dual points z, evaluated deterministically: subsets of absorbed dual
    particles contribute products of gas intensities, the rest joins
    initial particles through kernel products over distinct tuples."""
    if t <= 0:
        raise ValidationError("dual density needs t > 0")

    def factor(zi: float, xa: float) -> tuple[float, float]:
        kv = abs_density(zi, xa, t, cfg)
        return kv.value, kv.trunc_error_bound

    lam_terms, kernel_terms = _dual_inputs(z, t, eta0, p, cfg, cap, factor)
    value, err = _subset_sum_density(len(z), len(eta0.positions),
                                     lam_terms, kernel_terms, 0.0)
    return KernelValue(value, err)


def theta_dual_density(z: Sequence[float], t: float,
                       eta0: ContinuumConfiguration, p: ReservoirParams,
                       cfg: HeatKernelConfig = DEFAULT_CONFIG,
                       theta: Optional[float] = None,
                       cap: int = 4) -> KernelValue:
    """Density of the theta-deformed factorial moment measure at time t.

    Identical subset structure to :func:`dual_density`, with the initial
    functional deformed: kept-particle subsets acquire (-theta) powers
    and the boundary-extended reference measure makes every dropped
    kernel integrate to exactly 1.  theta=None takes the value from the
    parameters; theta=0 reduces to the plain dual density.
    """
    if t <= 0:
        raise ValidationError("dual density needs t > 0")
    if theta is None:
        theta = p.require_theta()
    if theta < 0:
        raise ValidationError("theta must be non-negative")

    def factor(zi: float, xa: float) -> tuple[float, float]:
        kv = abs_density(zi, xa, t, cfg)
        return kv.value, kv.trunc_error_bound

    lam_terms, kernel_terms = _dual_inputs(z, t, eta0, p, cfg, cap, factor)
    value, err = _subset_sum_density(len(z), len(eta0.positions),
                                     lam_terms, kernel_terms, float(theta))
    return KernelValue(value, err)


def dual_box_moment(boxes: Sequence[tuple[float, float]], t: float,
                    eta0: ContinuumConfiguration, p: ReservoirParams,
                    cfg: HeatKernelConfig = DEFAULT_CONFIG,
                    tol: float = 1e-10) -> float:
    """Expected factorial-measure mass of a product of boxes,
    E[eta_t^(n)(B_1 x .. x B_n)], by quadrature of the dual density.

    Every subset term of the density factorizes across coordinates, so
    the n-dimensional integral reduces to products of one-dimensional
    adaptive integrals of the intensity and of kernel slices.
    """
    if t <= 0:
        raise ValidationError("dual moment needs t > 0")
    n = len(boxes)
    lam_terms = []
    kernel_terms = []
    for (a, b) in boxes:
        lam_terms.append((quadrature.adaptive(
            lambda xs: gas_intensity_array(xs, t, p, cfg), a, b, tol), tol))
        row = []
        for xa in eta0.positions:
            row.append((quadrature.adaptive(
                lambda xs, xa=xa: density_array(xa, xs, t, cfg)[0], a, b, tol), tol))
        kernel_terms.append(row)
    value, _ = _subset_sum_density(n, len(eta0.positions),
                                   lam_terms, kernel_terms, 0.0)
    return value


def doob_intensity(rho: Callable, t: float, p: ReservoirParams,
                   cfg: HeatKernelConfig = DEFAULT_CONFIG,
                   tol: float = 1e-10) -> Callable[[float], float]:
    """Evolved intensity of a Poisson cloud: z -> int rho(y) p_t(y,z) dy
    + lambda(t,z)."""
    if t <= 0:
        raise ValidationError("doob intensity needs t > 0")

    def evaluate(z: float) -> float:
        _check_interior(z)
        evolved = quadrature.adaptive(
            lambda ys: np.asarray(rho(ys), dtype=float) * density_array(z, ys, t, cfg)[0],
            0.0, 1.0, tol)
        return evolved + gas_intensity(z, t, p, cfg)

    return evaluate


def kernel_cross_consistency(cfg: HeatKernelConfig = DEFAULT_CONFIG,
                             grid: int = 50) -> float:
    """Self-test: max |spectral - image| over a grid at the crossover
    time (both series must agree within 10 tol)."""
    xs = np.linspace(0.0, 1.0, grid + 2)[1:-1]
    t = cfg.t_switch
    k, w, _ = _spectral_terms(t, cfg.tol)
    k_max = _image_range(t, cfg.tol)
    worst = 0.0
    for x in xs:
        spectral = np.sin(np.pi * np.outer(xs, k)) @ (w * np.sin(np.pi * k * x))
        image = np.zeros_like(xs)
        for j in range(-k_max, k_max + 1):
            image += _gauss(xs - x + 2.0 * j, t) - _gauss(xs + x + 2.0 * j, t)
        worst = max(worst, float(np.max(np.abs(spectral - image))))
    return worst
