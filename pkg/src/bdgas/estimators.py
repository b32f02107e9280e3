"""Statistical machinery turning the duality theorems into pass/fail
checks: reproducible parallel Monte Carlo, z-score checks with
multiple-testing discipline, Poissonity tests, the operational
Chapman-Kolmogorov comparison, and the diffusive scaling experiment.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import interval
from .chain import (ChainSpec, chain_intensity, sample_gas_discrete_batch,
                    transition_table)
from .core import ContinuumConfiguration, DiscreteConfiguration, Estimate, ValidationError
from .interval import HeatKernelConfig, ReservoirParams
from .rng import stream_generator

FAMILY_ALPHA = 0.0027  # two-sided mass beyond 3 sigma


@dataclass(frozen=True)
class CheckReport:
    """One comparison: observed vs expected with the declared mode.

    Stochastic checks pass when |observed - expected| <= z_max * stderr
    (+ any deterministic tolerance of the exact side); deterministic
    checks pass on the absolute tolerance alone.
    """

    name: str
    observed: float
    expected: float
    stderr: float
    z_score: float
    passed: bool
    n_samples: int
    seed: int
    mode: str = "stochastic"
    tolerance: float = 0.0

    def to_dict(self) -> dict:
        return {
            "name": self.name, "observed": self.observed,
            "expected": self.expected, "stderr": self.stderr,
            "z_score": self.z_score, "pass": self.passed,
            "n_samples": self.n_samples, "seed": self.seed,
            "mode": self.mode, "tolerance": self.tolerance,
        }


def deterministic_check(name: str, observed: float, expected: float,
                        tol: float, seed: int = 0) -> CheckReport:
    diff = abs(float(observed) - float(expected))
    z = math.inf if (diff > 0 and tol == 0) else (diff / tol if tol > 0 else 0.0)
    return CheckReport(name=name, observed=float(observed), expected=float(expected),
                       stderr=0.0, z_score=float(z),
                       passed=bool(diff <= tol), n_samples=1, seed=seed,
                       mode="deterministic", tolerance=tol)


def duality_check(name: str, side_mc: Estimate, side_exact: float,
                  exact_tol: float = 0.0, z_max: float = 3.0) -> CheckReport:
    """Two-sided comparison of a Monte Carlo estimate against a
    deterministic dual-side value carrying its own truncation bound."""
    diff = side_mc.mean - side_exact
    if side_mc.stderr > 0:
        z = diff / side_mc.stderr
    else:
        z = 0.0 if abs(diff) <= exact_tol else math.inf
    passed = bool(abs(diff) <= z_max * side_mc.stderr + exact_tol)
    return CheckReport(name=name, observed=float(side_mc.mean), expected=float(side_exact),
                       stderr=float(side_mc.stderr), z_score=float(z), passed=passed,
                       n_samples=side_mc.n_samples, seed=side_mc.seed,
                       mode="stochastic", tolerance=exact_tol)


def two_sample_check(name: str, a: Estimate, b: Estimate,
                     z_max: float = 3.0) -> CheckReport:
    """Equality-in-law comparison of two independent estimates."""
    se = math.hypot(a.stderr, b.stderr)
    diff = a.mean - b.mean
    z = diff / se if se > 0 else (0.0 if diff == 0 else math.inf)
    passed = bool(abs(diff) <= z_max * se) if se > 0 else bool(diff == 0)
    return CheckReport(name=name, observed=float(a.mean), expected=float(b.mean),
                       stderr=float(se), z_score=float(z), passed=passed,
                       n_samples=a.n_samples, seed=a.seed)


def normal_quantile(prob: float) -> float:
    """Upper quantile of the standard normal by bisection on erfc."""
    if not 0.0 < prob < 1.0:
        raise ValidationError("quantile needs 0 < prob < 1")
    lo, hi = 0.0, 40.0
    target = prob  # P(Z > z) = target, z >= 0 assumed (target <= 0.5)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if 0.5 * math.erfc(mid / math.sqrt(2.0)) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def bonferroni_threshold(n_checks: int, alpha: float = FAMILY_ALPHA) -> float:
    """Per-check |z| threshold giving family-wise error alpha."""
    return normal_quantile(alpha / (2.0 * max(n_checks, 1)))


def suite_verdict(checks: Sequence[CheckReport],
                  alpha: float = FAMILY_ALPHA) -> dict:
    """Individual and Bonferroni-adjusted verdicts for a check family.

    Deterministic checks must pass outright; stochastic ones enter the
    family-wise z test.
    """
    stoch = [c for c in checks if c.mode == "stochastic" and c.stderr > 0]
    det = [c for c in checks if not (c.mode == "stochastic" and c.stderr > 0)]
    z_adj = bonferroni_threshold(len(stoch), alpha) if stoch else 0.0
    stoch_ok = all(abs(c.z_score) <= z_adj or c.passed for c in stoch)
    det_ok = all(c.passed for c in det)
    return {
        "n_checks": len(checks),
        "individual_failures": sum(not c.passed for c in checks),
        "bonferroni_z": z_adj,
        "bonferroni_pass": bool(stoch_ok and det_ok),
        "all_individual_pass": all(c.passed for c in checks),
    }


class _KahanSum:
    """Compensated accumulator; merging order is fixed by the caller."""

    __slots__ = ("value", "_comp")

    def __init__(self):
        self.value = 0.0
        self._comp = 0.0

    def add(self, x: float) -> None:
        y = x - self._comp
        t = self.value + y
        self._comp = (t - self.value) - y
        self.value = t


def _stream_sizes(n: int, streams: int) -> list[int]:
    base, extra = divmod(n, streams)
    return [base + (1 if s < extra else 0) for s in range(streams)]


def run_battery(batch_sampler: Callable[[np.random.Generator, int], object],
                statistics: Sequence[Callable[[object], np.ndarray]],
                n: int, seed: int, streams: int = 4,
                threads: int = 1) -> list[Estimate]:
    """Monte Carlo estimates of several statistics over shared replicas.

    ``batch_sampler(rng, size)`` draws a block of replicas on one
    stream; each statistic maps the block to a vector of per-replica
    values.  Per-stream first and second moments are reduced in stream
    order with compensated sums, so the result is bit-identical for a
    fixed (seed, streams) regardless of thread count.
    """
    if n < 2:
        raise ValidationError("need n >= 2 replicas")
    if streams < 1:
        raise ValidationError("need at least one stream")
    sizes = _stream_sizes(n, streams)

    def stream_job(s: int) -> list[tuple[float, float]]:
        if sizes[s] == 0:
            return [(0.0, 0.0)] * len(statistics)
        rng = stream_generator(seed, s)
        block = batch_sampler(rng, sizes[s])
        out = []
        for stat in statistics:
            vals = np.asarray(stat(block), dtype=float)
            out.append((float(np.sum(vals)), float(np.sum(vals * vals))))
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_stream = list(pool.map(stream_job, range(streams)))
    else:
        per_stream = [stream_job(s) for s in range(streams)]

    estimates = []
    for j in range(len(statistics)):
        s1, s2 = _KahanSum(), _KahanSum()
        for s in range(streams):
            s1.add(per_stream[s][j][0])
            s2.add(per_stream[s][j][1])
        mean = s1.value / n
        var = max(s2.value - n * mean * mean, 0.0) / (n - 1)
        estimates.append(Estimate(mean=mean, stderr=math.sqrt(var / n),
                                  n_samples=n, seed=seed, stream_count=streams))
    return estimates


def run_mc(sampler: Callable[[np.random.Generator], object],
           statistic: Callable[[object], float],
           n: int, seed: int, streams: int = 4, threads: int = 1) -> Estimate:
    """Monte Carlo mean and standard error of one statistic.

    The replica procedure draws from the stream's generator; replicas
    are partitioned over ``streams`` counter-derived substreams of the
    master seed.
    """

    def batch(rng: np.random.Generator, size: int) -> np.ndarray:
        return np.array([statistic(sampler(rng)) for _ in range(size)], dtype=float)

    return run_battery(batch, [lambda v: v], n, seed, streams, threads)[0]


def falling_factorial_values(counts: np.ndarray, k: int) -> np.ndarray:
    """(X)_k applied entrywise to integer count samples."""
    counts = np.asarray(counts, dtype=float)
    out = np.ones_like(counts)
    for j in range(k):
        out = out * np.maximum(counts - j, 0.0)
    out[counts < k] = 0.0
    return out


def poissonity_check(counts: np.ndarray, mean: float, z_max: float = 3.0,
                     name: str = "poissonity", seed: int = 0,
                     max_order: int = 3) -> list[CheckReport]:
    """Factorial-moment test of Poissonity: E[(X)_k] = mean^k for
    k = 1..max_order."""
    if mean < 0:
        raise ValidationError("Poisson mean must be non-negative")
    counts = np.asarray(counts)
    n = counts.size
    reports = []
    for k in range(1, max_order + 1):
        vals = falling_factorial_values(counts, k)
        m = float(np.mean(vals))
        se = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        est = Estimate(mean=m, stderr=se, n_samples=n, seed=seed, stream_count=1)
        reports.append(duality_check(f"{name}[k={k}]", est, mean ** k, z_max=z_max))
    return reports


@dataclass
class TrendVerdict:
    """Monotone-decrease certification for a sequence of discrepancies
    measured with noise: strict decrease is demanded only while the
    value exceeds its own 3-sigma noise floor."""

    values: list[float]
    floors: list[float]
    final_threshold: Optional[float] = None
    passed: bool = field(init=False)

    def __post_init__(self):
        ok = True
        for prev, cur, floor in zip(self.values, self.values[1:], self.floors[1:]):
            if cur > prev and cur > floor:
                ok = False
        if self.final_threshold is not None and self.values:
            if self.values[-1] > max(self.final_threshold, self.floors[-1]):
                ok = False
        self.passed = ok

    def to_dict(self) -> dict:
        return {"values": self.values, "floors": self.floors,
                "final_threshold": self.final_threshold, "pass": self.passed}


def _interior_matrix(occ: np.ndarray) -> np.ndarray:
    return occ[:, 1:-1]


def ck_check_gas(eta0: DiscreteConfiguration, s: float, t: float,
                 spec: ChainSpec, n: int, seed: int, z_max: float = 3.0,
                 streams: int = 4, threads: int = 1,
                 second_leg: Optional[float] = None) -> list[CheckReport]:
    """Operational Chapman-Kolmogorov for the discrete gas: one-shot
    sampling at time s+t against two-stage sampling (to s, then the
    interior result evolved for t), compared through per-site factorial
    moments of order 1 and 2.

    ``second_leg`` overrides the duration of the second stage; the
    negative control passes a corrupted value there.
    """
    if s <= 0 or t <= 0:
        raise ValidationError("need s, t > 0")
    leg = t if second_leg is None else second_leg
    n_sites = spec.n_sites
    table_st = transition_table(spec, s + t)
    table_s = transition_table(spec, s)
    table_t = transition_table(spec, leg)
    lam_st = chain_intensity(spec, s + t, table=table_st)
    lam_s = chain_intensity(spec, s, table=table_s)
    lam_t = chain_intensity(spec, leg, table=table_t)

    def one_shot(rng: np.random.Generator, size: int) -> np.ndarray:
        return _interior_matrix(sample_gas_discrete_batch(
            eta0, s + t, spec, rng, size, table=table_st, intensity=lam_st))

    def two_stage(rng: np.random.Generator, size: int) -> np.ndarray:
        mid = _interior_matrix(sample_gas_discrete_batch(
            eta0, s, spec, rng, size, table=table_s, intensity=lam_s))
        dim = n_sites + 2
        occ = np.zeros((size, dim), dtype=np.int64)
        for site in range(1, n_sites + 1):
            col = mid[:, site - 1]
            total = int(col.sum())
            if total == 0:
                continue
            cdf = np.cumsum(table_t.matrix[site])
            cdf[-1] = 1.0
            dest = np.searchsorted(cdf, rng.random(total))
            owner = np.repeat(np.arange(size), col)
            np.add.at(occ, (owner, dest), 1)
        occ[:, 1:-1] += rng.poisson(lam=lam_t, size=(size, n_sites))
        return occ[:, 1:-1]

    stats = []
    names = []
    for site in range(n_sites):
        for k in (1, 2):
            stats.append(lambda m, site=site, k=k: falling_factorial_values(m[:, site], k))
            names.append(f"ck[site={site + 1},k={k}]")
    est_one = run_battery(one_shot, stats, n, seed, streams, threads)
    est_two = run_battery(two_stage, stats, n, seed + 1, streams, threads)
    return [two_sample_check(name, a, b, z_max)
            for name, a, b in zip(names, est_one, est_two)]


def ck_residual_continuum(s: float, t: float, p: ReservoirParams,
                          cfg: HeatKernelConfig, n_grid: int = 17) -> float:
    """Deterministic continuum Chapman-Kolmogorov for the injected
    cloud: max residual of int p_t(x,y) lambda(s,x) dx = lambda(t+s,y)
    - lambda(t,y) on a grid of y."""
    from . import quadrature
    ys = np.linspace(0.0, 1.0, n_grid + 2)[1:-1]
    worst = 0.0
    for y in ys:
        lhs = quadrature.adaptive(
            lambda xs: interval.density_array(y, xs, t, cfg)[0]
            * interval.gas_intensity_array(xs, s, p, cfg), 0.0, 1.0, 1e-9)
        rhs = (interval.gas_intensity(y, t + s, p, cfg)
               - interval.gas_intensity(y, t, p, cfg))
        worst = max(worst, abs(lhs - rhs))
    return worst


@dataclass
class ScalingResult:
    """Per-N deterministic intensity errors, stochastic bin-moment
    discrepancies with their noise floors, and the trend verdicts."""

    n_values: list[int]
    intensity_errors: list[float]
    intensity_trend: TrendVerdict
    moment_rows: list[dict]
    moment_discrepancies: list[float]
    moment_floors: list[float]
    moment_trend: TrendVerdict
    checks: list[CheckReport]


def scaling_experiment(n_list: Sequence[int], t: float, p: ReservoirParams,
                       bins: Sequence[tuple[float, float]], n_samples: int,
                       seed: int, cfg: HeatKernelConfig = interval.DEFAULT_CONFIG,
                       initial_fraction: Optional[float] = 0.5,
                       intensity_threshold: float = 0.02,
                       streams: int = 4, threads: int = 1) -> ScalingResult:
    """Diffusive scaling limit: chain with reservoir intensities
    lambda/N run to time t N^2 against the Brownian gas at time t.

    Deterministic part: sup-error of the rescaled chain injection
    intensity against the continuum intensity, decreasing in N with the
    final error under ``intensity_threshold`` (relative to the sup of
    the continuum intensity).  Stochastic part: rescaled bin-count
    factorial moments against quadrature of the continuum dual density,
    via the gas construction (exact, O(particles), no event loop at
    time t N^2).
    """
    for n_sites in n_list:
        if n_sites < 8:
            raise ValidationError("scaling experiment needs N >= 8")
    lam_scale = max(p.lambda_left, p.lambda_right)

    intensity_errors = []
    moment_discrepancies = []
    moment_floors = []
    moment_rows: list[dict] = []
    checks: list[CheckReport] = []
    sup_cont = max(float(np.max(interval.gas_intensity_array(
        np.linspace(0.01, 0.99, 99), t, p, cfg))), 1e-12)

    for idx, n_sites in enumerate(n_list):
        scaled = ChainSpec(n_sites, ReservoirParams(
            p.lambda_left / n_sites, p.lambda_right / n_sites, p.theta))
        micro_t = t * n_sites * n_sites
        table = transition_table(scaled, micro_t)
        lam_vec = chain_intensity(scaled, micro_t, table=table)
        xs = np.arange(1, n_sites + 1) / n_sites
        cont = interval.gas_intensity_array(xs, t, p, cfg)
        err = float(np.max(np.abs(n_sites * lam_vec - cont))) / sup_cont
        intensity_errors.append(err)

        # one initial particle at site floor(N * fraction)
        counts = [0] * n_sites
        x0 = None
        if initial_fraction is not None:
            site0 = max(1, min(n_sites, int(n_sites * initial_fraction)))
            counts[site0 - 1] = 1
            x0 = site0 / n_sites
        eta0 = DiscreteConfiguration(tuple(counts))
        eta0_cont = ContinuumConfiguration(() if x0 is None else (x0,))

        site_bins = [np.flatnonzero((xs > a) & (xs < b)) + 1 for (a, b) in bins]

        def batch(rng: np.random.Generator, size: int,
                  eta0=eta0, scaled=scaled, micro_t=micro_t,
                  table=table) -> np.ndarray:
            occ = sample_gas_discrete_batch(eta0, micro_t, scaled, rng, size,
                                            table=table)
            return occ[:, 1:-1]

        stats = []
        refs = []
        names = []
        for b_idx, (a, b) in enumerate(bins):
            sites = site_bins[b_idx]
            stats.append(lambda m, sites=sites: m[:, sites - 1].sum(axis=1))
            refs.append(interval.dual_box_moment([(a, b)], t, eta0_cont, p, cfg))
            names.append(f"scaling[N={n_sites},bin={b_idx},k=1]")
            stats.append(lambda m, sites=sites: falling_factorial_values(
                m[:, sites - 1].sum(axis=1), 2))
            refs.append(interval.dual_box_moment([(a, b), (a, b)], t, eta0_cont, p, cfg))
            names.append(f"scaling[N={n_sites},bin={b_idx},k=2]")
        ests = run_battery(batch, stats, n_samples, seed + idx, streams, threads)

        rel_err = 0.0
        floor = 0.0
        for name, est, ref in zip(names, ests, refs):
            scale = max(abs(ref), 0.05 * lam_scale)
            rel_err = max(rel_err, abs(est.mean - ref) / scale)
            floor = max(floor, 3.0 * est.stderr / scale)
            moment_rows.append({"name": name, "mc": est.mean, "ref": ref,
                                "stderr": est.stderr, "n": est.n_samples})
        moment_discrepancies.append(rel_err)
        moment_floors.append(floor)

    intensity_trend = TrendVerdict(intensity_errors,
                                   [0.0] * len(intensity_errors),
                                   final_threshold=intensity_threshold)
    moment_trend = TrendVerdict(moment_discrepancies, moment_floors)
    checks.append(deterministic_check(
        "scaling.intensity_final_error", intensity_errors[-1], 0.0,
        intensity_threshold, seed))
    checks.append(CheckReport(
        name="scaling.intensity_monotone", observed=float(intensity_trend.passed),
        expected=1.0, stderr=0.0, z_score=0.0, passed=intensity_trend.passed,
        n_samples=1, seed=seed, mode="deterministic"))
    checks.append(CheckReport(
        name="scaling.moments_monotone", observed=float(moment_trend.passed),
        expected=1.0, stderr=0.0, z_score=0.0, passed=moment_trend.passed,
        n_samples=n_samples, seed=seed, mode="deterministic"))
    return ScalingResult(
        n_values=list(n_list), intensity_errors=intensity_errors,
        intensity_trend=intensity_trend, moment_rows=moment_rows,
        moment_discrepancies=moment_discrepancies, moment_floors=moment_floors,
        moment_trend=moment_trend, checks=checks)
