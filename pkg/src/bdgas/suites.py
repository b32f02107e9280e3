"""Experiment suites behind the CLI: each builds the check list (and
data tables) for one experiment kind, with a built-in corrupted variant
used as the negative control.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import estimators, interval, quadrature
from .chain import (ChainSpec, chain_intensity, dual_expectation_discrete,
                    sample_gas_discrete_batch, simulate_reservoir,
                    transition_table, verify_intensity_semigroup)
from .core import (ContinuumConfiguration, DiscreteConfiguration,
                   ReservoirParams, ValidationError, make_discrete_config)
from .dualities import charlier, classical_duality, orthogonal_duality
from .estimators import (CheckReport, TrendVerdict, deterministic_check,
                         duality_check, falling_factorial_values,
                         run_battery, two_sample_check)
from .interval import HeatKernelConfig
from .rng import stream_generator

KINDS = ("kernel-check", "duality-discrete", "duality-continuum",
         "equivalence", "stationary", "doob", "scaling", "orthogonality",
         "ck-check", "simulate")


@dataclass
class SuiteResult:
    checks: list[CheckReport] = field(default_factory=list)
    tables: dict = field(default_factory=dict)      # name -> (header, rows)
    extras: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)       # sampler metadata

    def verdict(self, alpha: float = estimators.FAMILY_ALPHA) -> dict:
        return estimators.suite_verdict(self.checks, alpha)


def _params(model: dict) -> ReservoirParams:
    return ReservoirParams(model.get("lambda_left", 1.0),
                           model.get("lambda_right", 2.0),
                           model.get("theta"))


def dual_battery(n_sites: int, max_particles: int = 3, max_support: int = 2,
                 max_tally: int = 1) -> list[DiscreteConfiguration]:
    """All dual configurations with at most ``max_particles`` interior
    particles on at most ``max_support`` sites, and absorbed tallies up
    to ``max_tally`` each."""
    interiors = set()
    for k in range(max_particles + 1):
        for combo in itertools.combinations_with_replacement(range(1, n_sites + 1), k):
            occ = Counter(combo)
            if len(occ) > max_support:
                continue
            counts = tuple(occ.get(i, 0) for i in range(1, n_sites + 1))
            interiors.add(counts)
    out = []
    for counts in sorted(interiors):
        for a_l in range(max_tally + 1):
            for a_r in range(max_tally + 1):
                out.append(DiscreteConfiguration(counts, a_l, a_r))
    return out


def _battery_statistic(xi: DiscreteConfiguration, p: ReservoirParams):
    weight = (p.lambda_left ** xi.absorbed_left
              * p.lambda_right ** xi.absorbed_right)
    active = [(i, k) for i, k in enumerate(xi.counts) if k > 0]

    def stat(m: np.ndarray) -> np.ndarray:
        out = np.full(m.shape[0], weight)
        for i, k in active:
            out = out * falling_factorial_values(m[:, i], k)
        return out

    return stat


def _reservoir_batch(eta0: DiscreteConfiguration, t: float, spec: ChainSpec):
    def batch(rng: np.random.Generator, size: int) -> np.ndarray:
        m = np.empty((size, spec.n_sites), dtype=np.int64)
        for r in range(size):
            m[r] = simulate_reservoir(eta0, t, spec, rng).counts
        return m
    return batch


def _gas_batch(eta0: DiscreteConfiguration, t: float, spec: ChainSpec,
               table=None, intensity=None):
    def batch(rng: np.random.Generator, size: int) -> np.ndarray:
        return sample_gas_discrete_batch(eta0, t, spec, rng, size,
                                         table=table, intensity=intensity)[:, 1:-1]
    return batch


def _xi_label(xi: DiscreteConfiguration) -> str:
    return f"xi={list(xi.counts)},L={xi.absorbed_left},R={xi.absorbed_right}"


# ---------------------------------------------------------------------------
# kernel-check: deterministic kernel identities and the injection-
# intensity semigroup identity

def suite_kernel_check(model: dict, mc: dict, tolerances: dict,
                       negative_control: bool = False,
                       threads: int = 1) -> SuiteResult:
    res = SuiteResult()
    seed = mc.get("seed", 0)
    p = _params(model)
    cfg = HeatKernelConfig()
    tol_sym = tolerances.get("symmetry", 1e-12)
    tol_row = tolerances.get("row_sum", 1e-9)
    tol_ck_d = tolerances.get("ck_discrete", 1e-9)
    tol_semi_d = tolerances.get("semigroup_discrete", 1e-10)
    tol_cons = tolerances.get("conservation", 1e-8)
    tol_ck_c = tolerances.get("ck_continuum", 1e-7)
    tol_semi_c = tolerances.get("semigroup_continuum", 1e-6)
    rng = stream_generator(seed, 0)

    for n_sites in model.get("n_sites_list", [4, 9, 17, 32]):
        spec = ChainSpec(n_sites, p)
        t = float(rng.uniform(0.1, 5.0))
        s = float(rng.uniform(0.1, 5.0))
        tab_t = transition_table(spec, t)
        tab_s = transition_table(spec, s)
        tab_ts = transition_table(spec, t + s)
        res.checks.append(deterministic_check(
            f"rows[N={n_sites}]", float(np.max(np.abs(tab_t.matrix.sum(axis=1) - 1.0))),
            0.0, tol_row, seed))
        res.checks.append(deterministic_check(
            f"symmetry[N={n_sites}]",
            float(np.max(np.abs(tab_t.interior() - tab_t.interior().T))),
            0.0, tol_sym, seed))
        ck = float(np.max(np.abs(tab_ts.matrix - tab_s.matrix @ tab_t.matrix)))
        if negative_control:
            ck = float(np.max(np.abs(transition_table(spec, 2 * (t + s)).matrix
                                     - tab_s.matrix @ tab_t.matrix)))
        res.checks.append(deterministic_check(
            f"chapman-kolmogorov[N={n_sites}]", ck, 0.0, tol_ck_d, seed))
        if n_sites <= 16:
            res.checks.append(deterministic_check(
                f"intensity-semigroup[N={n_sites}]",
                verify_intensity_semigroup(spec, 0.5, 0.5), 0.0, tol_semi_d, seed))

    res.checks.append(deterministic_check(
        "kernel-cross-consistency", interval.kernel_cross_consistency(cfg),
        0.0, 10.0 * cfg.tol, seed))
    for _ in range(model.get("continuum_points", 6)):
        x = float(rng.uniform(0.05, 0.95))
        t = float(rng.uniform(0.02, 2.0))
        split = interval.absorption_split(x, t, cfg)
        t_int = 2.0 * t if negative_control else t
        integ = quadrature.adaptive(
            lambda ys: interval.density_array(x, ys, t_int, cfg)[0], 0.0, 1.0, 1e-10)
        res.checks.append(deterministic_check(
            f"conservation[x={x:.3f},t={t:.3f}]",
            abs(integ + split.q0 + split.q1 - 1.0), 0.0, tol_cons, seed))
    for _ in range(model.get("continuum_ck_points", 3)):
        x = float(rng.uniform(0.1, 0.9))
        y = float(rng.uniform(0.1, 0.9))
        s2 = float(rng.uniform(0.05, 0.6))
        t2 = float(rng.uniform(0.05, 0.6))
        conv = quadrature.adaptive(
            lambda us: interval.density_array(x, us, s2, cfg)[0]
            * interval.density_array(y, us, t2, cfg)[0], 0.0, 1.0, 1e-10)
        res.checks.append(deterministic_check(
            f"ck-continuum[x={x:.2f},y={y:.2f}]",
            abs(conv - interval.abs_density(x, y, s2 + t2, cfg).value),
            0.0, tol_ck_c, seed))
    res.checks.append(deterministic_check(
        "intensity-semigroup-continuum",
        estimators.ck_residual_continuum(0.3, 0.25, p, cfg, n_grid=5),
        0.0, tol_semi_c, seed))
    return res


# ---------------------------------------------------------------------------
# duality-discrete: reservoir-process Monte Carlo against the exact
# absorbed-walk dual enumeration

def suite_duality_discrete(model: dict, mc: dict, tolerances: dict,
                           negative_control: bool = False,
                           threads: int = 1) -> SuiteResult:
    res = SuiteResult()
    p = _params(model)
    spec = ChainSpec(model.get("n_sites", 5), p)
    eta0 = make_discrete_config(model.get("initial", [3, 1, 0, 2, 1]))
    times = model.get("times", [0.3, 0.7, 2.0])
    xis = dual_battery(spec.n_sites, model.get("max_dual", 3),
                       model.get("max_support", 2), model.get("max_tally", 1))
    n = mc.get("n_samples", 100_000)
    seed = mc.get("seed", 0)
    streams = mc.get("streams", 8)
    z_max = mc.get("z_max", 3.0)
    stats = [_battery_statistic(xi, p) for xi in xis]
    rows = []
    for it, t in enumerate(times):
        table = transition_table(spec, t)
        exact = [dual_expectation_discrete(xi, eta0, t, spec, table=table)
                 for xi in xis]
        ests = run_battery(_reservoir_batch(eta0, t, spec), stats, n,
                           seed + it, streams, threads)
        for xi, est, ex in zip(xis, ests, exact):
            if negative_control:
                ex = ex + 10.0 * max(est.stderr, 0.05 * abs(ex) + 1e-3)
            check = duality_check(f"duality[t={t},{_xi_label(xi)}]", est, ex,
                                  exact_tol=table.tolerance, z_max=z_max)
            res.checks.append(check)
            rows.append([check.name, t, est.mean, ex, est.stderr, check.z_score,
                         int(check.passed)])
    res.tables["duality_discrete"] = (
        ["check", "t", "mc_mean", "exact", "stderr", "z", "pass"], rows)
    return res


# ---------------------------------------------------------------------------
# equivalence: the birth-death reservoir process and the gas
# construction agree on the dual-moment battery

def suite_equivalence(model: dict, mc: dict, tolerances: dict,
                      negative_control: bool = False,
                      threads: int = 1) -> SuiteResult:
    res = SuiteResult()
    p = _params(model)
    spec = ChainSpec(model.get("n_sites", 5), p)
    eta0 = make_discrete_config(model.get("initial", [3, 1, 0, 2, 1]))
    times = model.get("times", [0.4, 1.1])
    xis = dual_battery(spec.n_sites, model.get("max_dual", 3),
                       model.get("max_support", 2), model.get("max_tally", 1))
    n = mc.get("n_samples", 100_000)
    seed = mc.get("seed", 0)
    streams = mc.get("streams", 8)
    z_max = mc.get("z_max", 3.0)
    stats = [_battery_statistic(xi, p) for xi in xis]
    rows = []
    for it, t in enumerate(times):
        gas_spec = spec
        if negative_control:
            gas_spec = ChainSpec(spec.n_sites, ReservoirParams(
                p.lambda_left, 1.5 * p.lambda_right + 0.5, p.theta))
        table = transition_table(gas_spec, t)
        lam = chain_intensity(gas_spec, t, table=table)
        est_res = run_battery(_reservoir_batch(eta0, t, spec), stats, n,
                              seed + 2 * it, streams, threads)
        est_gas = run_battery(_gas_batch(eta0, t, gas_spec, table, lam), stats,
                              n, seed + 2 * it + 1, streams, threads)
        for xi, a, b in zip(xis, est_res, est_gas):
            check = two_sample_check(f"equivalence[t={t},{_xi_label(xi)}]",
                                     a, b, z_max)
            res.checks.append(check)
            rows.append([check.name, t, a.mean, b.mean, check.stderr,
                         check.z_score, int(check.passed)])
    res.tables["equivalence"] = (
        ["check", "t", "reservoir_mean", "gas_mean", "stderr", "z", "pass"], rows)
    return res


# ---------------------------------------------------------------------------
# duality-continuum: gas factorial moments against quadrature of the
# dual density

def _bdbg_bins_batch(eta0: ContinuumConfiguration, t: float,
                     p: ReservoirParams, cfg: HeatKernelConfig,
                     bins: Sequence[tuple[float, float]], lam_total: float,
                     stats_sink: Optional[dict] = None):
    def batch(rng: np.random.Generator, size: int) -> np.ndarray:
        out = np.empty((size, len(bins)), dtype=np.int64)
        for r in range(size):
            g = interval.sample_bdbg(eta0, t, p, rng, cfg,
                                     lam_total=lam_total, stats=stats_sink)
            for j, (a, b) in enumerate(bins):
                out[r, j] = g.count_in(a, b)
        return out
    return batch


def _box_moment_statistics(bins: Sequence[tuple[float, float]]):
    """Statistics and box tuples for first and second factorial moments
    of the bin counts: (X_j), (X_j)_2, and the distinct cross products."""
    stats = []
    boxes: list[tuple] = []
    names = []
    for j, b in enumerate(bins):
        stats.append(lambda m, j=j: m[:, j].astype(float))
        boxes.append((b,))
        names.append(f"n=1,bin{j}")
    for j, b in enumerate(bins):
        stats.append(lambda m, j=j: falling_factorial_values(m[:, j], 2))
        boxes.append((b, b))
        names.append(f"n=2,bin{j}^2")
    for j, k in itertools.combinations(range(len(bins)), 2):
        stats.append(lambda m, j=j, k=k: (m[:, j] * m[:, k]).astype(float))
        boxes.append((bins[j], bins[k]))
        names.append(f"n=2,bin{j}xbin{k}")
    return stats, boxes, names


def suite_duality_continuum(model: dict, mc: dict, tolerances: dict,
                            negative_control: bool = False,
                            threads: int = 1) -> SuiteResult:
    res = SuiteResult()
    p = _params(model)
    cfg = HeatKernelConfig()
    bins = [tuple(b) for b in model.get("boxes", [[0.2, 0.4], [0.6, 0.9]])]
    initials = [tuple(c) for c in model.get("initials", [[], [0.3], [0.3, 0.7]])]
    times = model.get("times", [0.1, 0.5])
    n = mc.get("n_samples", 100_000)
    seed = mc.get("seed", 0)
    streams = mc.get("streams", 8)
    z_max = mc.get("z_max", 3.0)
    stats, boxes, names = _box_moment_statistics(bins)
    rows = []
    case = 0
    for t in times:
        lam_total = interval.total_intensity(t, p, cfg)
        for init in initials:
            eta0 = ContinuumConfiguration(init)
            refs = [interval.dual_box_moment(bx, t, eta0, p, cfg) for bx in boxes]
            ests = run_battery(
                _bdbg_bins_batch(eta0, t, p, cfg, bins, lam_total, res.stats),
                stats, n, seed + case, streams, threads)
            for name, est, ref in zip(names, ests, refs):
                if negative_control:
                    ref = ref + 10.0 * max(est.stderr, 0.05 * abs(ref) + 1e-3)
                check = duality_check(
                    f"duality-continuum[t={t},eta0={list(init)},{name}]",
                    est, ref, exact_tol=1e-7, z_max=z_max)
                res.checks.append(check)
                rows.append([check.name, t, est.mean, ref, est.stderr,
                             check.z_score, int(check.passed)])
            case += 1
    res.tables["duality_continuum"] = (
        ["check", "t", "mc_mean", "reference", "stderr", "z", "pass"], rows)
    return res


# ---------------------------------------------------------------------------
# stationary: Poisson(stationary profile) is preserved; arbitrary
# starts relax to it

def _sample_stationary_start(p: ReservoirParams, rng: np.random.Generator) -> ContinuumConfiguration:
    lam_mean = 0.5 * (p.lambda_left + p.lambda_right)
    bound = max(p.lambda_left, p.lambda_right)
    count = int(rng.poisson(lam_mean))
    pts = []
    while len(pts) < count:
        y = rng.random()
        if rng.random() * bound <= interval.stationary_intensity(y, p):
            pts.append(float(y))
    return ContinuumConfiguration(tuple(pts))


def suite_stationary(model: dict, mc: dict, tolerances: dict,
                     negative_control: bool = False,
                     threads: int = 1) -> SuiteResult:
    res = SuiteResult()
    p = _params(model)
    cfg = HeatKernelConfig()
    bins = [tuple(b) for b in model.get("bins",
            [[0.0, 0.25], [0.25, 0.5], [0.5, 0.75], [0.75, 1.0]])]
    t_eq = model.get("t", 1.0)
    n = mc.get("n_samples", 100_000)
    seed = mc.get("seed", 0)
    streams = mc.get("streams", 8)
    z_max = mc.get("z_max", 3.0)
    p_ref = p
    if negative_control:
        p_ref = ReservoirParams(p.lambda_right, p.lambda_left, p.theta)

    # Poisson(lambda_inf) start stays Poisson(lambda_inf): per-bin
    # factorial moments k <= 3
    lam_total = interval.total_intensity(t_eq, p, cfg)
    bin_means = [quadrature.adaptive(
        lambda xs: interval.stationary_intensity(xs, p_ref), a, b, 1e-12)
        for (a, b) in bins]

    def batch(rng: np.random.Generator, size: int) -> np.ndarray:
        out = np.empty((size, len(bins)), dtype=np.int64)
        for r in range(size):
            start = _sample_stationary_start(p, rng)
            g = interval.sample_bdbg(start, t_eq, p, rng, cfg,
                                     lam_total=lam_total, stats=res.stats)
            for j, (a, b) in enumerate(bins):
                out[r, j] = g.count_in(a, b)
        return out

    stats = []
    expected = []
    names = []
    for j, mean in enumerate(bin_means):
        for k in (1, 2, 3):
            stats.append(lambda m, j=j, k=k: falling_factorial_values(m[:, j], k))
            expected.append(mean ** k)
            names.append(f"stationary[bin{j},k={k}]")
    ests = run_battery(batch, stats, n, seed, streams, threads)
    rows = []
    for name, est, exp in zip(names, ests, expected):
        check = duality_check(name, est, exp, exact_tol=1e-9, z_max=z_max)
        res.checks.append(check)
        rows.append([name, est.mean, exp, est.stderr, check.z_score, int(check.passed)])
    res.tables["stationary_equilibrium"] = (
        ["check", "mc_mean", "expected", "stderr", "z", "pass"], rows)

    # fixed initial configuration relaxes to the stationary profile:
    # deterministic dual-side discrepancy decreasing over the time ladder,
    # cross-checked by MC where the signal is resolvable
    init = ContinuumConfiguration(tuple(model.get("fixed_initial", [0.2, 0.5, 0.8])))
    ladder = model.get("trend_times", [0.5, 1.0, 2.0, 4.0])
    stat_means = [quadrature.adaptive(
        lambda xs: interval.stationary_intensity(xs, p), a, b, 1e-12)
        for (a, b) in bins]
    discrepancies = []
    trend_rows = []
    for t in ladder:
        t_ref = 0.5 * t if negative_control else t
        worst = 0.0
        for (a, b), m_inf in zip(bins, stat_means):
            m_t = interval.dual_box_moment([(a, b)], t_ref, init, p, cfg)
            worst = max(worst, abs(m_t - m_inf) / m_inf)
        discrepancies.append(worst)
        trend_rows.append([t, worst])
    trend = TrendVerdict(discrepancies, [0.0] * len(ladder),
                         final_threshold=tolerances.get("final_relative", 0.02))
    res.checks.append(CheckReport(
        name="stationary.relaxation_trend", observed=discrepancies[-1],
        expected=0.0, stderr=0.0, z_score=0.0, passed=trend.passed,
        n_samples=1, seed=seed, mode="deterministic",
        tolerance=tolerances.get("final_relative", 0.02)))
    res.tables["stationary_trend"] = (["t", "max_relative_discrepancy"], trend_rows)
    res.extras["trend"] = trend.to_dict()

    n_cross = max(n // 5, 2)
    for t in [s for s in ladder if s <= 1.0][:2]:
        lam_tot_t = interval.total_intensity(t, p, cfg)
        refs = [interval.dual_box_moment([(a, b)], t, init, p, cfg)
                for (a, b) in bins]

        def batch_fixed(rng: np.random.Generator, size: int, t=t,
                        lam_tot_t=lam_tot_t) -> np.ndarray:
            out = np.empty((size, len(bins)), dtype=np.int64)
            for r in range(size):
                g = interval.sample_bdbg(init, t, p, rng, cfg,
                                         lam_total=lam_tot_t, stats=res.stats)
                for j, (a, b) in enumerate(bins):
                    out[r, j] = g.count_in(a, b)
            return out

        mean_stats = [lambda m, j=j: m[:, j].astype(float)
                      for j in range(len(bins))]
        ests = run_battery(batch_fixed, mean_stats, n_cross, seed + 17, streams, threads)
        for j, (est, ref) in enumerate(zip(ests, refs)):
            res.checks.append(duality_check(
                f"stationary.relax_mc[t={t},bin{j}]", est, ref,
                exact_tol=1e-7, z_max=z_max))
    return res


# ---------------------------------------------------------------------------
# doob: equilibrium reversibility (i.i.d. Poisson marginals preserved)

def suite_doob(model: dict, mc: dict, tolerances: dict,
               negative_control: bool = False, threads: int = 1) -> SuiteResult:
    res = SuiteResult()
    theta = model.get("theta", 1.5)
    n_sites = model.get("n_sites", 4)
    t = model.get("t", 1.0)
    spec = ChainSpec(n_sites, ReservoirParams(theta, theta, theta))
    n = mc.get("n_samples", 100_000)
    seed = mc.get("seed", 0)
    streams = mc.get("streams", 8)
    z_max = mc.get("z_max", 3.0)
    theta_ref = 1.1 * theta if negative_control else theta

    def batch(rng: np.random.Generator, size: int) -> np.ndarray:
        m = np.empty((size, n_sites), dtype=np.int64)
        for r in range(size):
            start = DiscreteConfiguration(tuple(int(c) for c in rng.poisson(theta, n_sites)))
            m[r] = simulate_reservoir(start, t, spec, rng).counts
        return m

    stats = []
    labels = []
    for site in range(n_sites):
        for k in (1, 2, 3):
            stats.append(lambda m, site=site, k=k: falling_factorial_values(m[:, site], k))
            labels.append((f"doob[site={site + 1},k={k}]", k))
    ests = run_battery(batch, stats, n, seed, streams, threads)
    rows = []
    for (name, k), est in zip(labels, ests):
        check = duality_check(name, est, theta_ref ** k, z_max=z_max)
        res.checks.append(check)
        rows.append([name, est.mean, theta_ref ** k, est.stderr,
                     check.z_score, int(check.passed)])
    res.tables["doob"] = (["check", "mc_mean", "expected", "stderr", "z", "pass"], rows)

    # continuum counterpart: the stationary profile is a fixed point of
    # the Doob-evolved intensity (deterministic)
    p = ReservoirParams(1.0, 3.0)
    evolve = interval.doob_intensity(lambda xs: interval.stationary_intensity(xs, p),
                                     0.4, p)
    worst = max(abs(evolve(z) - interval.stationary_intensity(z, p))
                for z in (0.2, 0.5, 0.8))
    res.checks.append(deterministic_check(
        "doob.continuum_fixed_point", worst, 0.0,
        tolerances.get("fixed_point", 1e-6), seed))
    return res


# ---------------------------------------------------------------------------
# scaling: diffusive chain-to-gas convergence

def suite_scaling(model: dict, mc: dict, tolerances: dict,
                  negative_control: bool = False, threads: int = 1) -> SuiteResult:
    res = SuiteResult()
    p = _params(model)
    cfg = HeatKernelConfig()
    t = model.get("t", 0.5)
    n_list = model.get("n_list", [32, 64, 128])
    # dyadic partition: edges sit on the lattice for every N in the
    # default ladder, so the site-quantization error of each bin count
    # decays monotonically in N instead of oscillating with alignment
    bins = [tuple(b) for b in model.get("bins",
            [[0.0, 0.25], [0.25, 0.5], [0.5, 0.75], [0.75, 1.0]])]
    if negative_control:
        # deterministic comparison against the wrong-time continuum
        # intensity; the final-error gate must fail
        t_cont = 0.25 * t
        errors = []
        sup_cont = max(float(np.max(interval.gas_intensity_array(
            np.linspace(0.01, 0.99, 99), t_cont, p, cfg))), 1e-12)
        for n_sites in n_list:
            scaled = ChainSpec(n_sites, ReservoirParams(
                p.lambda_left / n_sites, p.lambda_right / n_sites))
            lam_vec = chain_intensity(scaled, t * n_sites * n_sites)
            xs = np.arange(1, n_sites + 1) / n_sites
            cont = interval.gas_intensity_array(xs, t_cont, p, cfg)
            errors.append(float(np.max(np.abs(n_sites * lam_vec - cont))) / sup_cont)
        res.checks.append(deterministic_check(
            "scaling.intensity_final_error", errors[-1], 0.0,
            tolerances.get("intensity_final", 0.02), mc.get("seed", 0)))
        res.tables["scaling_intensity"] = (
            ["N", "sup_relative_error"], [[n, e] for n, e in zip(n_list, errors)])
        return res
    result = estimators.scaling_experiment(
        n_list, t, p, bins, mc.get("n_samples", 100_000), mc.get("seed", 0),
        cfg, model.get("initial_fraction", 0.5),
        tolerances.get("intensity_final", 0.02),
        mc.get("streams", 8), threads)
    res.checks.extend(result.checks)
    res.tables["scaling_intensity"] = (
        ["N", "sup_relative_error"],
        [[n, e] for n, e in zip(result.n_values, result.intensity_errors)])
    res.tables["scaling_moments"] = (
        ["check", "mc_mean", "reference", "stderr", "n_samples"],
        [[r["name"], r["mc"], r["ref"], r["stderr"], r["n"]]
         for r in result.moment_rows])
    res.extras["intensity_trend"] = result.intensity_trend.to_dict()
    res.extras["moment_trend"] = result.moment_trend.to_dict()
    return res


# ---------------------------------------------------------------------------
# orthogonality: Charlier orthogonality and the deformed-measure
# identities

def suite_orthogonality(model: dict, mc: dict, tolerances: dict,
                        negative_control: bool = False,
                        threads: int = 1) -> SuiteResult:
    res = SuiteResult()
    theta = model.get("theta", 1.3)
    n = mc.get("n_samples", 100_000)
    seed = mc.get("seed", 0)
    streams = mc.get("streams", 8)
    z_max = mc.get("z_max", 3.0)
    corrupt = 1.25 if negative_control else 1.0

    # Charlier orthogonality under the Poisson law
    def pois_batch(rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.poisson(theta, size)

    pairs = [(j, k) for j in range(4) for k in range(j, 4) if (j, k) != (0, 0)]
    cstats = []
    for j, k in pairs:
        cstats.append(lambda x, j=j, k=k: np.array(
            [charlier(j, int(v), theta) * charlier(k, int(v), theta) for v in x]))
    ests = run_battery(pois_batch, cstats, n, seed, streams, threads)
    rows = []
    for (j, k), est in zip(pairs, ests):
        expect = (math.factorial(j) * theta ** j if j == k else 0.0) * corrupt
        check = duality_check(f"charlier[E C_{j} C_{k}]", est, expect, z_max=z_max)
        res.checks.append(check)
        rows.append([check.name, est.mean, expect, est.stderr,
                     check.z_score, int(check.passed)])
    res.tables["charlier_orthogonality"] = (
        ["check", "mc_mean", "expected", "stderr", "z", "pass"], rows)

    # deformed-measure orthogonality over a Poisson point process
    b1 = tuple(model.get("box1", (0.1, 0.45)))
    b2 = tuple(model.get("box2", (0.55, 0.9)))
    m1, m2 = b1[1] - b1[0], b2[1] - b2[0]

    def ppp_batch(rng: np.random.Generator, size: int) -> np.ndarray:
        counts = rng.poisson(theta, size)  # total points on (0,1)
        out = np.empty((size, 2), dtype=np.int64)
        for r in range(size):
            pts = rng.random(counts[r])
            out[r, 0] = int(np.sum((pts > b1[0]) & (pts < b1[1])))
            out[r, 1] = int(np.sum((pts > b2[0]) & (pts < b2[1])))
        return out

    def f1(m):
        return np.array([charlier(1, int(v), theta * m1) for v in m[:, 0]])

    def f2_cross(m):
        return np.array([charlier(1, int(a), theta * m1) * charlier(1, int(b), theta * m2)
                         for a, b in zip(m[:, 0], m[:, 1])])

    def f2_same(m):
        return np.array([charlier(2, int(v), theta * m1) for v in m[:, 0]])

    combos = [
        ("n=1,n'=1 same box", lambda m: f1(m) * f1(m), theta * m1),
        ("n=1,n'=1 disjoint", lambda m: f1(m) * np.array(
            [charlier(1, int(v), theta * m2) for v in m[:, 1]]), 0.0),
        ("n=1,n'=2", lambda m: f1(m) * f2_same(m), 0.0),
        ("n=2,n'=2 cross", lambda m: f2_cross(m) * f2_cross(m), theta ** 2 * m1 * m2),
        ("n=2,n'=2 same", lambda m: f2_same(m) * f2_same(m), 2.0 * (theta * m1) ** 2),
    ]
    ests = run_battery(ppp_batch, [c[1] for c in combos], n, seed + 1,
                       streams, threads)
    rows = []
    for (name, _, expect), est in zip(combos, ests):
        expect = expect * corrupt + (0.1 if negative_control and expect == 0.0 else 0.0)
        check = duality_check(f"deformed-orthogonality[{name}]", est, expect,
                              z_max=z_max)
        res.checks.append(check)
        rows.append([check.name, est.mean, expect, est.stderr,
                     check.z_score, int(check.passed)])
    res.tables["deformed_orthogonality"] = (
        ["check", "mc_mean", "expected", "stderr", "z", "pass"], rows)

    # equilibrium gas: deformed moments vanish
    p_eq = ReservoirParams(theta, theta, theta)
    cfg = HeatKernelConfig()
    t_eq = model.get("t", 0.6)
    lam_total = interval.total_intensity(t_eq, p_eq, cfg)

    def eq_batch(rng: np.random.Generator, size: int) -> np.ndarray:
        out = np.empty((size, 2), dtype=np.int64)
        for r in range(size):
            start = _sample_stationary_start(p_eq, rng)
            g = interval.sample_bdbg(start, t_eq, p_eq, rng, cfg,
                                     lam_total=lam_total, stats=res.stats)
            out[r, 0] = g.count_in(*b1)
            out[r, 1] = g.count_in(*b2)
        return out

    eq_stats = [f1, f2_cross, f2_same]
    eq_names = ["n=1", "n=2 cross", "n=2 same"]
    ests = run_battery(eq_batch, eq_stats, max(n // 2, 2), seed + 2, streams, threads)
    for name, est in zip(eq_names, ests):
        target = 0.1 if negative_control else 0.0
        res.checks.append(duality_check(
            f"equilibrium-deformed[{name}]", est, target, z_max=z_max))

    # subset-expansion identity, exhaustively on small inputs
    n_sites = model.get("subset_sites", 3)
    worst = 0.0
    rng = stream_generator(seed + 3, 0)
    etas = [DiscreteConfiguration(tuple(int(c) for c in rng.integers(0, 6, n_sites)))
            for _ in range(4)]
    for total in range(0, 5):
        for combo in itertools.combinations_with_replacement(range(1, n_sites + 1), total):
            occ = Counter(combo)
            xi = DiscreteConfiguration(tuple(occ.get(i, 0) for i in range(1, n_sites + 1)))
            for eta in etas:
                direct = orthogonal_duality(xi, eta, theta)
                expansion = _subset_expansion(xi, eta, theta)
                worst = max(worst, abs(direct - expansion))
    if negative_control:
        worst += 1.0
    res.checks.append(deterministic_check(
        "subset-expansion", worst, 0.0, tolerances.get("subset_expansion", 1e-9),
        seed))
    return res


def _subset_expansion(xi: DiscreteConfiguration, eta: DiscreteConfiguration,
                      theta: float) -> float:
    """Alternating sum over sub-configurations xi' <= xi of binomial-
    weighted classical dualities (the classical-to-orthogonal bridge)."""
    ranges = [range(k + 1) for k in xi.counts]
    total = 0.0
    size = xi.interior_mass
    for sub in itertools.product(*ranges):
        weight = 1.0
        for k, kp in zip(xi.counts, sub):
            weight *= math.comb(k, kp)
        sub_xi = DiscreteConfiguration(tuple(sub))
        total += weight * (-theta) ** (size - sum(sub)) * classical_duality(sub_xi, eta)
    return total


# ---------------------------------------------------------------------------
# ck-check (operational Chapman-Kolmogorov, appendix identity)

def suite_ck_check(model: dict, mc: dict, tolerances: dict,
                   negative_control: bool = False, threads: int = 1) -> SuiteResult:
    res = SuiteResult()
    p = _params(model)
    spec = ChainSpec(model.get("n_sites", 4), p)
    eta0 = make_discrete_config(model.get("initial", [1, 0, 2, 0]))
    s = model.get("s", 0.5)
    t = model.get("t", 0.5)
    if negative_control:
        # two-stage second leg deliberately lengthened: moments differ
        res.checks.extend(estimators.ck_check_gas(
            eta0, s, t, spec, mc.get("n_samples", 100_000), mc.get("seed", 0),
            mc.get("z_max", 3.0), mc.get("streams", 8), threads,
            second_leg=1.6 * t))
        # wrong identity lambda_s^T P_t = lambda_{t+s} (missing -lambda_t)
        lam_s = chain_intensity(spec, s)
        lam_ts = chain_intensity(spec, t + s)
        p_int = transition_table(spec, t).interior()
        res.checks.append(deterministic_check(
            "ck.discrete_intensity",
            float(np.max(np.abs(lam_s @ p_int - lam_ts))), 0.0,
            tolerances.get("semigroup_discrete", 1e-10), mc.get("seed", 0)))
        return res
    res.checks.extend(estimators.ck_check_gas(
        eta0, s, t, spec, mc.get("n_samples", 100_000), mc.get("seed", 0),
        mc.get("z_max", 3.0), mc.get("streams", 8), threads))
    cfg = HeatKernelConfig()
    res.checks.append(deterministic_check(
        "ck.continuum_intensity",
        estimators.ck_residual_continuum(s, t, p, cfg, n_grid=5),
        0.0, tolerances.get("semigroup_continuum", 1e-6), mc.get("seed", 0)))
    res.checks.append(deterministic_check(
        "ck.discrete_intensity", verify_intensity_semigroup(spec, s, t), 0.0,
        tolerances.get("semigroup_discrete", 1e-10), mc.get("seed", 0)))
    return res


# ---------------------------------------------------------------------------
# simulate: run a simulator and dump samples

def suite_simulate(model: dict, mc: dict, tolerances: dict,
                   negative_control: bool = False, threads: int = 1) -> SuiteResult:
    res = SuiteResult()
    p = _params(model)
    target = model.get("target", "reservoir")
    t = model.get("t", 1.0)
    n = min(mc.get("n_samples", 1000), 10_000)
    seed = mc.get("seed", 0)
    rng = stream_generator(seed, 0)
    rows = []
    if target in ("reservoir", "gas-discrete"):
        spec = ChainSpec(model.get("n_sites", 5), p)
        eta0 = make_discrete_config(model.get("initial", [1, 0, 0, 0, 1]))
        for r in range(n):
            if t == 0.0:
                cfg_out = eta0
            elif target == "reservoir":
                cfg_out = simulate_reservoir(eta0, t, spec, rng)
            else:
                occ = sample_gas_discrete_batch(eta0, t, spec, rng, 1)[0]
                cfg_out = DiscreteConfiguration(tuple(int(c) for c in occ[1:-1]),
                                                int(occ[0]), int(occ[-1]))
            rows.append([r] + list(cfg_out.counts)
                        + [cfg_out.absorbed_left, cfg_out.absorbed_right])
        header = (["replica"] + [f"site_{i}" for i in range(1, spec.n_sites + 1)]
                  + ["absorbed_left", "absorbed_right"])
        echo = rows[0][1:1 + spec.n_sites] == list(eta0.counts) if t == 0.0 else True
        expected_counts = list(eta0.counts)
        if negative_control:
            expected_counts[0] += 1
            echo = rows[0][1:1 + spec.n_sites] == expected_counts if t == 0.0 else False
    else:
        eta0 = ContinuumConfiguration(tuple(model.get("initial", [0.3, 0.7])))
        cfgk = HeatKernelConfig()
        lam_total = interval.total_intensity(t, p, cfgk) if t > 0 else 0.0
        for r in range(n):
            g = eta0 if t == 0.0 else interval.sample_bdbg(eta0, t, p, rng, cfgk,
                                                           lam_total=lam_total,
                                                           stats=res.stats)
            rows.append([r, len(g.positions),
                         ";".join(f"{x:.17g}" for x in g.positions),
                         g.absorbed_left, g.absorbed_right])
        header = ["replica", "n_points", "positions", "absorbed_left", "absorbed_right"]
        echo = (rows[0][2] == ";".join(f"{x:.17g}" for x in eta0.positions)
                if t == 0.0 else True)
        if negative_control:
            echo = False if t == 0.0 else False
    res.tables["samples"] = (header, rows)
    res.checks.append(CheckReport(
        name="simulate.echo_at_t0" if t == 0.0 else "simulate.ran",
        observed=float(echo), expected=1.0, stderr=0.0, z_score=0.0,
        passed=bool(echo), n_samples=n, seed=seed, mode="deterministic"))
    return res


SUITES = {
    "kernel-check": suite_kernel_check,
    "duality-discrete": suite_duality_discrete,
    "duality-continuum": suite_duality_continuum,
    "equivalence": suite_equivalence,
    "stationary": suite_stationary,
    "doob": suite_doob,
    "scaling": suite_scaling,
    "orthogonality": suite_orthogonality,
    "ck-check": suite_ck_check,
    "simulate": suite_simulate,
}


def run_suite(kind: str, model: dict, mc: dict, tolerances: dict,
              negative_control: bool = False, threads: int = 1) -> SuiteResult:
    if kind not in SUITES:
        raise ValidationError(f"unknown experiment kind {kind!r}")
    return SUITES[kind](model, mc, tolerances,
                        negative_control=negative_control, threads=threads)
