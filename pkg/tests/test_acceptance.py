"""Acceptance gate: one test per criterion, each printed as a pass/fail
line with its binding tolerance.  Sample counts and tolerances are fixed
here, not calibrated at runtime.
"""

import time

import numpy as np

from bdgas import estimators, interval, quadrature
from bdgas.chain import ChainSpec, transition_table, verify_intensity_semigroup
from bdgas.cli import main
from bdgas.core import ReservoirParams
from bdgas.interval import HeatKernelConfig
from bdgas.rng import stream_generator
from bdgas.suites import run_suite

P12 = ReservoirParams(1.0, 2.0)
CFG = HeatKernelConfig()
MC_N = 100_000
STREAMS = 8


def _report(num: int, name: str, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    print(f"\nACCEPTANCE {num} [{name}]: {status} ({detail})")


def test_criterion_1_kernel_identities():
    t0 = time.time()
    worst_sym = worst_row = worst_ck = 0.0
    rng = stream_generator(101, 0)
    for n_sites in (4, 11, 23, 32):
        spec = ChainSpec(n_sites, P12)
        t = float(rng.uniform(0.1, 5.0))
        s = float(rng.uniform(0.1, 5.0))
        tab_t = transition_table(spec, t)
        tab_s = transition_table(spec, s)
        tab_ts = transition_table(spec, t + s)
        worst_row = max(worst_row, float(np.max(np.abs(tab_t.matrix.sum(axis=1) - 1))))
        worst_sym = max(worst_sym, float(np.max(np.abs(tab_t.interior() - tab_t.interior().T))))
        worst_ck = max(worst_ck, float(np.max(np.abs(
            tab_ts.matrix - tab_s.matrix @ tab_t.matrix))))
    worst_cons = worst_ck_c = 0.0
    for _ in range(6):
        x = float(rng.uniform(0.05, 0.95))
        t = float(rng.uniform(0.02, 2.0))
        split = interval.absorption_split(x, t, CFG)
        integ = quadrature.adaptive(lambda ys: interval.density_array(x, ys, t, CFG)[0],
                                    0.0, 1.0, 1e-10)
        worst_cons = max(worst_cons, abs(integ + split.q0 + split.q1 - 1.0))
    for _ in range(3):
        x = float(rng.uniform(0.1, 0.9))
        y = float(rng.uniform(0.1, 0.9))
        s = float(rng.uniform(0.03, 0.6))
        t = float(rng.uniform(0.03, 0.6))
        conv = quadrature.adaptive(
            lambda us: interval.density_array(x, us, s, CFG)[0]
            * interval.density_array(y, us, t, CFG)[0], 0.0, 1.0, 1e-10)
        worst_ck_c = max(worst_ck_c, abs(conv - interval.abs_density(x, y, s + t, CFG).value))
    passed = (worst_sym <= 1e-9 and worst_row <= 1e-9 and worst_ck <= 1e-9
              and worst_cons <= 1e-8 and worst_ck_c <= 1e-7)
    _report(1, "kernel identities", passed,
            f"sym={worst_sym:.2e} rows={worst_row:.2e} ck={worst_ck:.2e} "
            f"cons={worst_cons:.2e} ck_cont={worst_ck_c:.2e} "
            f"runtime={time.time() - t0:.1f}s")
    assert worst_sym <= 1e-9
    assert worst_row <= 1e-9
    assert worst_ck <= 1e-9
    assert worst_cons <= 1e-8
    assert worst_ck_c <= 1e-7
    assert time.time() - t0 < 30


def test_criterion_2_intensity_semigroup():
    t0 = time.time()
    worst_d = 0.0
    for n_sites, s, t in [(4, 0.5, 0.5), (9, 0.3, 1.1), (16, 0.8, 0.4)]:
        worst_d = max(worst_d, verify_intensity_semigroup(
            ChainSpec(n_sites, P12), s, t))
    worst_c = estimators.ck_residual_continuum(0.3, 0.25, P12, CFG, n_grid=7)
    passed = worst_d <= 1e-10 and worst_c <= 1e-6
    _report(2, "intensity semigroup", passed,
            f"discrete={worst_d:.2e} continuum={worst_c:.2e} "
            f"runtime={time.time() - t0:.1f}s")
    assert worst_d <= 1e-10
    assert worst_c <= 1e-6
    assert time.time() - t0 < 30


def test_criterion_3_discrete_duality():
    t0 = time.time()
    res = run_suite("duality-discrete",
                    {"n_sites": 5, "lambda_left": 1.0, "lambda_right": 2.0,
                     "times": [0.3, 0.7, 2.0], "initial": [3, 1, 0, 2, 1],
                     "max_dual": 3, "max_support": 2, "max_tally": 1},
                    {"n_samples": MC_N, "seed": 2026, "streams": STREAMS,
                     "z_max": 3.0}, {})
    verdict = res.verdict()
    elapsed = time.time() - t0
    _report(3, "discrete duality", verdict["bonferroni_pass"],
            f"{verdict['n_checks']} checks, {verdict['individual_failures']} "
            f"individual 3-sigma exceedances, family z "
            f"{verdict['bonferroni_z']:.2f}, runtime={elapsed:.0f}s")
    assert verdict["bonferroni_pass"]
    assert elapsed < 300


def test_criterion_4_equivalence():
    t0 = time.time()
    res = run_suite("equivalence",
                    {"n_sites": 5, "lambda_left": 1.0, "lambda_right": 2.0,
                     "times": [0.4, 1.1], "initial": [3, 1, 0, 2, 1],
                     "max_dual": 3, "max_support": 2, "max_tally": 1},
                    {"n_samples": MC_N, "seed": 2027, "streams": STREAMS,
                     "z_max": 3.0}, {})
    verdict = res.verdict()
    elapsed = time.time() - t0
    _report(4, "equivalence of constructions", verdict["bonferroni_pass"],
            f"{verdict['n_checks']} checks, {verdict['individual_failures']} "
            f"individual exceedances, runtime={elapsed:.0f}s")
    assert verdict["bonferroni_pass"]
    assert elapsed < 300


def test_criterion_5_continuum_duality():
    t0 = time.time()
    res = run_suite("duality-continuum",
                    {"lambda_left": 1.0, "lambda_right": 2.0,
                     "times": [0.1, 0.5], "initials": [[], [0.3], [0.3, 0.7]],
                     "boxes": [[0.2, 0.4], [0.6, 0.9]]},
                    {"n_samples": MC_N, "seed": 2028, "streams": STREAMS,
                     "z_max": 3.0}, {})
    verdict = res.verdict()
    elapsed = time.time() - t0
    _report(5, "continuum duality", verdict["bonferroni_pass"],
            f"{verdict['n_checks']} checks, {verdict['individual_failures']} "
            f"individual exceedances, runtime={elapsed:.0f}s")
    assert verdict["bonferroni_pass"]
    assert elapsed < 600


def test_criterion_6_stationarity():
    t0 = time.time()
    res = run_suite("stationary",
                    {"lambda_left": 1.0, "lambda_right": 2.0, "t": 1.0,
                     "bins": [[0.0, 0.25], [0.25, 0.5], [0.5, 0.75], [0.75, 1.0]],
                     "fixed_initial": [0.2, 0.5, 0.8],
                     "trend_times": [0.5, 1.0, 2.0, 4.0]},
                    {"n_samples": MC_N, "seed": 2029, "streams": STREAMS,
                     "z_max": 3.0},
                    {"final_relative": 0.02})
    verdict = res.verdict()
    trend = res.extras["trend"]
    elapsed = time.time() - t0
    _report(6, "stationarity and relaxation",
            verdict["bonferroni_pass"] and trend["pass"],
            f"{verdict['n_checks']} checks, trend {trend['values'][-1]:.2e} "
            f"at t=4 (<=2%), runtime={elapsed:.0f}s")
    assert verdict["bonferroni_pass"]
    assert trend["pass"]
    assert all(b >= a for a, b in zip(trend["values"][1:], trend["values"][:-1]))
    assert trend["values"][-1] <= 0.02
    assert elapsed < 600


def test_criterion_7_doob_equilibrium():
    t0 = time.time()
    res = run_suite("doob", {"theta": 1.5, "n_sites": 4, "t": 1.0},
                    {"n_samples": MC_N, "seed": 2030, "streams": STREAMS,
                     "z_max": 3.0}, {})
    verdict = res.verdict()
    elapsed = time.time() - t0
    _report(7, "Doob equilibrium reversibility", verdict["bonferroni_pass"],
            f"{verdict['n_checks']} checks, {verdict['individual_failures']} "
            f"individual exceedances, runtime={elapsed:.0f}s")
    assert verdict["bonferroni_pass"]
    assert elapsed < 120


def test_criterion_8_scaling_limit():
    t0 = time.time()
    res = run_suite("scaling",
                    {"n_list": [32, 64, 128], "t": 0.5, "lambda_left": 1.0,
                     "lambda_right": 2.0, "initial_fraction": 0.5},
                    {"n_samples": 200_000, "seed": 2031, "streams": STREAMS,
                     "z_max": 3.0},
                    {"intensity_final": 0.02})
    verdict = res.verdict()
    errors = res.extras["intensity_trend"]["values"]
    elapsed = time.time() - t0
    _report(8, "diffusive scaling limit", verdict["bonferroni_pass"],
            f"intensity errors {['%.3e' % e for e in errors]}, "
            f"moment trend pass={res.extras['moment_trend']['pass']}, "
            f"runtime={elapsed:.0f}s")
    assert verdict["bonferroni_pass"]
    assert errors == sorted(errors, reverse=True)
    assert errors[-1] <= 0.02
    assert res.extras["moment_trend"]["pass"]
    assert elapsed < 600


def test_criterion_9_orthogonality():
    t0 = time.time()
    res = run_suite("orthogonality",
                    {"theta": 1.3, "t": 0.6, "subset_sites": 3},
                    {"n_samples": MC_N, "seed": 2032, "streams": STREAMS,
                     "z_max": 3.0},
                    {"subset_expansion": 1e-9})
    verdict = res.verdict()
    elapsed = time.time() - t0
    _report(9, "orthogonal dualities", verdict["bonferroni_pass"],
            f"{verdict['n_checks']} checks, {verdict['individual_failures']} "
            f"individual exceedances, runtime={elapsed:.0f}s")
    assert verdict["bonferroni_pass"]
    assert elapsed < 300


def test_criterion_10_negative_controls(tmp_path):
    t0 = time.time()
    import json
    kinds = ["kernel-check", "duality-discrete", "duality-continuum",
             "equivalence", "stationary", "doob", "scaling", "orthogonality",
             "ck-check", "simulate"]
    small = {"n_samples": 2500, "seed": 99, "streams": 4}
    models = {"simulate": {"target": "reservoir", "t": 0.0, "n_sites": 3,
                           "initial": [1, 0, 1]},
              "duality-discrete": {"times": [0.4]},
              "equivalence": {"times": [0.4]},
              "scaling": {"n_list": [16, 32]},
              "stationary": {"trend_times": [0.5, 1.0]}}
    exit_codes = {}
    for kind in kinds:
        cfg = {"schema_version": 1, "kind": kind,
               "model": models.get(kind, {}), "mc": small}
        path = tmp_path / f"{kind}.json"
        path.write_text(json.dumps(cfg))
        code = main(["run", "--config", str(path),
                     "--out", str(tmp_path / f"out_{kind}"),
                     "--negative-control"])
        exit_codes[kind] = code
    passed = all(code == 1 for code in exit_codes.values())
    elapsed = time.time() - t0
    _report(10, "negative controls", passed,
            f"exit codes {exit_codes}, runtime={elapsed:.0f}s")
    assert passed, exit_codes
    assert elapsed < 120
