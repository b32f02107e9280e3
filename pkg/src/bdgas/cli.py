"""Batch experiment runner.

``bdgas run --config cfg.json --out dir`` executes one experiment suite
and writes a JSON report, CSV dumps and figures; exit status 0 means
every check passed (family-wise verdict), 1 means a check failed, 2
means the config or the run itself was broken.  ``bdgas profile`` dumps
plot-ready profile data (with a rendered figure) without running any
checks.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import figures, interval, report
from .chain import ChainSpec, chain_intensity, stationary_profile
from .core import ReservoirParams, ValidationError
from .interval import HeatKernelConfig
from .suites import KINDS, run_suite


class ConfigError(ValueError):
    pass


_MC_KEYS = {"n_samples", "seed", "streams", "z_max"}
_TOL_KEYS = {"symmetry", "row_sum", "ck_discrete", "semigroup_discrete",
             "conservation", "ck_continuum", "semigroup_continuum",
             "final_relative", "intensity_final", "subset_expansion",
             "fixed_point"}
_MODEL_KEYS = {
    "kernel-check": {"n_sites_list", "lambda_left", "lambda_right", "theta",
                     "continuum_points", "continuum_ck_points"},
    "duality-discrete": {"n_sites", "lambda_left", "lambda_right", "theta",
                         "times", "initial", "max_dual", "max_support",
                         "max_tally"},
    "duality-continuum": {"lambda_left", "lambda_right", "theta", "times",
                          "initials", "boxes"},
    "equivalence": {"n_sites", "lambda_left", "lambda_right", "theta",
                    "times", "initial", "max_dual", "max_support", "max_tally"},
    "stationary": {"lambda_left", "lambda_right", "theta", "t", "bins",
                   "fixed_initial", "trend_times"},
    "doob": {"theta", "n_sites", "t"},
    "scaling": {"lambda_left", "lambda_right", "theta", "t", "n_list", "bins",
                "initial_fraction"},
    "orthogonality": {"theta", "lambda_left", "lambda_right", "t", "box1",
                      "box2", "subset_sites"},
    "ck-check": {"n_sites", "lambda_left", "lambda_right", "theta", "s", "t",
                 "initial"},
    "simulate": {"target", "n_sites", "lambda_left", "lambda_right", "theta",
                 "t", "initial"},
}


def _reject_unknown(block: dict, allowed: set, path: str) -> None:
    for key in block:
        if key not in allowed:
            raise ConfigError(f"unknown key '{path}.{key}' "
                              f"(allowed: {', '.join(sorted(allowed))})")


def validate_config(cfg: dict) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    _reject_unknown(cfg, {"schema_version", "kind", "model", "mc",
                          "tolerances", "negative_control"}, "config")
    if cfg.get("schema_version") != 1:
        raise ConfigError("config.schema_version must be 1")
    kind = cfg.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"config.kind must be one of {', '.join(KINDS)}")
    model = cfg.get("model", {})
    if not isinstance(model, dict):
        raise ConfigError("config.model must be an object")
    _reject_unknown(model, _MODEL_KEYS[kind], "config.model")
    mc = cfg.get("mc", {})
    if not isinstance(mc, dict):
        raise ConfigError("config.mc must be an object")
    _reject_unknown(mc, _MC_KEYS, "config.mc")
    tol = cfg.get("tolerances", {})
    if not isinstance(tol, dict):
        raise ConfigError("config.tolerances must be an object")
    _reject_unknown(tol, _TOL_KEYS, "config.tolerances")
    if not isinstance(cfg.get("negative_control", False), bool):
        raise ConfigError("config.negative_control must be a boolean")
    return {"schema_version": 1, "kind": kind, "model": model, "mc": dict(mc),
            "tolerances": dict(tol),
            "negative_control": cfg.get("negative_control", False)}


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such config file")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}")
    return validate_config(raw)


def run_command(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg["mc"]["seed"] = args.seed
    cfg["mc"].setdefault("seed", 0)
    if args.negative_control:
        cfg["negative_control"] = True
    try:
        result = run_suite(cfg["kind"], cfg["model"], cfg["mc"],
                           cfg["tolerances"],
                           negative_control=cfg["negative_control"],
                           threads=args.threads)
        verdict = result.verdict()
        report.write_report(args.out, cfg, result.checks, verdict,
                            result.tables, result.extras, result.stats)
        figures.render_run_figures(args.out, cfg["kind"], result.checks,
                                   result.tables,
                                   cfg["mc"].get("z_max", 3.0))
    except (ValidationError, ConfigError) as exc:
        print(f"run error: {exc}", file=sys.stderr)
        return 2
    n_fail = verdict["individual_failures"]
    status = "PASS" if verdict["bonferroni_pass"] else "FAIL"
    print(f"{cfg['kind']}: {status} "
          f"({verdict['n_checks']} checks, {n_fail} individual failures, "
          f"family-wise z threshold {verdict['bonferroni_z']:.2f})")
    return 0 if verdict["bonferroni_pass"] else 1


def emit_profile(kind: str, grid: np.ndarray, params: dict, out_dir: str) -> str:
    """Write one profile CSV (and its figure) for plotting."""
    os.makedirs(out_dir, exist_ok=True)
    p = ReservoirParams(params.get("lambda_left", 1.0),
                        params.get("lambda_right", 2.0))
    cfg = HeatKernelConfig()
    if grid.size == 0:
        raise ValidationError("profile grid must be nonempty")
    if kind == "intensity":
        t = params.get("t", 1.0)
        values = (interval.gas_intensity_array(grid, t, p, cfg)
                  if t > 0 else np.zeros_like(grid))
        header, label = ["x", "intensity"], f"injection intensity at t={t}"
    elif kind == "stationary":
        values = np.asarray(interval.stationary_intensity(grid, p))
        header, label = ["x", "intensity"], "stationary intensity"
    elif kind == "kernel":
        t = params.get("t", 0.5)
        x = params.get("x", 0.5)
        values = interval.density_array(x, grid, t, cfg)[0]
        header, label = ["y", "density"], f"absorbed kernel from x={x} at t={t}"
    elif kind == "chain-intensity":
        t = params.get("t", 1.0)
        spec = ChainSpec(int(params.get("n_sites", 8)), p)
        grid = np.arange(1, spec.n_sites + 1, dtype=float)
        values = chain_intensity(spec, t)
        header, label = ["site", "intensity"], f"chain intensity at t={t}"
    elif kind == "chain-stationary":
        spec = ChainSpec(int(params.get("n_sites", 8)), p)
        grid = np.arange(1, spec.n_sites + 1, dtype=float)
        values = stationary_profile(spec)
        header, label = ["site", "intensity"], "chain stationary profile"
    else:
        raise ValidationError(f"unknown profile kind {kind!r}")
    path = os.path.join(out_dir, f"profile_{kind.replace('-', '_')}.csv")
    report.write_csv(path, header, list(zip(grid.tolist(), values.tolist())))
    figures.profile_figure(grid, values,
                           os.path.join(out_dir, f"profile_{kind.replace('-', '_')}.png"),
                           header[1], label)
    return path


def profile_command(args) -> int:
    params = {"lambda_left": args.lambda_left, "lambda_right": args.lambda_right,
              "t": args.time, "x": args.x, "n_sites": args.n_sites}
    grid = np.linspace(0.0, 1.0, args.points + 2)[1:-1]
    try:
        path = emit_profile(args.kind, grid, params, args.out)
    except (ValidationError, ValueError) as exc:
        print(f"profile error: {exc}", file=sys.stderr)
        return 2
    print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bdgas",
        description="boundary driven gas simulators and verification suites")
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run one experiment suite")
    run_p.add_argument("--config", required=True, help="JSON experiment config")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
    run_p.add_argument("--threads", type=int, default=1,
                       help="worker threads (wall time only, never results)")
    run_p.add_argument("--negative-control", action="store_true",
                       help="run the built-in must-fail corrupted checks")
    run_p.set_defaults(func=run_command)
    prof_p = sub.add_parser("profile", help="dump profile data for plotting")
    prof_p.add_argument("--kind", required=True,
                        choices=["intensity", "stationary", "kernel",
                                 "chain-intensity", "chain-stationary"])
    prof_p.add_argument("--out", required=True)
    prof_p.add_argument("--lambda-left", type=float, default=1.0)
    prof_p.add_argument("--lambda-right", type=float, default=2.0)
    prof_p.add_argument("--time", type=float, default=1.0)
    prof_p.add_argument("--x", type=float, default=0.5)
    prof_p.add_argument("--n-sites", type=int, default=8)
    prof_p.add_argument("--points", type=int, default=99)
    prof_p.set_defaults(func=profile_command)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
