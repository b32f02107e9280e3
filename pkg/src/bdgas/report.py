"""Machine-readable outputs: one JSON report per run plus CSV dumps.

Result files are byte-identical for identical (config, seed); the wall
clock appears only in the metadata block.  CSV uses RFC-4180 quoting,
'.' decimal separator, LF line endings and 17-significant-digit floats.
"""

from __future__ import annotations

import csv
import datetime
import io
import json
import os
from typing import Sequence

import numpy as np

from . import __version__
from .estimators import CheckReport


def _sanitize(obj):
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (np.floating,)):
        return _sanitize(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (bool, int, str)) or obj is None:
        return obj
    if isinstance(obj, float):
        if obj != obj:          # NaN
            return None
        if obj == float("inf"):
            return 1e308
        if obj == float("-inf"):
            return -1e308
        return obj
    return str(obj)


def format_float(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path: str, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
    writer.writerow(list(header))
    for row in rows:
        writer.writerow([format_float(v) for v in row])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def checks_table(checks: Sequence[CheckReport]) -> tuple[list[str], list[list]]:
    header = ["name", "observed", "expected", "stderr", "z_score", "pass",
              "mode", "tolerance", "n_samples", "seed"]
    rows = [[c.name, c.observed, c.expected, c.stderr, c.z_score,
             int(c.passed), c.mode, c.tolerance, c.n_samples, c.seed]
            for c in checks]
    return header, rows


def write_report(out_dir: str, config: dict, checks: Sequence[CheckReport],
                 verdict: dict, tables: dict, extras: dict,
                 sampler_stats: dict) -> str:
    os.makedirs(out_dir, exist_ok=True)
    report = {
        "schema_version": 1,
        "metadata": {
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "library_version": __version__,
            "sampler": _sanitize(sampler_stats),
        },
        "config": _sanitize(config),
        "checks": [_sanitize(c.to_dict()) for c in checks],
        "suite": _sanitize(verdict),
        "extras": _sanitize(extras),
    }
    path = os.path.join(out_dir, "report.json")
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    header, rows = checks_table(checks)
    write_csv(os.path.join(out_dir, "checks.csv"), header, rows)
    for name, (table_header, table_rows) in tables.items():
        write_csv(os.path.join(out_dir, f"{name}.csv"), table_header, table_rows)
    return path
