"""Figure rendering for run reports and profile dumps.

Every run writes its figures next to the delimited output, under
``figures/``.  The Agg backend keeps this headless; PNG metadata is
pinned so reruns produce identical bytes.
"""

from __future__ import annotations

import os
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .estimators import CheckReport

_PNG_META = {"Software": None}


def _save(fig, path: str) -> None:
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)


def zscore_figure(checks: Sequence[CheckReport], path: str,
                  z_max: float = 3.0) -> None:
    """Scatter of check z-scores with the acceptance band."""
    stoch = [c for c in checks if c.mode == "stochastic" and c.stderr > 0]
    fig, ax = plt.subplots(figsize=(8, 3.2))
    if stoch:
        z = np.array([c.z_score for c in stoch])
        idx = np.arange(len(z))
        colors = np.where(np.abs(z) <= z_max, "tab:blue", "tab:red")
        ax.scatter(idx, z, s=12, c=colors)
        ax.axhline(z_max, color="gray", lw=0.8, ls="--")
        ax.axhline(-z_max, color="gray", lw=0.8, ls="--")
        ax.set_xlabel("check index")
        ax.set_ylabel("z score")
    else:
        ax.text(0.5, 0.5, "no stochastic checks", ha="center", va="center")
    ax.set_title("Monte Carlo checks vs dual-side references")
    fig.tight_layout()
    _save(fig, path)


def observed_expected_figure(checks: Sequence[CheckReport], path: str) -> None:
    fig, ax = plt.subplots(figsize=(4.2, 4.2))
    obs = [c.observed for c in checks]
    exp = [c.expected for c in checks]
    ax.scatter(exp, obs, s=10, alpha=0.6)
    lo = min(exp + obs, default=0.0)
    hi = max(exp + obs, default=1.0)
    ax.plot([lo, hi], [lo, hi], color="gray", lw=0.8)
    ax.set_xlabel("expected (dual side)")
    ax.set_ylabel("observed (Monte Carlo)")
    ax.set_title("two-sided agreement")
    fig.tight_layout()
    _save(fig, path)


def decay_figure(xs: Sequence[float], ys: Sequence[float], path: str,
                 xlabel: str, ylabel: str, title: str,
                 loglog: bool = True) -> None:
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    if loglog and all(v > 0 for v in ys):
        ax.loglog(xs, ys, marker="o")
    else:
        ax.plot(xs, ys, marker="o")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)


def profile_figure(xs: np.ndarray, ys: np.ndarray, path: str,
                   ylabel: str, title: str) -> None:
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    ax.plot(xs, ys)
    ax.set_xlabel("x")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)


def render_run_figures(out_dir: str, kind: str, checks: Sequence[CheckReport],
                       tables: dict, z_max: float = 3.0) -> list[str]:
    """Standard figures for a run: z-score panel, observed-vs-expected
    scatter, and any per-suite decay curves present in the tables."""
    fig_dir = os.path.join(out_dir, "figures")
    os.makedirs(fig_dir, exist_ok=True)
    written = []
    path = os.path.join(fig_dir, "zscores.png")
    zscore_figure(checks, path, z_max)
    written.append(path)
    stoch = [c for c in checks if c.mode == "stochastic" and c.stderr > 0]
    if stoch:
        path = os.path.join(fig_dir, "observed_vs_expected.png")
        observed_expected_figure(stoch, path)
        written.append(path)
    if "scaling_intensity" in tables:
        header, rows = tables["scaling_intensity"]
        path = os.path.join(fig_dir, "scaling_intensity.png")
        decay_figure([r[0] for r in rows], [r[1] for r in rows], path,
                     "N", "sup relative error", "intensity convergence")
        written.append(path)
    if "stationary_trend" in tables:
        header, rows = tables["stationary_trend"]
        path = os.path.join(fig_dir, "relaxation.png")
        decay_figure([r[0] for r in rows], [r[1] for r in rows], path,
                     "t", "max relative discrepancy",
                     "relaxation to the stationary profile", loglog=False)
        written.append(path)
    return written
