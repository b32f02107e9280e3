"""Adaptive Gauss-Legendre quadrature on fixed 64-node panels.

A panel is accepted when its estimate agrees with the sum of its two
halves within the requested tolerance, otherwise it is bisected.
Integrands receive numpy arrays of nodes.
"""

from __future__ import annotations

import numpy as np

_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(64)


def panel(f, a: float, b: float) -> float:
    """64-node Gauss-Legendre estimate on [a, b]."""
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    x = mid + half * _NODES
    return float(half * np.dot(_WEIGHTS, np.asarray(f(x), dtype=float)))


def adaptive(f, a: float, b: float, tol: float = 1e-10,
             max_depth: int = 40) -> float:
    """Integral of f over [a, b] by bisection until panel estimates agree."""
    if not b > a:
        raise ValueError("need a < b")

    def recurse(lo: float, hi: float, whole: float, tol_here: float, depth: int) -> float:
        mid = 0.5 * (lo + hi)
        left = panel(f, lo, mid)
        right = panel(f, mid, hi)
        if abs(left + right - whole) <= tol_here or depth >= max_depth:
            return left + right
        return (recurse(lo, mid, left, 0.5 * tol_here, depth + 1)
                + recurse(mid, hi, right, 0.5 * tol_here, depth + 1))

    return recurse(a, b, panel(f, a, b), tol, 0)
