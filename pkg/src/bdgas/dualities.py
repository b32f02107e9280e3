"""Duality functions and factorial-measure functionals.

Classical falling-factorial dualities, their reservoir-weighted form,
Charlier polynomials and the orthogonal dualities built from them, and
exact evaluation of (deformed) factorial measures against test
functions.  Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

from .core import (ContinuumConfiguration, DiscreteConfiguration,
                   ReservoirParams, ValidationError)

# Exact enumeration refuses beyond this many tuple terms rather than
# silently subsampling: exactness is the point of the dual side.
ENUMERATION_CAP = 10**7


def falling_factorial(n: int, k: int) -> int:
    """(n)_k = n!/(n-k)! for k <= n, else 0.  Exact integer."""
    if k < 0 or n < 0:
        raise ValidationError("falling_factorial needs non-negative arguments")
    if k > n:
        return 0
    out = 1
    for j in range(k):
        out *= n - j
    return out


def _check_same_chain(xi: DiscreteConfiguration, eta: DiscreteConfiguration) -> None:
    if xi.n_sites != eta.n_sites:
        raise ValidationError(
            f"chain length mismatch: dual has {xi.n_sites} sites, "
            f"configuration has {eta.n_sites}")


def classical_duality(xi: DiscreteConfiguration, eta: DiscreteConfiguration) -> int:
    """Product over interior sites of falling factorials d(xi(i), eta(i))."""
    _check_same_chain(xi, eta)
    out = 1
    for k, n in zip(xi.counts, eta.counts):
        if k == 0:
            continue
        out *= falling_factorial(n, k)
        if out == 0:
            return 0
    return out


def reservoir_duality(xi: DiscreteConfiguration, eta: DiscreteConfiguration,
                      p: ReservoirParams) -> float:
    """Classical duality weighted by the reservoir intensities raised to
    the dual's absorbed tallies."""
    d = classical_duality(xi, eta)
    if d == 0:
        return 0.0
    return (p.lambda_left ** xi.absorbed_left
            * p.lambda_right ** xi.absorbed_right * d)


def charlier(k: int, n: int, theta: float) -> float:
    """Charlier polynomial C_k(n, theta) = sum_l binom(k,l) (-theta)^(k-l) (n)_l.

    Falling factorials are kept exact (Python integers) and only the
    final terms are evaluated in floating point.
    """
    if k < 0 or n < 0:
        raise ValidationError("charlier needs non-negative integer arguments")
    if theta <= 0:
        raise ValidationError("charlier needs theta > 0")
    total = 0.0
    for ell in range(k + 1):
        total += math.comb(k, ell) * (-theta) ** (k - ell) * float(falling_factorial(n, ell))
    return total


def orthogonal_duality(xi: DiscreteConfiguration, eta: DiscreteConfiguration,
                       theta: float) -> float:
    """Product over interior sites of Charlier polynomials C_{xi(i)}(eta(i), theta)."""
    _check_same_chain(xi, eta)
    out = 1.0
    for k, n in zip(xi.counts, eta.counts):
        if k == 0:
            continue
        out *= charlier(k, n, theta)
    return out


def orthogonal_reservoir_duality(xi: DiscreteConfiguration,
                                 eta: DiscreteConfiguration,
                                 p: ReservoirParams) -> float:
    """Orthogonal duality weighted by (lambda - theta) factors at the
    absorbed tallies."""
    theta = p.require_theta()
    return ((p.lambda_left - theta) ** xi.absorbed_left
            * (p.lambda_right - theta) ** xi.absorbed_right
            * orthogonal_duality(xi, eta, theta))


Configuration = Union[DiscreteConfiguration, ContinuumConfiguration]


def _particle_list(eta: Configuration) -> list:
    """Particles of a configuration as a flat list of points (site index
    for the chain, position for the continuum)."""
    if isinstance(eta, DiscreteConfiguration):
        pts: list = []
        for site, c in enumerate(eta.counts, start=1):
            pts.extend([site] * c)
        return pts
    return list(eta.positions)


def factorial_functional(eta: Configuration, n: int,
                         f: Callable[..., float],
                         cap: int = ENUMERATION_CAP) -> float:
    """Integral of f against the n-th factorial measure of eta.

    Sums f over all ordered n-tuples of distinct particles; the sum has
    (mass)_n terms and the operation refuses rather than subsampling
    when that exceeds ``cap``.
    """
    if n < 1:
        raise ValidationError("n must be a positive integer")
    pts = _particle_list(eta)
    m = len(pts)
    n_terms = falling_factorial(m, n)
    if n_terms == 0:
        return 0.0
    if n_terms > cap:
        raise ValidationError(
            f"exact enumeration needs {n_terms} terms (cap {cap}); "
            "use the Monte Carlo path instead")
    total = 0.0
    for tup in itertools.permutations(range(m), n):
        total += f(*(pts[i] for i in tup))
    return total


@dataclass(frozen=True)
class Block:
    """One factor of a product-indicator test function: a set with a
    multiplicity.  ``region`` is an open interval (a, b) on the
    continuum or a tuple of sites on the chain; the reference mass is
    Lebesgue resp. counting measure."""

    region: tuple
    multiplicity: int = 1
    kind: str = "interval"

    def mass(self) -> float:
        if self.kind == "interval":
            a, b = self.region
            return b - a
        return float(len(self.region))

    def occupancy(self, eta: Configuration) -> int:
        if self.kind == "interval":
            a, b = self.region
            return sum(1 for x in _particle_list(eta) if a < x < b)
        return sum(eta.counts[s - 1] for s in self.region)

    def contains(self, point) -> bool:
        if self.kind == "interval":
            a, b = self.region
            return a < point < b
        return point in self.region


def interval_block(a: float, b: float, multiplicity: int = 1) -> Block:
    if not a < b:
        raise ValidationError("interval block needs a < b")
    return Block((float(a), float(b)), multiplicity, "interval")


def site_block(sites: Sequence[int], multiplicity: int = 1) -> Block:
    return Block(tuple(sorted(set(int(s) for s in sites))), multiplicity, "sites")


def _check_disjoint(blocks: Sequence[Block]) -> None:
    if len(blocks) == 0:
        raise ValidationError("need at least one block")
    kinds = {b.kind for b in blocks}
    if len(kinds) > 1:
        raise ValidationError("blocks must all be intervals or all site sets")
    if blocks[0].kind == "interval":
        spans = sorted(b.region for b in blocks)
        for (a1, b1), (a2, b2) in zip(spans, spans[1:]):
            if a2 < b1:
                raise ValidationError(f"overlapping intervals {(a1,b1)} and {(a2,b2)}")
    else:
        seen: set = set()
        for b in blocks:
            if seen & set(b.region):
                raise ValidationError("overlapping site blocks")
            seen |= set(b.region)


def theta_factorial_functional(eta: Configuration, blocks: Sequence[Block],
                               theta: float, method: str = "charlier",
                               cap: int = ENUMERATION_CAP) -> float:
    """Integral of a product indicator against the theta-deformed
    factorial measure of eta.

    The test function is prod_l 1_{B_l}^(x d_l) over disjoint blocks with
    multiplicities d_l summing to n.  Two independent evaluation routes:

    * ``charlier``: prod_l C_{d_l}(eta(B_l), theta * m(B_l));
    * ``subset``: the defining alternating sum over subsets I of [n],
      with the factorial measure of each sub-indicator enumerated by
      :func:`factorial_functional`.

    Both agree identically; the subset route exists as the oracle.
    """
    if theta < 0:
        raise ValidationError("theta must be non-negative")
    _check_disjoint(blocks)
    n = sum(b.multiplicity for b in blocks)
    if theta == 0.0 and method == "charlier":
        # deformation vanishes: only the full subset survives
        return _blockwise_factorial(eta, blocks)
    if method == "charlier":
        out = 1.0
        for b in blocks:
            out *= charlier(b.multiplicity, b.occupancy(eta), theta * b.mass())
        return out
    if method != "subset":
        raise ValidationError(f"unknown method {method!r}")
    # positions 1..n carry the block of their slot
    slot_blocks: list[Block] = []
    for b in blocks:
        slot_blocks.extend([b] * b.multiplicity)
    total = 0.0
    for keep in itertools.product((False, True), repeat=n):
        kept = [slot_blocks[j] for j in range(n) if keep[j]]
        dropped = [slot_blocks[j] for j in range(n) if not keep[j]]
        meas = 1.0
        for b in dropped:
            meas *= b.mass()
        if kept:
            indic = _product_indicator(kept)
            fac = factorial_functional(eta, len(kept), indic, cap=cap)
        else:
            fac = 1.0
        total += (-theta) ** len(dropped) * meas * fac
    return total


def _product_indicator(blocks_in_order: Sequence[Block]) -> Callable[..., float]:
    def f(*pts) -> float:
        for b, x in zip(blocks_in_order, pts):
            if not b.contains(x):
                return 0.0
        return 1.0
    return f


def _blockwise_factorial(eta: Configuration, blocks: Sequence[Block]) -> float:
    """Undeformed factorial functional of the block product indicator:
    distinct particles across disjoint blocks factorize into per-block
    falling factorials."""
    out = 1.0
    for b in blocks:
        out *= falling_factorial(b.occupancy(eta), b.multiplicity)
    return out
