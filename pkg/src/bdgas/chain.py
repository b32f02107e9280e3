"""The open chain {1..N} with absorbing exterior sites {0, N+1}.

Forward side: the reservoir process (bulk jumps at rate 1/2 per edge,
exit rate 1 per particle at each end site, births at rates lambda_L,
lambda_R) simulated exactly event by event.  Dual side: the absorbed
single-particle walk, whose generator is the single-particle part of
the reservoir dynamics -- rate 1/2 across interior edges and rate 1
across the two boundary edges.  That boundary rate is what makes the
reservoir duality hold with weights lambda_L^{xi(0)} lambda_R^{xi(N+1)};
a pure rate-1/2 walk would not be dual to this reservoir process.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DiscreteConfiguration, ReservoirParams, ValidationError

# Uniformized tables are computed directly up to this many expected
# jumps, and by repeated squaring of half-time tables beyond it.
_DIRECT_JUMPS_CAP = 64.0


@dataclass(frozen=True)
class ChainSpec:
    """Chain length and reservoir parameters."""

    n_sites: int
    params: ReservoirParams

    def __post_init__(self):
        if self.n_sites < 1:
            raise ValidationError("need at least one chain site")


def _edge_rates(n_sites: int) -> tuple[list[float], list[float]]:
    """Per-particle jump rates (to the left, to the right) from each
    interior site 1..N; boundary edges carry rate 1, interior edges 1/2."""
    left = [1.0 if i == 1 else 0.5 for i in range(1, n_sites + 1)]
    right = [1.0 if i == n_sites else 0.5 for i in range(1, n_sites + 1)]
    return left, right


def absorbed_generator(n_sites: int) -> np.ndarray:
    """Rate matrix of the absorbed walk on states {0, .., N+1}."""
    n = n_sites
    q = np.zeros((n + 2, n + 2))
    left, right = _edge_rates(n)
    for i in range(1, n + 1):
        q[i, i - 1] = left[i - 1]
        q[i, i + 1] = right[i - 1]
        q[i, i] = -(left[i - 1] + right[i - 1])
    return q


@dataclass(frozen=True)
class TransitionTable:
    """Time-t transition probabilities of the absorbed walk over
    {0,..,N+1}, with the truncation bound of the uniformized series."""

    t: float
    matrix: np.ndarray
    tolerance: float

    def __post_init__(self):
        self.matrix.flags.writeable = False

    @property
    def n_sites(self) -> int:
        return self.matrix.shape[0] - 2

    def interior(self) -> np.ndarray:
        return self.matrix[1:-1, 1:-1]

    def row(self, site: int) -> np.ndarray:
        return self.matrix[site]


def _uniformized(q: np.ndarray, t: float, tol: float) -> tuple[np.ndarray, float]:
    """exp(tQ) by uniformization with Poisson tail truncated below tol.

    Returns the matrix and a bound on the max-norm error.  Large t is
    handled by squaring the half-time table; squaring at most doubles
    the child bound (plus its square), which is folded into the
    reported bound.
    """
    dim = q.shape[0]
    rate = float(np.max(-np.diag(q)))
    if t == 0.0 or rate == 0.0:
        return np.eye(dim), 0.0
    jumps = rate * t
    if jumps > _DIRECT_JUMPS_CAP:
        n_doublings = int(math.ceil(math.log2(jumps / _DIRECT_JUMPS_CAP)))
        child_tol = max(tol / (2.0 ** (n_doublings + 1)), 1e-15)
        m, err = _uniformized(q, t / 2 ** n_doublings, child_tol)
        for _ in range(n_doublings):
            m = m @ m
            err = err * (2.0 + err) + dim * 1e-16
        return m, err
    p_jump = np.eye(dim) + q / rate
    # Poisson(jumps) weights by stable multiplicative recursion in log space
    out = np.zeros_like(q)
    term = np.eye(dim)
    log_w = -jumps
    cum = 0.0
    k = 0
    k_hard_stop = int(jumps + 40.0 * math.sqrt(jumps + 1.0) + 100)
    while True:
        w = math.exp(log_w)
        if w > 0.0:
            out += w * term
        cum += w
        if (1.0 - cum < tol and k >= jumps) or k >= k_hard_stop:
            break
        k += 1
        log_w += math.log(jumps) - math.log(k)
        term = term @ p_jump
    return out, max(1.0 - cum, 0.0)


def transition_table(spec: ChainSpec, t: float, tol: float = 1e-12) -> TransitionTable:
    """Transition probabilities of the absorbed walk at time t."""
    if t < 0:
        raise ValidationError("time must be non-negative")
    if not tol > 0:
        raise ValidationError("tolerance must be positive")
    m, err = _uniformized(absorbed_generator(spec.n_sites), t, tol)
    # absorbing rows are known exactly; truncation must not leak there
    m[0, :] = 0.0
    m[0, 0] = 1.0
    m[-1, :] = 0.0
    m[-1, -1] = 1.0
    return TransitionTable(t=t, matrix=m, tolerance=max(err, tol))


def chain_intensity(spec: ChainSpec, t: float, tol: float = 1e-12,
                    table: TransitionTable | None = None) -> np.ndarray:
    """Injection intensity at time t: lambda_t(i) = lambda_L p_t(i,0)
    + lambda_R p_t(i,N+1), for interior sites i = 1..N."""
    if table is None:
        table = transition_table(spec, t, tol)
    m = table.matrix
    return (spec.params.lambda_left * m[1:-1, 0]
            + spec.params.lambda_right * m[1:-1, -1])


def stationary_profile(spec: ChainSpec) -> np.ndarray:
    """Harmonic profile of the absorbed walk with boundary data
    (lambda_L, lambda_R): h(i) = lambda_L + (lambda_R - lambda_L)(2i-1)/(2N).

    The rate-1 boundary edges put the effective Dirichlet boundary at
    ghost positions 1/2 and N + 1/2, hence the (2i-1)/(2N) interpolation
    (solves the discrete Laplace system of the actual generator).
    """
    n = spec.n_sites
    i = np.arange(1, n + 1, dtype=float)
    lam_l, lam_r = spec.params.lambda_left, spec.params.lambda_right
    return lam_l + (lam_r - lam_l) * (2.0 * i - 1.0) / (2.0 * n)


def verify_intensity_semigroup(spec: ChainSpec, s: float, t: float,
                               tol: float = 1e-13) -> float:
    """Max-norm residual of the identity lambda_s^T P_t = lambda_{t+s}
    - lambda_t over interior sites."""
    lam_s = chain_intensity(spec, s, tol)
    lam_t = chain_intensity(spec, t, tol)
    lam_ts = chain_intensity(spec, t + s, tol)
    p_int = transition_table(spec, t, tol).interior()
    residual = lam_s @ p_int - (lam_ts - lam_t)
    return float(np.max(np.abs(residual)))


class _UniformBuffer:
    """Blocked uniform draws from a Generator; cuts per-event call
    overhead in the event loop without changing the draw sequence."""

    __slots__ = ("_rng", "_buf", "_pos")

    def __init__(self, rng: np.random.Generator, block: int = 8192):
        self._rng = rng
        self._buf = rng.random(block)
        self._pos = 0

    def next(self) -> float:
        buf = self._buf
        pos = self._pos
        if pos >= buf.shape[0]:
            self._buf = buf = self._rng.random(buf.shape[0])
            pos = 0
        self._pos = pos + 1
        return buf[pos]


def simulate_reservoir(eta0: DiscreteConfiguration, t: float, spec: ChainSpec,
                       rng: np.random.Generator) -> DiscreteConfiguration:
    """Exact event-driven simulation of the reservoir process to time t.

    Aggregate event rates are updated incrementally per event;
    exponential clocks come from the supplied stream.  Exited particles
    are tallied (the reservoir process itself lives on the interior).
    """
    if t < 0:
        raise ValidationError("time must be non-negative")
    if eta0.n_sites != spec.n_sites:
        raise ValidationError("configuration does not match chain length")
    n = spec.n_sites
    lam_l = spec.params.lambda_left
    lam_r = spec.params.lambda_right
    left, right = _edge_rates(n)
    per_site = [left[i] + right[i] for i in range(n)]

    counts = list(eta0.counts)
    absorbed_l = eta0.absorbed_left
    absorbed_r = eta0.absorbed_right
    move_rate = sum(c * r for c, r in zip(counts, per_site))
    birth_rate = lam_l + lam_r
    uni = _UniformBuffer(rng)

    now = 0.0
    while True:
        total = move_rate + birth_rate
        if total <= 0.0:
            break
        now -= math.log(1.0 - uni.next()) / total
        if now > t:
            break
        u = uni.next() * total
        if u < birth_rate:
            site = 0 if u < lam_l else n - 1
            counts[site] += 1
            move_rate += per_site[site]
            continue
        u -= birth_rate
        for i in range(n):
            c = counts[i]
            if c == 0:
                continue
            block = c * per_site[i]
            if u >= block:
                u -= block
                continue
            counts[i] = c - 1
            move_rate -= per_site[i]
            if u < c * left[i]:
                if i == 0:
                    absorbed_l += 1
                else:
                    counts[i - 1] += 1
                    move_rate += per_site[i - 1]
            else:
                if i == n - 1:
                    absorbed_r += 1
                else:
                    counts[i + 1] += 1
                    move_rate += per_site[i + 1]
            break
    return DiscreteConfiguration(tuple(counts), absorbed_l, absorbed_r)


def sample_gas_discrete(eta0: DiscreteConfiguration, t: float, spec: ChainSpec,
                        rng: np.random.Generator,
                        table: TransitionTable | None = None,
                        intensity: np.ndarray | None = None) -> DiscreteConfiguration:
    """One sample of the gas construction at time t: every initial
    particle lands according to its transition-table row, and an
    independent Poisson(lambda_t(i)) count is added at each site."""
    occ = sample_gas_discrete_batch(eta0, t, spec, rng, 1, table, intensity)[0]
    return DiscreteConfiguration(tuple(int(c) for c in occ[1:-1]),
                                 int(occ[0]) + eta0.absorbed_left,
                                 int(occ[-1]) + eta0.absorbed_right)


def sample_gas_discrete_batch(eta0: DiscreteConfiguration, t: float,
                              spec: ChainSpec, rng: np.random.Generator,
                              n_replicas: int,
                              table: TransitionTable | None = None,
                              intensity: np.ndarray | None = None) -> np.ndarray:
    """Vectorized gas sampling: returns an (n_replicas, N+2) occupancy
    array whose first and last columns are the absorbed tallies of the
    evolved initial particles."""
    if eta0.n_sites != spec.n_sites:
        raise ValidationError("configuration does not match chain length")
    n = spec.n_sites
    if table is None:
        table = transition_table(spec, t)
    if intensity is None:
        intensity = chain_intensity(spec, t, table=table)
    dim = n + 2
    occ = np.zeros((n_replicas, dim), dtype=np.int64)
    replica_offset = np.arange(n_replicas, dtype=np.int64) * dim
    for site in range(1, n + 1):
        c = eta0.counts[site - 1]
        if c == 0:
            continue
        cdf = np.cumsum(table.matrix[site])
        cdf[-1] = 1.0
        u = rng.random((n_replicas, c))
        dest = np.searchsorted(cdf, u)
        flat = (dest + replica_offset[:, None]).ravel()
        occ += np.bincount(flat, minlength=n_replicas * dim).reshape(n_replicas, dim)
    occ[:, 1:-1] += rng.poisson(lam=intensity, size=(n_replicas, n))
    return occ


def dual_expectation_discrete(xi: DiscreteConfiguration,
                              eta0: DiscreteConfiguration, t: float,
                              spec: ChainSpec,
                              table: TransitionTable | None = None,
                              cap: int = 6) -> float:
    """Deterministic dual side of the reservoir duality.

    The |xi| dual particles move independently with marginals from the
    transition table; the weighted classical duality is summed exactly
    over all joint outcomes, pruning branches whose falling factorial
    has hit zero.  Exact up to the table's truncation bound.
    """
    if xi.n_sites != eta0.n_sites or xi.n_sites != spec.n_sites:
        raise ValidationError("chain length mismatch")
    n_dual = xi.interior_mass
    if n_dual > cap:
        raise ValidationError(f"dual enumeration capped at {cap} particles, got {n_dual}")
    if table is None:
        table = transition_table(spec, t)
    lam_l = spec.params.lambda_left
    lam_r = spec.params.lambda_right
    n = spec.n_sites
    rows = []
    for site, k in enumerate(xi.counts, start=1):
        rows.extend([table.matrix[site]] * k)
    base = lam_l ** xi.absorbed_left * lam_r ** xi.absorbed_right
    if n_dual == 0:
        return base
    eta_counts = eta0.counts
    placed = [0] * n
    total = 0.0

    def recurse(j: int, weight: float) -> None:
        nonlocal total
        if j == n_dual:
            total += weight
            return
        row = rows[j]
        w0 = row[0]
        if w0 > 0.0 and lam_l > 0.0:
            recurse(j + 1, weight * w0 * lam_l)
        w1 = row[n + 1]
        if w1 > 0.0 and lam_r > 0.0:
            recurse(j + 1, weight * w1 * lam_r)
        for y in range(1, n + 1):
            w = row[y]
            if w <= 0.0:
                continue
            factor = eta_counts[y - 1] - placed[y - 1]
            if factor <= 0:
                continue
            placed[y - 1] += 1
            recurse(j + 1, weight * w * factor)
            placed[y - 1] -= 1

    recurse(0, base)
    return total
