"""Shared value types: particle configurations, reservoir parameters,
Monte Carlo estimates and kernel evaluations.

All types are immutable after construction; simulators and evaluators
return fresh objects.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional


class ValidationError(ValueError):
    """Raised when a precondition on inputs is violated."""


@dataclass(frozen=True)
class DiscreteConfiguration:
    """Occupation counts on chain sites 1..N plus absorbed tallies.

    ``counts[i-1]`` is the number of particles at interior site ``i``;
    the two tallies count particles sitting at the exterior absorbing
    sites 0 and N+1.
    """

    counts: tuple[int, ...]
    absorbed_left: int = 0
    absorbed_right: int = 0

    def __post_init__(self):
        if len(self.counts) < 1:
            raise ValidationError("chain must have at least one site")
        if any(c < 0 for c in self.counts):
            raise ValidationError(f"negative occupation count in {self.counts}")
        if self.absorbed_left < 0 or self.absorbed_right < 0:
            raise ValidationError("absorbed tallies must be non-negative")

    @property
    def n_sites(self) -> int:
        return len(self.counts)

    @property
    def mass(self) -> int:
        """Total particle number, interior plus absorbed."""
        return sum(self.counts) + self.absorbed_left + self.absorbed_right

    @property
    def interior_mass(self) -> int:
        return sum(self.counts)

    def restrict_interior(self) -> "DiscreteConfiguration":
        """Drop the absorbed tallies, keep interior counts."""
        return DiscreteConfiguration(self.counts, 0, 0)


def make_discrete_config(counts: Iterable[int]) -> DiscreteConfiguration:
    """Configuration with the given interior counts and zero tallies."""
    counts = tuple(int(c) for c in counts)
    return DiscreteConfiguration(counts)


@dataclass(frozen=True)
class ContinuumConfiguration:
    """Finite point configuration on (0,1) plus absorbed tallies at 0 and 1.

    Positions are stored as a sorted tuple; multiset equality is exact
    equality of the sorted lists (samplers produce values, nothing
    re-derives them).
    """

    positions: tuple[float, ...]
    absorbed_left: int = 0
    absorbed_right: int = 0

    def __post_init__(self):
        pos = tuple(sorted(float(x) for x in self.positions))
        object.__setattr__(self, "positions", pos)
        if any(not (0.0 < x < 1.0) for x in pos):
            raise ValidationError("positions must lie strictly inside (0,1)")
        if self.absorbed_left < 0 or self.absorbed_right < 0:
            raise ValidationError("absorbed tallies must be non-negative")

    @property
    def mass(self) -> int:
        """Number of interior points."""
        return len(self.positions)

    def count_in(self, a: float, b: float) -> int:
        """Number of points in the open interval (a, b)."""
        return sum(1 for x in self.positions if a < x < b)


def superpose(a: ContinuumConfiguration, b: ContinuumConfiguration) -> ContinuumConfiguration:
    """Multiset union of two point configurations; tallies add."""
    return ContinuumConfiguration(a.positions + b.positions,
                                  a.absorbed_left + b.absorbed_left,
                                  a.absorbed_right + b.absorbed_right)


def restrict_interior(c: ContinuumConfiguration) -> ContinuumConfiguration:
    """Restriction to (0,1): same points, tallies zeroed."""
    return ContinuumConfiguration(c.positions, 0, 0)


@dataclass(frozen=True)
class ReservoirParams:
    """Left/right reservoir intensities, plus the deformation parameter
    used only by orthogonal dualities."""

    lambda_left: float
    lambda_right: float
    theta: Optional[float] = None

    def __post_init__(self):
        if self.lambda_left < 0 or self.lambda_right < 0:
            raise ValidationError("reservoir intensities must be non-negative")
        if self.theta is not None and not self.theta > 0:
            raise ValidationError("theta must be positive when present")

    def require_theta(self) -> float:
        if self.theta is None:
            raise ValidationError("operation requires theta in ReservoirParams")
        return self.theta


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo mean with its standard error and the identifiers
    that reproduce it bit-for-bit."""

    mean: float
    stderr: float
    n_samples: int
    seed: int
    stream_count: int

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValidationError("n_samples must be positive")
        if self.stderr < 0:
            raise ValidationError("stderr must be non-negative")


@dataclass(frozen=True)
class KernelValue:
    """A kernel evaluation together with a certified truncation bound:
    the reported value is within ``trunc_error_bound`` of the
    infinite-series limit."""

    value: float
    trunc_error_bound: float

    def __float__(self) -> float:
        return self.value
