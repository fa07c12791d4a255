"""Allocation problem instances and their closed-form optimum.

Every quantity is an exact rational (:class:`fractions.Fraction`); nothing
here touches floating point.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

ExactFraction = Fraction


class InvalidInstance(ValueError):
    pass


class InfeasibleInstance(InvalidInstance):
    """Total load exceeds total available memory."""


def format_fraction(q: Fraction) -> str:
    """Serialize as ``"numerator/denominator"`` (denominator always shown)."""
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator}"


def parse_fraction(text: str) -> Fraction:
    num, _, den = text.partition("/")
    return Fraction(int(num), int(den) if den else 1)


@dataclass(frozen=True)
class ProblemInstance:
    """Per-node load ``l_j``, stored data ``delta_j`` and memory capacity ``nu_j``."""

    loads: tuple[int, ...]
    stored: tuple[int, ...]
    capacities: tuple[int, ...]

    def __init__(self, loads: Sequence[int], stored: Sequence[int] | None, capacities: Sequence[int]):
        stored = [0] * len(loads) if stored is None else stored
        if not (len(loads) == len(stored) == len(capacities)):
            raise InvalidInstance("loads, stored and capacities must have equal length")
        if len(loads) == 0:
            raise InvalidInstance("instance needs at least one node")
        object.__setattr__(self, "loads", tuple(int(x) for x in loads))
        object.__setattr__(self, "stored", tuple(int(x) for x in stored))
        object.__setattr__(self, "capacities", tuple(int(x) for x in capacities))

    @property
    def n(self) -> int:
        return len(self.loads)

    @property
    def mu(self) -> int:
        return sum(self.loads)

    @property
    def delta_tot(self) -> int:
        return sum(self.stored)

    @property
    def nu_max(self) -> int:
        return sum(self.capacities)

    @property
    def nu_avail(self) -> int:
        return sum(c - d for c, d in zip(self.capacities, self.stored))

    def demand(self, j: int) -> Fraction:
        """Node ``j``'s own balance point ``(l_j + delta_j) / nu_j``."""
        return Fraction(self.loads[j] + self.stored[j], self.capacities[j])


@dataclass(frozen=True)
class ValidationReport:
    n: int
    mu: int
    delta_tot: int
    nu_max: int
    nu_avail: int
    feasible: bool


def validate(instance: ProblemInstance) -> ValidationReport:
    for j in range(instance.n):
        l, d, c = instance.loads[j], instance.stored[j], instance.capacities[j]
        if l < 0 or d < 0:
            raise InvalidInstance(f"node {j}: load and stored data must be nonnegative (got l={l}, delta={d})")
        if c < 1:
            raise InvalidInstance(f"node {j}: capacity must be >= 1 (got {c})")
        if l + d < 1:
            raise InvalidInstance(f"node {j}: load + stored data must be >= 1, a node holding no data cannot release its memory mass")
    report = ValidationReport(
        n=instance.n,
        mu=instance.mu,
        delta_tot=instance.delta_tot,
        nu_max=instance.nu_max,
        nu_avail=instance.nu_avail,
        feasible=instance.mu <= instance.nu_avail,
    )
    if not report.feasible:
        raise InfeasibleInstance(
            f"infeasible: total load mu={report.mu} exceeds available memory nu_avail={report.nu_avail}"
        )
    return report


def local_cost(instance: ProblemInstance, j: int, z: Fraction) -> Fraction:
    diff = Fraction(z) - instance.demand(j)
    return Fraction(instance.capacities[j], 2) * diff * diff


def global_cost(instance: ProblemInstance, z: Fraction) -> Fraction:
    return sum((local_cost(instance, j, z) for j in range(instance.n)), Fraction(0))


def optimal_z(instance: ProblemInstance) -> Fraction:
    """Minimizer ``(mu + delta_tot) / nu_max`` of the global cost."""
    return Fraction(instance.mu + instance.delta_tot, instance.nu_max)


def optimal_ratio(instance: ProblemInstance) -> Fraction:
    """Memory per unit of data, ``nu_max / (mu + delta_tot)``; what every node's state fraction converges to."""
    return Fraction(instance.nu_max, instance.mu + instance.delta_tot)


def optimal_workload(instance: ProblemInstance, j: int) -> Fraction:
    return optimal_z(instance) * instance.capacities[j] - instance.stored[j]


def workload_from_ratio(instance: ProblemInstance, j: int, q: Fraction) -> Fraction:
    """Workload a node derives from its state fraction: ``nu_j / q - delta_j``."""
    return instance.capacities[j] / Fraction(q) - instance.stored[j]


def generate_instance(
    n: int,
    load_range: tuple[int, int],
    capacity_tiers: Sequence[tuple[int, int]],
    seed: int,
    total_load: int | None = None,
    stored_range: tuple[int, int] = (0, 0),
    max_attempts: int = 100000,
) -> ProblemInstance:
    """Random instance: uniform integer loads, capacities assigned by tier.

    ``capacity_tiers`` is a list of ``(count, capacity)``; counts must add up
    to ``n`` and tiers go to a random permutation of the nodes.  With
    ``total_load`` the load vector is resampled until it sums to that value
    (conditioning the uniform draw, not rescaling it).
    """
    if sum(c for c, _ in capacity_tiers) != n:
        raise InvalidInstance(f"capacity tier counts must add up to n={n}")
    lo, hi = load_range
    if total_load is not None and not lo * n <= total_load <= hi * n:
        raise InvalidInstance(f"total_load={total_load} unreachable with {n} loads in [{lo}, {hi}]")
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        loads = rng.integers(lo, hi + 1, size=n)
        if total_load is None or int(loads.sum()) == total_load:
            break
    else:
        raise RuntimeError(f"could not hit total_load={total_load} in {max_attempts} draws")
    stored = rng.integers(stored_range[0], stored_range[1] + 1, size=n)
    caps = np.empty(n, dtype=np.int64)
    order = rng.permutation(n)
    start = 0
    for count, capacity in capacity_tiers:
        caps[order[start:start + count]] = capacity
        start += count
    return ProblemInstance(loads.tolist(), stored.tolist(), caps.tolist())
