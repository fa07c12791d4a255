"""Convergence-time bounds and their empirical checks.

The bounds chain together as::

    P   = (1 + D_max) ** -(l * D_un)          # one-window-block hitting probability
    eps = 1 - 2 ** (log2(p0') / (n - 1))      # per-merge failure budget
    tau = ceil(log(eps) / log(1 - P))         # window blocks per merge
    K   = n*l*D_un + (n - 1)*tau*l*D_un       # rounds until all merges, w.p. >= p0'

``P`` is kept exact; the logarithms run in mpmath because ``P`` underflows
double precision for moderate ``l * D_un``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np

from .graph import DynamicGraphSequence, diameter

_DPS = 60


@dataclass(frozen=True)
class BoundInputs:
    n: int
    l: int
    d_un: int
    d_max: int
    p0: float = 0.9

    def __post_init__(self):
        if self.l < 1 or self.d_un < 1 or self.d_max < 1:
            raise ValueError(f"l, d_un and d_max must be >= 1 (got {self.l}, {self.d_un}, {self.d_max})")
        if not 0.0 < self.p0 < 1.0:
            raise ValueError(f"p0 must lie in (0, 1), got {self.p0}")

    @classmethod
    def from_sequence(cls, seq: DynamicGraphSequence, p0: float = 0.9) -> BoundInputs:
        return cls(seq.nominal.node_count, seq.window, diameter(seq.nominal), seq.nominal.max_degree(), p0)


def hitting_probability_lower_bound(inputs: BoundInputs) -> Fraction:
    return Fraction(1, (1 + inputs.d_max) ** (inputs.l * inputs.d_un))


def _check_probability(p: float, name: str) -> None:
    if not 0.0 < p < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {p}")


def epsilon_bound_single(p0: float) -> float:
    """Largest admissible failure probability for a single token visit."""
    _check_probability(p0, "p0")
    eps = 1.0 - 2.0 ** math.log2(p0)
    assert math.isclose(eps, 1.0 - p0, rel_tol=1e-9, abs_tol=1e-15)
    return eps


def epsilon_bound_network(p0_prime: float, n: int) -> float:
    """Per-merge failure probability so that all ``n - 1`` merges succeed w.p. ``>= p0_prime``."""
    _check_probability(p0_prime, "p0_prime")
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    return 1.0 - 2.0 ** (math.log2(p0_prime) / (n - 1))


def _epsilon_network_mp(p0_prime: float, n: int) -> mpmath.mpf:
    # the float epsilon carries ~1e-16 relative error, enough to move tau by
    # one once tau reaches 1e15; p0' is taken as the decimal it prints as
    p0 = mpmath.mpf(repr(p0_prime))
    return -mpmath.expm1(mpmath.log(p0) / (n - 1))


def tau_bound(epsilon: float | mpmath.mpf, inputs: BoundInputs) -> int:
    """Least number of ``l * D_un`` blocks after which a token misses its target w.p. ``<= epsilon``."""
    _check_probability(float(epsilon), "epsilon")
    p = hitting_probability_lower_bound(inputs)
    with mpmath.workdps(_DPS):
        eps = mpmath.mpf(repr(epsilon)) if isinstance(epsilon, float) else mpmath.mpf(epsilon)
        log_eps = mpmath.log(eps)
        miss = mpmath.log1p(-mpmath.mpf(p.numerator) / p.denominator)
        tau = int(mpmath.ceil(log_eps / miss))
        # guard against the ceiling landing one off through rounding
        while tau > 1 and (tau - 1) * miss <= log_eps:
            tau -= 1
        while tau * miss > log_eps:
            tau += 1
    return max(tau, 1)


def convergence_step_bound(n: int, l: int, d_un: int, tau: int) -> int:
    if min(n, l, d_un, tau) < 1:
        raise ValueError("all arguments must be positive")
    block = l * d_un
    return n * block + (n - 1) * tau * block


@dataclass(frozen=True)
class RoundBound:
    p0_prime: float
    epsilon: float
    tau: int
    hitting_probability: Fraction
    max_rounds: int


def analytic_round_bound(inputs: BoundInputs, p0_prime: float | None = None) -> RoundBound:
    p0_prime = inputs.p0 if p0_prime is None else p0_prime
    eps = epsilon_bound_network(p0_prime, inputs.n)
    with mpmath.workdps(_DPS):
        tau = tau_bound(_epsilon_network_mp(p0_prime, inputs.n), inputs)
    return RoundBound(
        p0_prime=p0_prime,
        epsilon=eps,
        tau=tau,
        hitting_probability=hitting_probability_lower_bound(inputs),
        max_rounds=convergence_step_bound(inputs.n, inputs.l, inputs.d_un, tau),
    )


# ---------------------------------------------------------------------------
# token walks


def token_walk_trial(
    seq: DynamicGraphSequence,
    start: int,
    target: int,
    horizon: int,
    seed: int | np.random.Generator | None,
) -> int | None:
    """First round at which a single random-walking token sits on ``target``.

    The token starts at ``start`` in round 0; in round ``k`` its holder keeps
    it or passes it to a neighbor in ``E[k]``, uniformly over the
    ``degree + 1`` options.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    pos = start
    if pos == target:
        return 0
    for k in range(horizon):
        options = (pos, *seq.adjacency(k)[pos])
        pos = options[int(rng.integers(len(options)))]
        if pos == target:
            return k + 1
    return None


def _padded_adjacency(seq: DynamicGraphSequence, k: int) -> tuple[np.ndarray, np.ndarray]:
    adj = seq.adjacency(k)
    n = len(adj)
    width = 1 + max((len(a) for a in adj), default=0)
    table = np.zeros((n, width), dtype=np.int64)
    for j, a in enumerate(adj):
        table[j, 0] = j
        table[j, 1:1 + len(a)] = a
    degree = np.fromiter((len(a) for a in adj), dtype=np.int64, count=n)
    return table, degree


def token_walk_ensemble(
    seq: DynamicGraphSequence,
    start: int,
    target: int,
    horizon: int,
    trials: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """First-hit rounds of ``trials`` independent tokens; ``-1`` marks a miss.

    Same walk law as :func:`token_walk_trial`, advanced for all tokens at once.
    """
    hits = np.full(trials, -1, dtype=np.int64)
    if start == target:
        hits[:] = 0
        return hits
    pos = np.full(trials, start, dtype=np.int64)
    alive = np.ones(trials, dtype=bool)
    for k in range(horizon):
        table, degree = _padded_adjacency(seq, k)
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        p = pos[idx]
        choice = (rng.random(idx.size) * (degree[p] + 1)).astype(np.int64)
        p = table[p, choice]
        pos[idx] = p
        hit = p == target
        hits[idx[hit]] = k + 1
        alive[idx[hit]] = False
    return hits


@dataclass(frozen=True)
class PairEstimate:
    start: int
    target: int
    trials: int
    hits: int
    estimate: float
    bound: float
    margin: float

    @property
    def passed(self) -> bool:
        return self.estimate + self.margin >= self.bound


@dataclass(frozen=True)
class HittingReport:
    horizon: int
    bound: Fraction
    pairs: list[PairEstimate]

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.pairs)


def sample_pairs(n: int, count: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Up to ``count`` distinct ordered pairs ``(start, target)`` with ``start != target``."""
    all_pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    if count >= len(all_pairs):
        return all_pairs
    idx = rng.choice(len(all_pairs), size=count, replace=False)
    return [all_pairs[i] for i in sorted(idx)]


def verify_lemma1(
    seq: DynamicGraphSequence,
    trials: int,
    seed: int,
    pairs: Sequence[tuple[int, int]] | int | None = None,
    sigmas: float = 3.0,
) -> HittingReport:
    """Estimate, per pair, the chance a token reaches its target within ``l * D_un`` rounds.

    A pair fails only if the estimate sits more than ``sigmas`` binomial
    standard deviations (taken at the bound) below the analytic bound.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    inputs = BoundInputs.from_sequence(seq)
    horizon = inputs.l * inputs.d_un
    bound = hitting_probability_lower_bound(inputs)
    rng = np.random.default_rng(seed)
    n = seq.nominal.node_count
    if pairs is None or isinstance(pairs, int):
        pairs = sample_pairs(n, 10 if pairs is None else pairs, rng)
    b = float(bound)
    margin = sigmas * math.sqrt(b * (1.0 - b) / trials)
    out = []
    for s, t in pairs:
        hits = token_walk_ensemble(seq, s, t, horizon, trials, rng)
        h = int(np.count_nonzero(hits >= 0))
        out.append(PairEstimate(s, t, trials, h, h / trials, b, margin))
    return HittingReport(horizon, bound, out)
