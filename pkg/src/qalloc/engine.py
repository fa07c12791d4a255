"""Synchronous round simulator for the allocation protocol.

Round 0 is initialization: every node loads its mass and queues a state
broadcast to its round-0 neighbors.  In each later round ``k`` every node,
in ascending id order, receives what was sent in round ``k - 1``, absorbs
masses, evaluates the event triggers, checks for new neighbors and emits.
Recipients of a message are fixed by ``E[k]`` at send time.

Convergence detection here is bookkeeping only; nodes never see it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .graph import DynamicGraphSequence, NominalGraph, diameter, generate_sequence
from .node import (
    EMPTY_MASS,
    MassPair,
    Message,
    MessageKind,
    NodeState,
    absorb_masses,
    apply_event_triggers,
    emit,
    initialize,
    new_neighbor_check,
)
from .problem import ProblemInstance, optimal_ratio, validate, workload_from_ratio

__all__ = [
    "ConservationError",
    "Message",
    "MessageKind",
    "RoundMetrics",
    "TrialResult",
    "World",
    "conservation_audit",
    "default_stall_window",
    "leading_mass",
    "run",
    "simulate",
    "split_seed",
    "step",
]

Channel = Callable[[list[Message]], list[Message]]


class ConservationError(RuntimeError):
    """Held plus in-flight mass no longer matches the initial totals."""


@dataclass(frozen=True)
class RoundMetrics:
    round: int
    broadcasts: int
    direct_transmissions: int
    nodes_at_optimum: int
    total_mass: MassPair
    distinct_state_pairs: int
    max_state_error: Fraction

    @property
    def transmissions(self) -> int:
        return self.broadcasts + self.direct_transmissions


@dataclass
class TrialResult:
    converged: bool
    convergence_round: int | None
    stop_round: int
    detection_round: int | None
    total_transmissions: int
    final_q: list[Fraction]
    workloads: list[Fraction | None]
    trace: list[RoundMetrics] = field(repr=False)
    seed: int | None = None
    post_detection_rounds: int = 0
    post_detection_messages: int = 0


class World:
    """All node states plus the messages in flight between two rounds.

    ``channel`` filters the messages delivered each round; it exists only so
    tests can model a lossy link and watch the conservation audit fail.
    """

    def __init__(
        self,
        instance: ProblemInstance,
        seq: DynamicGraphSequence,
        seed: int | np.random.Generator | None = None,
        channel: Channel | None = None,
    ):
        validate(instance)
        if seq.nominal.node_count != instance.n:
            raise ValueError(f"graph has {seq.nominal.node_count} nodes, instance has {instance.n}")
        self.instance = instance
        self.seq = seq
        self.rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        self.channel = channel
        self.optimum = optimal_ratio(instance)
        self.expected_total = MassPair(instance.nu_max, instance.mu + instance.delta_tot)

        adj = seq.adjacency(0)
        self.nodes: list[NodeState] = [initialize(instance, j, adj[j]) for j in range(instance.n)]
        self.pending: list[Message] = [
            Message(MessageKind.BROADCAST_STATE, j, adj[j], node.state, 0) for j, node in enumerate(self.nodes)
        ]
        self.round = 0
        self.trace: list[RoundMetrics] = [self._metrics(0, self.pending)]

    def node_at_optimum(self, node: NodeState) -> bool:
        return node.state.y_s * self.optimum.denominator == self.optimum.numerator * node.state.z_s

    def all_at_optimum(self) -> bool:
        return all(self.node_at_optimum(nd) for nd in self.nodes)

    def _metrics(self, k: int, sent: Sequence[Message]) -> RoundMetrics:
        broadcasts = sum(1 for m in sent if m.kind is MessageKind.BROADCAST_STATE)
        err = max(abs(nd.state.q_s - self.optimum) for nd in self.nodes)
        return RoundMetrics(
            round=k,
            broadcasts=broadcasts,
            direct_transmissions=len(sent) - broadcasts,
            nodes_at_optimum=sum(1 for nd in self.nodes if self.node_at_optimum(nd)),
            total_mass=conservation_audit(self),
            distinct_state_pairs=len({nd.state.key() for nd in self.nodes}),
            max_state_error=err,
        )

    def step(self) -> RoundMetrics:
        k = self.round + 1
        n = len(self.nodes)
        adj = self.seq.adjacency(k)
        inbound = self.channel(list(self.pending)) if self.channel else self.pending
        masses: list[list[MassPair]] = [[] for _ in range(n)]
        states: list[list] = [[] for _ in range(n)]
        for msg in inbound:
            if msg.kind is MessageKind.DIRECTED_MASS:
                masses[msg.recipients[0]].append(msg.payload)
            else:
                for r in msg.recipients:
                    states[r].append(msg.payload)

        sent: list[Message] = []
        for node in self.nodes:
            j = node.id
            absorb_masses(node, masses[j])
            # the initial load counts as mass received in the first iteration
            if masses[j] or states[j] or k == 1:
                apply_event_triggers(node, states[j], adj[j])
            new_neighbor_check(node, adj[j])
            out, _ = emit(node, adj[j], self.rng, k)
            sent.extend(out)

        self.pending = sent
        self.round = k
        metrics = self._metrics(k, sent)
        self.trace.append(metrics)
        return metrics


def step(world: World, k: int) -> RoundMetrics:
    if k != world.round + 1:
        raise ValueError(f"world is at round {world.round}; next round is {world.round + 1}, not {k}")
    return world.step()


def conservation_audit(world: World) -> MassPair:
    """Held plus in-flight mass; raises :class:`ConservationError` on mismatch."""
    y = z = 0
    for nd in world.nodes:
        y += nd.mass.y
        z += nd.mass.z
    for msg in world.pending:
        if msg.kind is MessageKind.DIRECTED_MASS:
            y += msg.payload.y
            z += msg.payload.z
    total = MassPair(y, z)
    if total != world.expected_total:
        held = ", ".join(f"{nd.id}:({nd.mass.y},{nd.mass.z})" for nd in world.nodes)
        raise ConservationError(
            f"round {world.round}: total mass ({y},{z}) != expected "
            f"({world.expected_total.y},{world.expected_total.z}); held {held}"
        )
    return total


def leading_mass(world: World) -> tuple[set[int], MassPair]:
    """Lexicographically largest ``(z, y)`` mass held by any node, with all its holders."""
    holders = [nd for nd in world.nodes if nd.mass.z > 0]
    if not holders:
        return set(), EMPTY_MASS
    best = max(nd.mass.key() for nd in holders)
    ids = {nd.id for nd in holders if nd.mass.key() == best}
    return ids, MassPair(best[1], best[0])


def default_stall_window(seq: DynamicGraphSequence) -> int:
    return seq.window * diameter(seq.nominal) + 1


def run(
    world: World,
    max_rounds: int,
    stall_window: int | None = None,
    extra_rounds: int = 0,
    seed: int | None = None,
) -> TrialResult:
    """Step until the network is quiet for ``stall_window`` rounds with every state optimal.

    After detection, ``extra_rounds`` more rounds are simulated and any
    message sent during them is counted in ``post_detection_messages``.
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    if stall_window is None:
        stall_window = default_stall_window(world.seq)

    first = world.trace[-1]
    quiet = 0 if first.transmissions else 1
    stop_round = first.round if first.transmissions else -1
    opt_since = first.round if world.all_at_optimum() else None
    detection = None
    while world.round < max_rounds:
        m = world.step()
        if m.transmissions:
            quiet = 0
            stop_round = m.round
        else:
            quiet += 1
        if m.nodes_at_optimum == len(world.nodes):
            if opt_since is None:
                opt_since = m.round
        else:
            opt_since = None
        if quiet >= stall_window and opt_since is not None:
            detection = m.round
            break

    converged = detection is not None
    post_messages = 0
    if converged:
        for _ in range(extra_rounds):
            post_messages += world.step().transmissions
    trace_until = detection if converged else world.round
    trace = world.trace[: trace_until + 1] if converged else list(world.trace)
    final_q = [nd.state.q_s for nd in world.nodes]
    inst = world.instance
    workloads = [workload_from_ratio(inst, j, q) if q else None for j, q in enumerate(final_q)]
    return TrialResult(
        converged=converged,
        convergence_round=opt_since if converged else None,
        stop_round=stop_round,
        detection_round=detection,
        total_transmissions=sum(m.transmissions for m in trace),
        final_q=final_q,
        workloads=workloads,
        trace=trace,
        seed=seed,
        post_detection_rounds=extra_rounds if converged else 0,
        post_detection_messages=post_messages,
    )


def split_seed(seed: int) -> tuple[int, int]:
    """Independent (graph sequence, protocol) seeds derived from one trial seed."""
    a, b = np.random.SeedSequence(seed).spawn(2)
    return int(a.generate_state(1)[0]), int(b.generate_state(1)[0])


def simulate(
    instance: ProblemInstance,
    nominal: NominalGraph,
    window: int,
    seed: int,
    *,
    extra_activation_prob: float = 0.0,
    max_rounds: int = 100_000,
    stall_window: int | None = None,
    extra_rounds: int = 0,
) -> TrialResult:
    """One trial on a freshly generated dynamic sequence; fully determined by ``seed``."""
    seq_seed, proto_seed = split_seed(seed)
    seq = generate_sequence(nominal, window, None, extra_activation_prob, seq_seed)
    world = World(instance, seq, proto_seed)
    return run(world, max_rounds, stall_window, extra_rounds, seed=seed)
