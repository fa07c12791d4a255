"""Per-node protocol state machine.

A node holds a *mass* pair ``(y, z)`` that it may forward to a random
neighbor and a *state* pair ``(y_s, z_s)``: the largest pair it has heard
of, compared lexicographically on ``(z, y)``.  Each round a node absorbs
incoming masses, runs the event-trigger conditions, checks for neighbors
that have not yet seen its state, and emits at most one directed mass
message and one state broadcast.

The functions below mutate the :class:`NodeState` they are given and
return it, so calls can be chained.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .problem import ProblemInstance


@dataclass(frozen=True, slots=True)
class MassPair:
    y: int
    z: int

    def key(self) -> tuple[int, int]:
        return (self.z, self.y)

    @property
    def empty(self) -> bool:
        return self.y == 0 and self.z == 0

    def __add__(self, other: MassPair) -> MassPair:
        return MassPair(self.y + other.y, self.z + other.z)


EMPTY_MASS = MassPair(0, 0)


@dataclass(frozen=True, slots=True)
class StatePair:
    y_s: int
    z_s: int
    q_s: Fraction = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        if self.z_s < 1:
            raise ValueError(f"state denominator must be >= 1, got {self.z_s}")
        object.__setattr__(self, "q_s", Fraction(self.y_s, self.z_s))

    def key(self) -> tuple[int, int]:
        return (self.z_s, self.y_s)

    @classmethod
    def of(cls, mass: MassPair) -> StatePair:
        return cls(mass.y, mass.z)


class MessageKind(enum.Enum):
    BROADCAST_STATE = "broadcast-state"
    DIRECTED_MASS = "directed-mass"


@dataclass(frozen=True, slots=True)
class Message:
    kind: MessageKind
    sender: int
    recipients: tuple[int, ...]
    payload: StatePair | MassPair
    sent_round: int


@dataclass(slots=True)
class NodeState:
    id: int
    mass: MassPair
    state: StatePair
    broadcast_flag: bool = False
    transmit_flag: bool = False
    remembered: set[int] = field(default_factory=set)

    def __repr__(self) -> str:
        return (
            f"NodeState(id={self.id}, mass=({self.mass.y},{self.mass.z}), "
            f"state=({self.state.y_s},{self.state.z_s}), br={int(self.broadcast_flag)}, "
            f"tr={int(self.transmit_flag)}, S={sorted(self.remembered)})"
        )


def initialize(instance: ProblemInstance, j: int, initial_neighbors: Iterable[int] = ()) -> NodeState:
    """Mass ``(nu_j, l_j + delta_j)``, state ``(nu_j, 1)``, remembered = round-0 neighbors.

    The caller queues the initial state broadcast.
    """
    capacity = instance.capacities[j]
    return NodeState(
        id=j,
        mass=MassPair(capacity, instance.loads[j] + instance.stored[j]),
        state=StatePair(capacity, 1),
        remembered=set(initial_neighbors),
    )


def absorb_masses(node: NodeState, received: Sequence[MassPair]) -> NodeState:
    if received:
        y = node.mass.y + sum(m.y for m in received)
        z = node.mass.z + sum(m.z for m in received)
        node.mass = MassPair(y, z)
    return node


def apply_event_triggers(
    node: NodeState,
    received_states: Sequence[StatePair],
    current_neighbors: Iterable[int],
) -> NodeState:
    """Event-trigger conditions 1 to 5, in order."""
    # 1: adopt the largest received state if it beats ours
    if received_states:
        best = max(received_states, key=StatePair.key)
        if best.key() > node.state.key():
            node.state = best
            node.broadcast_flag = True

    mass, state = node.mass, node.state
    # 2: own mass beats the state
    if mass.key() > state.key():
        node.state = state = StatePair.of(mass)
        node.broadcast_flag = True

    if mass.z > 0:
        # 3: a smaller mass moves on
        if mass.key() < state.key():
            node.transmit_flag = True
        # 4: ... unless it already carries the state's fraction
        if mass.y * state.z_s == state.y_s * mass.z:
            node.transmit_flag = False

    # 5: a new state invalidates who has seen the old one
    if node.broadcast_flag:
        node.remembered = set(current_neighbors)
    return node


def new_neighbor_check(node: NodeState, current_neighbors: Iterable[int]) -> NodeState:
    """Broadcast again when some current neighbor has not received our state."""
    current = set(current_neighbors)
    if not current <= node.remembered:
        node.broadcast_flag = True
        node.remembered |= current
    return node


def select_target(node: NodeState, current_neighbors: Iterable[int], rng: np.random.Generator) -> int:
    """Self or one neighbor, each with probability ``1 / (degree + 1)``.

    Candidates are ordered ``[self, *sorted(neighbors)]`` and one uniform
    integer is drawn per call.
    """
    choices = (node.id, *sorted(current_neighbors))
    if len(choices) == 1:
        return node.id
    return choices[int(rng.integers(len(choices)))]


def emit(
    node: NodeState,
    current_neighbors: Sequence[int],
    rng: np.random.Generator,
    k: int,
) -> tuple[list[Message], NodeState]:
    out: list[Message] = []
    if node.transmit_flag:
        target = select_target(node, current_neighbors, rng)
        out.append(Message(MessageKind.DIRECTED_MASS, node.id, (target,), node.mass, k))
        node.mass = EMPTY_MASS
        node.transmit_flag = False
    if node.broadcast_flag:
        out.append(Message(MessageKind.BROADCAST_STATE, node.id, tuple(sorted(current_neighbors)), node.state, k))
        node.broadcast_flag = False
    return out, node
