"""Experiment configuration: YAML in, resolved instance + graph out.

Example::

    instance:
      generate: {n: 20, load_range: [1, 50], total_load: 504, seed: 7,
                 capacity_tiers: [[7, 31752], [7, 63504], [6, 95256]]}
    graph:
      generate: {model: gnp, n: 20, diameter: 3, seed: 11}
    window: 5
    extra_activation_prob: 0.0
    trials: {count: 50, master_seed: 1}

Explicit alternatives are ``instance.nodes`` (a list of
``{load, stored, capacity}`` mappings) and ``graph.edges`` (a list of
pairs, with ``graph.n``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from . import graph as graphs
from .analysis import BoundInputs, analytic_round_bound
from .graph import NominalGraph, diameter
from .problem import InvalidInstance, ProblemInstance, generate_instance, validate


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


GRAPH_MODELS = ("gnp", "path", "cycle", "complete", "star")


@dataclass
class ExperimentConfig:
    instance: ProblemInstance
    nominal: NominalGraph
    window: int
    extra_activation_prob: float = 0.0
    seeds: list[int] = field(default_factory=lambda: trial_seeds(0, 1))
    max_rounds: int | None = None
    stall_window: int | None = None
    p0_prime: float = 0.9
    walk_trials: int = 100_000
    walk_pairs: int = 10
    walk_seed: int = 0

    @property
    def diameter(self) -> int:
        return diameter(self.nominal)

    def bound_inputs(self) -> BoundInputs:
        return BoundInputs(self.instance.n, self.window, self.diameter, self.nominal.max_degree(), self.p0_prime)

    def resolved_stall_window(self) -> int:
        return self.stall_window if self.stall_window is not None else self.window * self.diameter + 1

    def resolved_max_rounds(self) -> int:
        if self.max_rounds is not None:
            return self.max_rounds
        if self.instance.n < 2:
            return 2 * self.resolved_stall_window() + 1
        # detection needs a quiet stretch after the last transmission
        return analytic_round_bound(self.bound_inputs(), self.p0_prime).max_rounds + self.resolved_stall_window()


def trial_seeds(master_seed: int, count: int) -> list[int]:
    """Per-trial seeds derived from ``(master_seed, trial index)``."""
    return [int(np.random.SeedSequence([master_seed, i]).generate_state(1)[0]) for i in range(count)]


def _int(d: Mapping[str, Any], key: str, where: str, default: Any = ..., minimum: int | None = None) -> int:
    field = key if where == "<root>" else f"{where}.{key}"
    if key not in d or d[key] is None:
        if default is ...:
            raise ConfigError(field, "missing")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(field, f"expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(field, f"must be >= {minimum}, got {v}")
    return v


def _section(raw: Mapping[str, Any], key: str) -> Mapping[str, Any]:
    sec = raw.get(key)
    if not isinstance(sec, Mapping):
        raise ConfigError(key, "missing or not a mapping")
    return sec


def _resolve_instance(sec: Mapping[str, Any]) -> ProblemInstance:
    if "nodes" in sec:
        nodes = sec["nodes"]
        if not isinstance(nodes, list) or not nodes:
            raise ConfigError("instance.nodes", "expected a non-empty list")
        loads, stored, caps = [], [], []
        for i, nd in enumerate(nodes):
            where = f"instance.nodes[{i}]"
            if not isinstance(nd, Mapping):
                raise ConfigError(where, "expected a mapping with load/stored/capacity")
            loads.append(_int(nd, "load", where, minimum=0))
            stored.append(_int(nd, "stored", where, default=0, minimum=0))
            caps.append(_int(nd, "capacity", where, minimum=1))
        inst = ProblemInstance(loads, stored, caps)
    elif "generate" in sec:
        gen = sec["generate"]
        where = "instance.generate"
        n = _int(gen, "n", where, minimum=1)
        lr = gen.get("load_range", [1, 50])
        if not (isinstance(lr, list) and len(lr) == 2 and all(isinstance(x, int) for x in lr) and 0 <= lr[0] <= lr[1]):
            raise ConfigError(f"{where}.load_range", f"expected [lo, hi] integers, got {lr!r}")
        sr = gen.get("stored_range", [0, 0])
        tiers = gen.get("capacity_tiers")
        if tiers is None:
            tiers = [[n, _int(gen, "capacity", where, default=100, minimum=1)]]
        if not (isinstance(tiers, list) and all(isinstance(t, list) and len(t) == 2 for t in tiers)):
            raise ConfigError(f"{where}.capacity_tiers", "expected a list of [count, capacity]")
        try:
            inst = generate_instance(
                n,
                (lr[0], lr[1]),
                [(int(c), int(v)) for c, v in tiers],
                seed=_int(gen, "seed", where, default=0),
                total_load=_int(gen, "total_load", where, default=None),
                stored_range=(int(sr[0]), int(sr[1])),
            )
        except InvalidInstance as exc:
            raise ConfigError(where, str(exc)) from exc
    else:
        raise ConfigError("instance", "needs either `nodes` or `generate`")
    return inst


def _resolve_graph(sec: Mapping[str, Any], n: int) -> NominalGraph:
    if "edges" in sec:
        edges = sec["edges"]
        if not isinstance(edges, list):
            raise ConfigError("graph.edges", "expected a list of [u, v] pairs")
        try:
            g = NominalGraph(_int(sec, "n", "graph", default=n), edges)
        except (ValueError, TypeError, IndexError) as exc:
            raise ConfigError("graph.edges", str(exc)) from exc
    elif "generate" in sec:
        gen = sec["generate"]
        where = "graph.generate"
        model = gen.get("model", "gnp")
        gn = _int(gen, "n", where, default=n, minimum=1)
        if model == "gnp":
            target = _int(gen, "diameter", where, minimum=1)
            try:
                g = graphs.random_graph_with_diameter(
                    gn, target, seed=_int(gen, "seed", where, default=0), edge_prob=gen.get("edge_prob")
                )
            except (ValueError, RuntimeError) as exc:
                raise ConfigError(where, str(exc)) from exc
        elif model in GRAPH_MODELS:
            g = getattr(graphs, f"{model}_graph")(gn)
        else:
            raise ConfigError(f"{where}.model", f"unknown model {model!r}; choose from {', '.join(GRAPH_MODELS)}")
    else:
        raise ConfigError("graph", "needs either `edges` or `generate`")
    if g.node_count != n:
        raise ConfigError("graph", f"graph has {g.node_count} nodes but the instance has {n}")
    if not g.is_connected():
        raise ConfigError("graph", "nominal graph is not connected")
    if "diameter" in sec and diameter(g) != sec["diameter"]:
        raise ConfigError("graph.diameter", f"expected {sec['diameter']}, graph has {diameter(g)}")
    return g


def resolve_config(raw: Mapping[str, Any]) -> ExperimentConfig:
    if not isinstance(raw, Mapping):
        raise ConfigError("<root>", "config must be a mapping")
    inst = _resolve_instance(_section(raw, "instance"))
    try:
        validate(inst)
    except InvalidInstance as exc:
        raise ConfigError("instance", str(exc)) from exc
    nominal = _resolve_graph(_section(raw, "graph"), inst.n)

    window = _int(raw, "window", "<root>", minimum=1)
    p = raw.get("extra_activation_prob", 0.0)
    if not isinstance(p, (int, float)) or isinstance(p, bool) or not 0.0 <= p <= 1.0:
        raise ConfigError("extra_activation_prob", f"expected a probability in [0, 1], got {p!r}")

    if "seeds" in raw:
        seeds = raw["seeds"]
        if not (isinstance(seeds, list) and seeds and all(isinstance(s, int) and s >= 0 for s in seeds)):
            raise ConfigError("seeds", "expected a non-empty list of nonnegative integers")
    else:
        tr = raw.get("trials", {}) or {}
        seeds = trial_seeds(_int(tr, "master_seed", "trials", default=0, minimum=0),
                            _int(tr, "count", "trials", default=1, minimum=1))

    p0 = raw.get("p0_prime", 0.9)
    if not isinstance(p0, (int, float)) or not 0.0 < p0 < 1.0:
        raise ConfigError("p0_prime", f"expected a probability in (0, 1), got {p0!r}")

    walk = raw.get("token_walk", {}) or {}
    return ExperimentConfig(
        instance=inst,
        nominal=nominal,
        window=window,
        extra_activation_prob=float(p),
        seeds=list(seeds),
        max_rounds=_int(raw, "max_rounds", "<root>", default=None, minimum=1),
        stall_window=_int(raw, "stall_window", "<root>", default=None, minimum=1),
        p0_prime=float(p0),
        walk_trials=_int(walk, "trials", "token_walk", default=100_000, minimum=1),
        walk_pairs=_int(walk, "pairs", "token_walk", default=10, minimum=1),
        walk_seed=_int(walk, "seed", "token_walk", default=0, minimum=0),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"not valid YAML: {exc}") from exc
    return resolve_config(raw)
