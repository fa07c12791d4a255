"""End-to-end acceptance checks.

Each test prints one ``[PASS]``/``[FAIL]`` line, visible even without ``-s``.
Run on its own with ``pytest tests/test_acceptance.py``.
"""

import math
import statistics
import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import ROOT, static_sequence
from micro_oracle import engine_trace, micro_instances, transcribe
from qalloc.analysis import analytic_round_bound, verify_lemma1
from qalloc.cli import main, run_experiment, verify_bounds
from qalloc.config import load_config, trial_seeds
from qalloc.engine import World, run, split_seed
from qalloc.graph import (
    NominalGraph,
    complete_graph,
    diameter,
    generate_sequence,
    path_graph,
    random_graph_with_diameter,
)
from qalloc.problem import ProblemInstance, validate

GRID20 = ROOT / "configs" / "grid20.yaml"


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
        assert ok, detail
    return emit


def random_connected_graph(n, rng):
    edges = {(int(rng.integers(i)), i) for i in range(1, n)}
    for _ in range(int(rng.integers(0, 2 * n))):
        u, v = sorted(int(x) for x in rng.choice(n, 2, replace=False))
        edges.add((u, v))
    return NominalGraph(n, edges)


def random_instance(n, rng):
    caps = rng.integers(1, 51, size=n).tolist()
    stored = [int(rng.integers(0, c // 3 + 1)) for c in caps]
    loads = [int(rng.integers(0 if d else 1, c - d + 1)) for c, d in zip(caps, stored)]
    inst = ProblemInstance(loads, stored, caps)
    validate(inst)
    return inst


# Criteria 1-3 share the same batch of random trials, run once per session.
@pytest.fixture(scope="module")
def random_batch():
    rng = np.random.default_rng(2024)
    trials = []
    start = time.perf_counter()
    for i in range(120):
        n = int(rng.integers(2, 31))
        l = int(rng.integers(1, 7))
        g = random_connected_graph(n, rng)
        inst = random_instance(n, rng)
        seq_seed, proto_seed = split_seed(int(rng.integers(2**32)))
        seq = generate_sequence(g, l, None, float(rng.uniform(0, 0.5)), seq_seed)
        d = diameter(g)
        stall = l * d + 1
        world = World(inst, seq, proto_seed)
        res = run(world, max_rounds=10**6, stall_window=stall, extra_rounds=l * d + stall)
        trials.append((inst, world, res))
    return trials, time.perf_counter() - start


def test_criterion1_exactness(random_batch, report):
    trials, elapsed = random_batch
    bad = []
    for idx, (inst, world, res) in enumerate(trials):
        total = inst.mu + inst.delta_tot
        if not res.converged:
            bad.append((idx, "not converged"))
            continue
        # cross-multiplied equality with nu_max / (mu + delta_tot)
        if any(nd.state.y_s * total != inst.nu_max * nd.state.z_s for nd in world.nodes):
            bad.append((idx, "state ratio"))
        w = res.workloads
        level = [(w[j] + inst.stored[j]) * inst.nu_max for j in range(inst.n)]
        if any(level[j] != total * inst.capacities[j] for j in range(inst.n)) or sum(w) != inst.mu:
            bad.append((idx, "workloads"))
    ok = not bad and len(trials) >= 100 and elapsed < 120
    report(1, ok, f"{len(trials)} random instances, exact optimum everywhere, {elapsed:.1f}s; failures {bad[:5]}")


def test_criterion2_transmissions_stop(random_batch, report):
    trials, _ = random_batch
    leaks = [(i, r.post_detection_messages) for i, (_, _, r) in enumerate(trials)
             if r.converged and r.post_detection_messages]
    extra_ok = all(r.post_detection_rounds > 0 for _, _, r in trials if r.converged)
    report(2, not leaks and extra_ok, f"zero messages in the post-detection rounds; leaks {leaks[:5]}")


def test_criterion3_conservation(random_batch, report):
    trials, _ = random_batch
    rounds = 0
    bad = []
    for i, (inst, world, _) in enumerate(trials):
        expected = (inst.nu_max, inst.mu + inst.delta_tot)
        # the world trace also covers the post-detection rounds
        assert [m.round for m in world.trace] == list(range(len(world.trace)))
        for m in world.trace:
            rounds += 1
            if (m.total_mass.y, m.total_mass.z) != expected:
                bad.append((i, m.round))
    report(3, not bad, f"held + in-flight mass exact in all {rounds} rounds; violations {bad[:5]}")


def test_criterion4_grid20(report):
    start = time.perf_counter()
    cfg = load_config(GRID20)
    inst = cfg.instance
    assert len(cfg.seeds) == 50 and inst.n == 20 and cfg.window == 5 and cfg.diameter == 3
    assert inst.mu == 504 and inst.delta_tot == 0
    tiers = sorted(set(inst.capacities))
    assert len(tiers) == 3 and tiers[0] * 2 == tiers[1] and tiers[0] * 3 == tiers[2]
    assert sorted(inst.capacities.count(c) for c in tiers) == [6, 7, 7]

    bound = analytic_round_bound(cfg.bound_inputs(), 0.9).max_rounds
    extra = cfg.window * cfg.diameter + cfg.resolved_stall_window()
    results = [
        run(World(inst, generate_sequence(cfg.nominal, cfg.window, None, cfg.extra_activation_prob, s1), s2),
            max_rounds=bound + cfg.resolved_stall_window(), extra_rounds=extra, seed=seed)
        for seed in cfg.seeds
        for s1, s2 in [split_seed(seed)]
    ]
    within = sum(r.converged and r.convergence_round <= bound for r in results)

    ratio_ok = True
    flat_ok = True
    for r in results:
        by_tier = {c: {r.workloads[j] for j in range(20) if inst.capacities[j] == c} for c in tiers}
        if any(len(v) != 1 for v in by_tier.values()):
            ratio_ok = False
            continue
        w1, w2, w3 = (by_tier[c].pop() for c in tiers)
        ratio_ok &= w2 == 2 * w1 and w3 == 3 * w1
        cumulative = np.cumsum([m.transmissions for m in r.trace])
        flat_ok &= bool((cumulative[r.stop_round:] == cumulative[r.stop_round]).all())
        flat_ok &= r.post_detection_messages == 0

    rounds = [r.convergence_round for r in results if r.converged]
    median = statistics.median(rounds)
    elapsed = time.perf_counter() - start
    ok = (within == 50 and ratio_ok and flat_ok and cfg.diameter < median < bound and elapsed < 300)
    report(4, ok, f"{within}/50 within bound {bound}; tier ratio 1:2:3 {ratio_ok}; flat after stop {flat_ok}; "
                  f"median convergence round {median} (floor {cfg.diameter}); "
                  f"median transmissions {statistics.median(r.total_transmissions for r in results)}; "
                  f"{elapsed:.1f}s")


def test_criterion5_hitting_bound(report):
    start = time.perf_counter()
    graphs = {"path n=4": path_graph(4), "random n=8": random_graph_with_diameter(8, 3, seed=21)}
    lines, ok = [], True
    for name, g in graphs.items():
        for l in (1, 3):
            seq = generate_sequence(g, l, None, 0.0, seed=100 + l)
            rep = verify_lemma1(seq, trials=100_000, seed=l, pairs=10)
            worst = min(p.estimate - p.bound for p in rep.pairs)
            ok &= rep.passed and len(rep.pairs) == 10
            lines.append(f"{name} l={l}: bound {float(rep.bound):.3g}, worst slack {worst:.3g}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 180
    report(5, ok, "; ".join(lines) + f"; {elapsed:.1f}s")


def test_criterion6_round_bound_probability(report):
    cfg = load_config(GRID20)
    cfg = replace(cfg, seeds=trial_seeds(1, 120))
    rep = verify_bounds(cfg)
    sigma = math.sqrt(0.9 * 0.1 / rep.trials)
    ok = rep.trials >= 100 and rep.success_fraction >= 0.9 - 3 * sigma
    report(6, ok, f"{rep.within_bound}/{rep.trials} within {rep.max_rounds} rounds "
                  f"(tau {rep.tau}); threshold {0.9 - 3 * sigma:.3f}")


def test_criterion7_micro_oracle(report):
    mismatches, count = [], 0
    for idx, (caps, loads) in enumerate(micro_instances()):
        count += 1
        world = World(ProblemInstance(loads, None, caps), static_sequence(complete_graph(len(caps)), 21), seed=idx)
        if engine_trace(world, 20) != transcribe(caps, loads, 20, idx):
            mismatches.append((caps, loads))
    report(7, not mismatches, f"{count} instances x 20 rounds match the transcription; mismatches {mismatches[:5]}")


def test_criterion8_determinism(tmp_path, report):
    cfg = load_config(GRID20)
    cfg = replace(cfg, seeds=cfg.seeds[:5])
    a = run_experiment(cfg).files
    b = run_experiment(cfg).files
    small = str(ROOT / "configs" / "small.yaml")
    assert main(["run", "--config", small, "--out-dir", str(tmp_path / "x")]) == 0
    assert main(["run", "--config", small, "--out-dir", str(tmp_path / "y")]) == 0
    disk = sorted(p.name for p in (tmp_path / "x").iterdir())
    same_disk = all((tmp_path / "x" / f).read_bytes() == (tmp_path / "y" / f).read_bytes() for f in disk)
    ok = a == b and len(a) == 11 and same_disk and len(disk) == 7
    report(8, ok, f"{len(a)} in-memory and {len(disk)} on-disk CSV files byte-identical across reruns")
