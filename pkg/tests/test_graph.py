import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qalloc.graph import (
    DynamicGraphSequence,
    GraphNotConnected,
    NominalGraph,
    complete_graph,
    cycle_graph,
    diameter,
    generate_sequence,
    neighbors,
    path_graph,
    random_graph_with_diameter,
    union_graph,
    verify_jointly_connected,
)


def floyd_warshall_diameter(n, edges):
    inf = float("inf")
    d = [[0 if i == j else inf for j in range(n)] for i in range(n)]
    for u, v in edges:
        d[u][v] = d[v][u] = 1
    for m in range(n):
        for i in range(n):
            for j in range(n):
                if d[i][m] + d[m][j] < d[i][j]:
                    d[i][j] = d[i][m] + d[m][j]
    return max(max(row) for row in d)


def test_self_loop_rejected():
    with pytest.raises(ValueError):
        NominalGraph(3, [(1, 1)])


def test_diameter_examples():
    assert diameter(path_graph(4)) == 3
    for n in range(2, 8):
        assert diameter(complete_graph(n)) == 1
    g = random_graph_with_diameter(20, 3, seed=11)
    assert g.node_count == 20 and diameter(g) == 3


def test_diameter_disconnected():
    with pytest.raises(GraphNotConnected):
        diameter(NominalGraph(4, [(0, 1), (2, 3)]))


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 50), st.integers(0, 10_000))
def test_diameter_matches_all_pairs_oracle(n, seed):
    rng = np.random.default_rng(seed)
    # random spanning tree plus random chords keeps it connected
    edges = {(int(rng.integers(i)), i) for i in range(1, n)}
    for _ in range(int(rng.integers(0, n))):
        u, v = rng.choice(n, 2, replace=False)
        edges.add((int(min(u, v)), int(max(u, v))))
    g = NominalGraph(n, edges)
    assert diameter(g) == floyd_warshall_diameter(n, g.edges)


def test_union_graph():
    assert union_graph([{(1, 2)}, {(2, 3)}], 4).edges == {(1, 2), (2, 3)}
    e = {(0, 1), (1, 2)}
    assert union_graph([e, e], 3).edges == e
    assert union_graph([], 3).edges == frozenset()


def test_generated_windows_union_to_nominal():
    g = random_graph_with_diameter(12, 3, seed=2)
    seq = generate_sequence(g, 4, 40, 0.1, seed=9)
    for m in range(10):
        rounds = [seq.edges(k) for k in range(4 * m, 4 * m + 4)]
        expected = set()
        for es in rounds:
            expected |= es
        assert union_graph(rounds, 12).edges == expected == g.edges


def test_window_of_one_is_static():
    g = cycle_graph(6)
    seq = generate_sequence(g, 1, 10, 0.0, seed=1)
    assert all(seq.edges(k) == g.edges for k in range(10))


def test_verify_jointly_connected():
    g = path_graph(4)
    full = DynamicGraphSequence(g, 3, [g.edges] * 9)
    assert verify_jointly_connected(full)
    rounds = [g.edges] * 9
    rounds[3:6] = [{(0, 1)}, {(1, 2)}, set()]
    check = verify_jointly_connected(DynamicGraphSequence(g, 3, rounds))
    assert not check
    assert check.violating_window == 1
    assert check.missing_edges == {(2, 3)}
    disconnected = NominalGraph(4, [(0, 1)])
    assert not verify_jointly_connected(DynamicGraphSequence(disconnected, 1, [disconnected.edges]))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 15), st.integers(1, 6), st.floats(0.0, 1.0), st.integers(0, 2**32 - 1))
def test_generate_sequence_satisfies_joint_connectivity(n, l, p, seed):
    g = random_graph_with_diameter(n, 2, seed=seed % 1000) if n > 2 else complete_graph(2)
    seq = generate_sequence(g, l, 10 * l, p, seed)
    assert verify_jointly_connected(seq)
    assert all(seq.edges(k) <= g.edges for k in range(10 * l))


def test_generate_sequence_deterministic_and_sparse():
    g = random_graph_with_diameter(20, 3, seed=11)
    a = generate_sequence(g, 5, 50, 0.0, seed=4)
    b = generate_sequence(g, 5, 50, 0.0, seed=4)
    assert [a.edges(k) for k in range(50)] == [b.edges(k) for k in range(50)]
    assert verify_jointly_connected(a)
    # with p=0 each edge sits in exactly one round per window
    for m in range(10):
        counts = sum(len(a.edges(k)) for k in range(5 * m, 5 * m + 5))
        assert counts == len(g.edges)


def test_generate_sequence_rejects_bad_inputs():
    with pytest.raises(GraphNotConnected):
        generate_sequence(NominalGraph(3, [(0, 1)]), 2, 10, 0.0, seed=0)
    with pytest.raises(ValueError):
        generate_sequence(path_graph(3), 2, 10, 1.5, seed=0)


def test_neighbors_examples():
    g = complete_graph(3)
    seq = DynamicGraphSequence(g, 2, [set(), g.edges])
    assert neighbors(seq, 0, 0) == frozenset()
    assert neighbors(seq, 1, 1) == {0, 2}
    with pytest.raises(IndexError):
        neighbors(seq, 0, 2)


def test_neighbors_symmetric_and_match_scan():
    g = random_graph_with_diameter(15, 3, seed=5)
    seq = generate_sequence(g, 3, 30, 0.2, seed=8)
    for k in range(30):
        es = seq.edges(k)
        for i, j in itertools.product(range(15), repeat=2):
            assert (i in neighbors(seq, j, k)) == (j in neighbors(seq, i, k))
        for j in range(15):
            scan = {v for u, v in es if u == j} | {u for u, v in es if v == j}
            assert neighbors(seq, j, k) == scan


def test_unbounded_sequence_is_stable_across_calls():
    g = path_graph(5)
    seq = generate_sequence(g, 2, None, 0.3, seed=3)
    first = [seq.edges(k) for k in range(0, 400, 7)]
    again = [seq.edges(k) for k in range(0, 400, 7)]
    assert first == again
    assert verify_jointly_connected(seq, windows=200)
