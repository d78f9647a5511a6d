from itertools import combinations

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from ml4c.graph import (
    CycleDetected,
    Dag,
    GraphError,
    InvalidNodes,
    OrientationConflict,
    Pdag,
    Skeleton,
    UnshieldedTriple,
    cpdag_of,
    d_separated,
    graph_from_dict,
    graph_to_dict,
    meek_closure,
    pdag_from_vstructures,
    skeleton_of,
    topological_order,
    unshielded_triples,
    v_structures_of,
)
from oracles import cpdag_by_enumeration, dsep_by_paths, random_dag


@st.composite
def dags(draw, max_nodes=7):
    d = draw(st.integers(2, max_nodes))
    seed = draw(st.integers(0, 2**32 - 1))
    p = draw(st.floats(0.1, 0.7))
    return random_dag(d, p, np.random.default_rng(seed))


def test_dag_rejects_cycles():
    with pytest.raises(CycleDetected):
        Dag.from_edges(3, [(0, 1), (1, 2), (2, 0)])
    with pytest.raises(CycleDetected):
        Dag.from_edges(2, [(0, 1), (1, 0)])
    with pytest.raises(GraphError):
        Dag.from_edges(2, [(0, 0)])


def test_topological_order_respects_edges():
    g = Dag.from_edges(4, [(3, 1), (1, 0), (2, 0)])
    order = topological_order(g)
    pos = {v: i for i, v in enumerate(order)}
    assert all(pos[u] < pos[v] for u, v in g.edges)


def test_unshielded_triples_canonical():
    # chain 0-1-2 plus 1-3 and shielded triangle 2-3
    skel = Skeleton.from_edges(4, [(0, 1), (1, 2), (1, 3), (2, 3)])
    assert unshielded_triples(skel) == [UnshieldedTriple(0, 1, 2), UnshieldedTriple(0, 1, 3)]
    assert UnshieldedTriple.make(5, 1, 2) == (2, 1, 5)


def test_collider_and_chain_dsep():
    collider = Dag.from_edges(3, [(0, 1), (2, 1)])
    assert d_separated(collider, 0, 2, [])
    assert not d_separated(collider, 0, 2, [1])
    chain = Dag.from_edges(3, [(0, 1), (1, 2)])
    assert not d_separated(chain, 0, 2, [])
    assert d_separated(chain, 0, 2, [1])


def test_descendant_of_collider_opens_path():
    g = Dag.from_edges(4, [(0, 1), (2, 1), (1, 3)])
    assert not d_separated(g, 0, 2, [3])


def test_dsep_rejects_bad_queries():
    g = Dag.from_edges(3, [(0, 1)])
    with pytest.raises(InvalidNodes):
        d_separated(g, 0, 0)
    with pytest.raises(InvalidNodes):
        d_separated(g, 0, 1, [1])


@settings(max_examples=60, deadline=None)
@given(dags(6))
def test_dsep_matches_path_enumeration(g):
    for x, y in combinations(range(g.n), 2):
        rest = [v for v in range(g.n) if v not in (x, y)]
        for k in range(min(2, len(rest)) + 1):
            for z in combinations(rest, k):
                assert d_separated(g, x, y, z) == dsep_by_paths(g, x, y, z)


def test_vstructures_simple():
    g = Dag.from_edges(4, [(0, 2), (1, 2), (2, 3)])
    assert v_structures_of(g) == {UnshieldedTriple(0, 2, 1)}


def test_cpdag_of_collider_chain():
    # 0 -> 2 <- 1, 2 -> 3 forced by R1
    g = Dag.from_edges(4, [(0, 2), (1, 2), (2, 3)])
    c = cpdag_of(g)
    assert c.directed_edges == {(0, 2), (1, 2), (2, 3)}
    assert not c.undirected_edges


def test_cpdag_of_chain_is_undirected():
    c = cpdag_of(Dag.from_edges(3, [(0, 1), (1, 2)]))
    assert c.undirected_edges == {(0, 1), (1, 2)}


def test_meek_r2():
    # a->c->b with a-b undirected must orient a->b
    p = Pdag(["a", "b", "c"], [(0, 2), (2, 1)], [(0, 1)])
    assert (0, 1) in meek_closure(p).directed_edges


def test_meek_r3():
    # a-c->b, a-d->b, c,d nonadjacent, a-b  =>  a->b
    p = Pdag(["a", "b", "c", "d"], [(2, 1), (3, 1)], [(0, 1), (0, 2), (0, 3)])
    assert (0, 1) in meek_closure(p).directed_edges


def test_meek_r4():
    # a-c, c->d->b, a adjacent to d, c and b nonadjacent, a-b  =>  a->b
    a, b, c, d = 0, 1, 2, 3
    p = Pdag(["a", "b", "c", "d"], [(c, d), (d, b)], [(a, b), (a, c), (a, d)])
    assert (a, b) in meek_closure(p).directed_edges


def test_pdag_from_vstructures_conflict():
    skel = Skeleton.from_edges(4, [(0, 1), (1, 2), (2, 3)])
    with pytest.raises(OrientationConflict):
        pdag_from_vstructures(skel, [UnshieldedTriple(0, 1, 2), UnshieldedTriple(1, 2, 3)])


@settings(max_examples=80, deadline=None)
@given(dags(7))
def test_cpdag_matches_enumerated_class(g):
    assume(len(g.edges) <= 11)
    assert cpdag_of(g) == cpdag_by_enumeration(g)


@settings(max_examples=50, deadline=None)
@given(dags(8))
def test_cpdag_contains_dag_orientations(g):
    c = cpdag_of(g)
    assert c.directed_edges <= g.edges
    assert c.skeleton() == skeleton_of(g)
    assert meek_closure(c) == c


def test_json_round_trip():
    g = Dag(["a", "b", "c"], [(0, 1), (2, 1)])
    assert graph_from_dict(graph_to_dict(g), "dag") == g
    p = cpdag_of(Dag.from_edges(3, [(0, 1), (1, 2)]))
    assert graph_from_dict(graph_to_dict(p), "pdag") == p


def test_json_rejects_unknown_fields_and_nodes():
    with pytest.raises(GraphError):
        graph_from_dict({"nodes": ["a"], "weights": []})
    with pytest.raises(GraphError):
        graph_from_dict({"nodes": ["a"], "directed_edges": [["a", "zz"]]})
