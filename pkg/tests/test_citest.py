import math
from itertools import chain, combinations

import numpy as np
import pytest
from scipy import special, stats

from ml4c.citest import (
    SEVERITY_CAP,
    G2Tester,
    OracleTester,
    SepsetConfig,
    find_sepsets,
    g2_statistic,
    pc_sets,
    severity,
)
from ml4c.graph import Dag, InvalidNodes, UnshieldedTriple, d_separated, skeleton_of, unshielded_triples
from ml4c.synth import DiscreteDataset
from oracles import random_dag


def _dataset(cols, cards=None):
    rows = np.column_stack(cols).astype(np.int64)
    cards = cards or [int(c.max()) + 1 for c in cols]
    return DiscreteDataset(tuple(f"V{i}" for i in range(len(cols))), tuple(max(c, 2) for c in cards), rows)


def _expand(table):
    """Rows (a, b) reproducing a 2-d count table."""
    a, b = [], []
    for i, row in enumerate(table):
        for j, n in enumerate(row):
            a += [i] * n
            b += [j] * n
    return np.array(a), np.array(b)


def test_g2_two_by_two_by_hand():
    counts = np.array([[[30, 10], [10, 30]]])
    stat, dof = g2_statistic(counts)
    expected = 2 * (2 * 30 * math.log(30 / 20) + 2 * 10 * math.log(10 / 20))
    assert stat == pytest.approx(expected, rel=1e-12)
    assert stat == pytest.approx(20.93, abs=0.01)
    assert dof == 1


def test_g2_matches_scipy_lambda_test():
    rng = np.random.default_rng(3)
    table = rng.integers(1, 40, size=(3, 4))
    stat, dof = g2_statistic(table[None])
    ref = stats.chi2_contingency(table, correction=False, lambda_="log-likelihood")
    assert stat == pytest.approx(ref.statistic, rel=1e-10)
    assert dof == ref.dof


def test_g2_adjusted_dof_drops_empty_rows_and_strata():
    counts = np.zeros((3, 3, 3), dtype=int)
    counts[0] = [[5, 5, 0], [5, 5, 0], [0, 0, 0]]   # 2x2 nonzero -> 1
    counts[1] = [[5, 5, 5], [5, 5, 5], [5, 5, 5]]   # 3x3 -> 4
    # counts[2] is empty -> 0
    assert g2_statistic(counts)[1] == 5


def test_tester_two_by_two():
    a, b = _expand([[30, 10], [10, 30]])
    t = G2Tester(_dataset([a, b]), min_rows_per_dof=1)
    res = t.test(0, 1)
    assert res.dof == 1
    assert res.p_value == pytest.approx(stats.chi2.sf(res.statistic, 1), rel=1e-10)
    assert t.dependency(0, 1) == pytest.approx(res.severity)
    assert t.channels(0, 1) == (pytest.approx(1 - res.p_value), pytest.approx(res.severity))


def test_tester_too_few_rows_per_dof():
    a, b = _expand([[3, 1], [1, 3]])
    t = G2Tester(_dataset([a, b]))   # 8 rows < 5 * 1? no: 8 >= 5, so use 3x3
    assert t.test(0, 1).dof == 1
    a3, b3 = _expand([[2, 1, 1], [1, 2, 1], [1, 1, 2]])
    res = G2Tester(_dataset([a3, b3])).test(0, 1)   # 12 rows < 5 * 4
    assert res.p_value == 1.0 and res.severity == 0.0


def test_tester_conditional_matches_per_stratum_sum():
    rng = np.random.default_rng(0)
    n = 3000
    z = rng.integers(0, 3, n)
    x = (z + rng.integers(0, 2, n)) % 3
    y = (z + rng.integers(0, 2, n)) % 2
    t = G2Tester(_dataset([x, y, z]))
    res = t.test(0, 1, [2])
    total, dof = 0.0, 0
    for k in range(3):
        m = z == k
        tab = np.zeros((3, 2))
        np.add.at(tab, (x[m], y[m]), 1)
        s, d = g2_statistic(tab[None])
        total += s
        dof += d
    assert res.statistic == pytest.approx(total, rel=1e-10)
    assert res.dof == dof
    assert res.p_value == pytest.approx(special.chdtrc(dof, total))


def test_tester_symmetry_and_cache():
    rng = np.random.default_rng(1)
    cols = [rng.integers(0, 3, 500) for _ in range(4)]
    t = G2Tester(_dataset(cols))
    a = t.test(0, 1, [3, 2])
    assert t.test(1, 0, (2, 3)) is a
    assert t.test(1, 0, (2, 3), use_cache=False) == a
    assert t.cache_size() == 1


def test_tester_rejects_bad_queries():
    t = G2Tester(_dataset([np.array([0, 1, 0, 1]), np.array([1, 0, 0, 1])]))
    with pytest.raises(InvalidNodes):
        t.test(0, 0)
    with pytest.raises(InvalidNodes):
        t.test(0, 1, [1])
    with pytest.raises(InvalidNodes):
        t.test(0, 5)


def test_strong_dependence_detected():
    rng = np.random.default_rng(2)
    x = rng.integers(0, 2, 2000)
    y = np.where(rng.random(2000) < 0.9, x, 1 - x)
    t = G2Tester(_dataset([x, y]))
    assert not t.independent(0, 1)
    assert t.dependency(0, 1) > 5


@pytest.mark.parametrize("p, z", [(0.0455, 2.0), (0.3173, 1.0), (0.0027, 3.0), (1.0, 0.0)])
def test_severity_values(p, z):
    assert severity(p) == pytest.approx(z, abs=0.01)


def test_severity_is_normal_quantile_and_capped():
    for p in np.geomspace(1e-10, 1, 50):
        assert severity(p) == pytest.approx(stats.norm.isf(p / 2), abs=1e-8)
    assert severity(0.0) == SEVERITY_CAP
    assert severity(1e-320) <= SEVERITY_CAP
    with pytest.raises(ValueError):
        severity(1.5)


def test_oracle_tester_agrees_with_dsep():
    g = Dag.from_edges(4, [(0, 2), (1, 2), (2, 3)])
    t = OracleTester(g)
    assert t.independent(0, 1)
    assert t.dependency(0, 1, [3]) == 1.0
    assert t.channels(0, 1, [2]) == (1.0, 1.0)
    assert t.test(0, 1).p_value == 1.0
    assert t.test(0, 1, [2]).severity == SEVERITY_CAP


def _brute_sepsets(tester, skel, ut, limit=None):
    x, t, y = ut
    pc_x, pc_y, _ = pc_sets(skel, ut)
    found = set()
    for pool in (pc_x | {t}, pc_y | {t}):
        pool = sorted(pool)
        sizes = range(len(pool) + 1) if limit is None else range(min(limit, len(pool)) + 1)
        for s in chain.from_iterable(combinations(pool, k) for k in sizes):
            if tester.independent(x, y, s):
                found.add(frozenset(s))
    return found


def test_find_sepsets_matches_brute_force():
    rng = np.random.default_rng(5)
    checked = 0
    for _ in range(40):
        g = random_dag(8, 0.35, rng)
        skel = skeleton_of(g)
        tester = OracleTester(g)
        for ut in unshielded_triples(skel):
            got = find_sepsets(tester, skel, ut, SepsetConfig(max_size=None))
            assert set(got.sets) == _brute_sepsets(tester, skel, ut)
            for s in got.sets:
                assert d_separated(g, ut.x, ut.y, s)
            checked += 1
    assert checked > 50


def test_find_sepsets_chain_and_collider():
    chain_g = Dag.from_edges(3, [(0, 1), (1, 2)])
    skel = skeleton_of(chain_g)
    ut = UnshieldedTriple(0, 1, 2)
    s = find_sepsets(OracleTester(chain_g), skel, ut)
    assert s.sets == (frozenset({1}),)
    assert s.provenance == ("xy",)
    collider = Dag.from_edges(3, [(0, 1), (2, 1)])
    assert find_sepsets(OracleTester(collider), skel, ut).sets == (frozenset(),)


def test_find_sepsets_size_limit():
    # pool of 10 with max_size 1 only explores size <= 1
    hub = Dag.from_edges(13, [(0, 1), (2, 1)] + [(k, 0) for k in range(3, 13)])
    skel = skeleton_of(hub)
    ut = UnshieldedTriple(0, 1, 2)
    got = find_sepsets(OracleTester(hub), skel, ut, SepsetConfig(max_size=1, exhaustive_below=8))
    assert all(len(s) <= 1 for s in got.sets)
    assert SepsetConfig(4, 8).limit(8) == 8 and SepsetConfig(4, 8).limit(9) == 4
    assert SepsetConfig(None).limit(30) == 30


def test_find_sepsets_rejects_non_ut():
    g = Dag.from_edges(3, [(0, 1), (1, 2), (0, 2)])
    with pytest.raises(InvalidNodes):
        find_sepsets(OracleTester(g), skeleton_of(g), UnshieldedTriple(0, 1, 2))
