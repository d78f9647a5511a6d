import numpy as np
import pytest
from scipy import integrate, stats

from ml4c.graph import Dag, skeleton_of
from ml4c.synth import (
    BayesNet,
    Cpt,
    DiscreteDataset,
    SynthConfig,
    build_corpus,
    forward_sample,
    gen_bayesnet,
    gen_cardinalities,
    max_peers,
    random_dag,
    sample_cardinality,
)


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(node_count_range=(1, 5))
    with pytest.raises(ValueError):
        SynthConfig(node_count_range=(5, 10), sparsity_range=(1.0, 6.0))
    with pytest.raises(ValueError):
        SynthConfig(graph_model="BA")
    with pytest.raises(ValueError):
        SynthConfig(sample_size=0)


@pytest.mark.parametrize("model", ["ER", "SF"])
def test_random_dag_edge_count(model):
    rng = np.random.default_rng(0)
    for d in (5, 10, 20):
        for s in (1.2, 1.5, 1.7):
            m = int(round(s * d))
            g = random_dag(d, m, model, rng)
            assert isinstance(g, Dag)
            assert len(g.edges) == m


def test_sf_has_heavier_degree_tail_than_er():
    rng = np.random.default_rng(1)
    top = {"ER": [], "SF": []}
    for model in top:
        for _ in range(200):
            g = random_dag(20, 34, model, rng)
            deg = np.bincount(np.array(list(g.edges)).ravel(), minlength=20)
            top[model].append(deg.max())
    assert np.mean(top["SF"]) > np.mean(top["ER"]) + 1


def test_max_peers():
    g = Dag.from_edges(4, [(0, 2), (1, 2), (3, 2), (0, 1)])
    assert max_peers(g, 0) == 3
    assert max_peers(g, 2) == 1


def _rounded_halfnormal_pmf(k, sigma):
    tail = stats.norm.sf(0, scale=sigma)   # P(x >= mean) = 1/2
    lo, hi = max(k - 0.5, 2.0), k + 0.5
    mass, _ = integrate.quad(lambda x: stats.norm.pdf(x, 2.0, sigma), lo, hi)
    return mass / tail


@pytest.mark.parametrize("m", [1, 2])
def test_cardinality_distribution_matches_integration(m):
    rng = np.random.default_rng(7)
    draws = np.array([sample_cardinality(m, rng) for _ in range(40_000)])
    assert draws.min() >= 2
    for k in (2, 3, 4):
        expected = _rounded_halfnormal_pmf(k, 1.5 / m)
        se = np.sqrt(expected * (1 - expected) / len(draws))
        assert abs((draws == k).mean() - expected) < 5 * se + 1e-3


def test_gen_cardinalities_bounds():
    rng = np.random.default_rng(2)
    g = random_dag(12, 18, "ER", rng)
    cards = gen_cardinalities(g, rng)
    assert len(cards) == 12 and min(cards) >= 2


def test_cpt_rows_are_distributions():
    rng = np.random.default_rng(3)
    g = random_dag(8, 12, "SF", rng)
    bn = gen_bayesnet(g, rng)
    for cpt in bn.cpts:
        rows = cpt.rows()
        assert np.allclose(rows.sum(axis=1), 1.0)
        assert (rows >= 0).all()
        assert set(cpt.parent_order) == g.parents(cpt.node)


def test_cpt_rejects_bad_rows():
    with pytest.raises(ValueError):
        Cpt(0, 2, (), np.array([0.5, 0.6]))


def _two_node_net():
    g = Dag(["a", "b"], [(0, 1)])
    a = Cpt(0, 2, (), np.array([0.3, 0.7]))
    b = Cpt(1, 3, (0,), np.array([[0.1, 0.2, 0.7], [0.5, 0.5, 0.0]]))
    return BayesNet(g, (2, 3), (a, b))


def test_forward_sample_root_binomial():
    bn = _two_node_net()
    n = 50_000
    data = forward_sample(bn, n, np.random.default_rng(0))
    freq = (data.rows[:, 0] == 0).mean()
    # binomial 99.9% band
    assert abs(freq - 0.3) < 3.3 * np.sqrt(0.3 * 0.7 / n)


def test_forward_sample_conditionals():
    bn = _two_node_net()
    data = forward_sample(bn, 100_000, np.random.default_rng(1))
    a, b = data.rows[:, 0], data.rows[:, 1]
    for pa in (0, 1):
        freq = np.bincount(b[a == pa], minlength=3) / (a == pa).sum()
        assert np.allclose(freq, bn.cpts[1].probs[pa], atol=0.01)
    # zero-probability state never appears
    assert not ((a == 1) & (b == 2)).any()


def test_forward_sample_deterministic():
    bn = _two_node_net()
    d1 = forward_sample(bn, 1000, np.random.default_rng(5))
    d2 = forward_sample(bn, 1000, np.random.default_rng(5))
    assert d1 == d2


def test_dataset_validation():
    with pytest.raises(ValueError):
        DiscreteDataset(("a",), (2,), np.array([[0], [2]]))


def test_corpus_reproducible_and_in_range():
    cfg = SynthConfig(node_count_range=(5, 8), sparsity_range=(1.2, 1.7), sample_size=200, seed=11)
    c1 = build_corpus(cfg, 6)
    c2 = build_corpus(cfg, 6)
    for a, b in zip(c1, c2):
        assert a.dag == b.dag and a.data == b.data and a.seed == b.seed
    for item in c1:
        assert 5 <= item.dag.n <= 8
        assert item.data.n_rows == 200
        assert item.data.column_names == item.dag.node_names
        assert round(1.2 * item.dag.n) <= len(item.dag.edges) <= round(1.7 * item.dag.n)
        assert skeleton_of(item.dag).n == item.dag.n
    # different top-level seed gives a different corpus
    other = build_corpus(cfg, 6, seed=12)
    assert any(a.dag != b.dag for a, b in zip(c1, other))
