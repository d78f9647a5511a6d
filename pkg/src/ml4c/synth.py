"""Random Bayesian-network synthesis and forward sampling.

All randomness comes from ``numpy.random.Generator`` (PCG64). Corpora are
reproducible from one integer seed: per-graph seeds are drawn from the
top-level generator and recorded, so any single graph can be rebuilt from
its own seed with :func:`build_graph`.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .graph import Dag, topological_order


@dataclass(frozen=True)
class Cpt:
    """P(node | parents) as a dense array.

    ``probs`` has shape ``(*parent_cards, cardinality)`` with parent axes in
    ``parent_order``; ``table`` exposes the same content keyed by the
    parent-value tuple.
    """

    node: int
    cardinality: int
    parent_order: tuple[int, ...]
    probs: np.ndarray = field(repr=False, compare=False)

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != len(self.parent_order) + 1 or p.shape[-1] != self.cardinality:
            raise ValueError(f"CPT of node {self.node} has shape {p.shape}")
        if (p < 0).any() or not np.allclose(p.sum(axis=-1), 1.0, rtol=0, atol=1e-9):
            raise ValueError(f"CPT rows of node {self.node} are not distributions")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def table(self) -> dict[tuple[int, ...], np.ndarray]:
        return {idx: self.probs[idx] for idx in itertools.product(*map(range, self.probs.shape[:-1]))}

    def rows(self) -> np.ndarray:
        """All rows flattened to ``(n_configs, cardinality)``, C order over parents."""
        return self.probs.reshape(-1, self.cardinality)


@dataclass(frozen=True)
class BayesNet:
    dag: Dag
    cardinalities: tuple[int, ...]
    cpts: tuple[Cpt, ...]
    state_names: tuple[tuple[str, ...], ...] | None = None

    def __post_init__(self):
        cards = tuple(int(c) for c in self.cardinalities)
        object.__setattr__(self, "cardinalities", cards)
        if len(cards) != self.dag.n or len(self.cpts) != self.dag.n:
            raise ValueError("one cardinality and one CPT per node required")
        for v, cpt in enumerate(self.cpts):
            if cpt.node != v or cpt.cardinality != cards[v]:
                raise ValueError(f"CPT {v} does not match node/cardinality")
            if set(cpt.parent_order) != self.dag.parents(v):
                raise ValueError(f"CPT {v} parents differ from the DAG")
            expect = tuple(cards[p] for p in cpt.parent_order) + (cards[v],)
            if cpt.probs.shape != expect:
                raise ValueError(f"CPT {v} has shape {cpt.probs.shape}, expected {expect}")


@dataclass(frozen=True)
class DiscreteDataset:
    column_names: tuple[str, ...]
    cardinalities: tuple[int, ...]
    rows: np.ndarray = field(repr=False, compare=False)

    def __post_init__(self):
        rows = np.asarray(self.rows)
        if rows.ndim != 2 or rows.shape[1] != len(self.column_names):
            raise ValueError("rows must be n_rows x n_cols")
        if len(self.cardinalities) != rows.shape[1]:
            raise ValueError("one cardinality per column required")
        if not np.issubdtype(rows.dtype, np.integer):
            raise ValueError("dataset cells must be integer codes")
        cards = np.asarray(self.cardinalities)
        if rows.size and ((rows < 0).any() or (rows >= cards).any()):
            raise ValueError("cell value outside column cardinality")
        object.__setattr__(self, "column_names", tuple(self.column_names))
        object.__setattr__(self, "cardinalities", tuple(int(c) for c in self.cardinalities))
        rows = rows.astype(np.int64, copy=False)
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    @property
    def n_cols(self) -> int:
        return self.rows.shape[1]

    def __eq__(self, other):
        if not isinstance(other, DiscreteDataset):
            return NotImplemented
        return (
            self.column_names == other.column_names
            and self.cardinalities == other.cardinalities
            and np.array_equal(self.rows, other.rows)
        )

    __hash__ = None


@dataclass(frozen=True)
class SynthConfig:
    node_count_range: tuple[int, int] = (10, 20)
    sparsity_range: tuple[float, float] = (1.2, 1.7)
    graph_model: Literal["ER", "SF", "mixed"] = "mixed"
    sample_size: int = 10_000
    dirichlet_alpha_range: tuple[float, float] = (0.1, 1.0)
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.node_count_range
        if not (isinstance(lo, int) and isinstance(hi, int)) or lo < 2 or hi < lo:
            raise ValueError(f"invalid node_count_range {self.node_count_range}")
        s_lo, s_hi = self.sparsity_range
        if not 0 < s_lo <= s_hi or s_hi >= lo:
            raise ValueError(f"sparsity_range {self.sparsity_range} must lie in (0, node_count)")
        if self.graph_model not in ("ER", "SF", "mixed"):
            raise ValueError(f"unknown graph_model {self.graph_model!r}")
        if self.sample_size < 1:
            raise ValueError("sample_size must be positive")
        a_lo, a_hi = self.dirichlet_alpha_range
        if not 0 < a_lo <= a_hi:
            raise ValueError(f"invalid dirichlet_alpha_range {self.dirichlet_alpha_range}")


# -- graph structure ------------------------------------------------------------

def _er_skeleton(d: int, m: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    pairs = list(itertools.combinations(range(d), 2))
    m = min(m, len(pairs))
    pick = rng.choice(len(pairs), size=m, replace=False)
    return [pairs[i] for i in sorted(pick)]


def _sf_skeleton(d: int, m: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Preferential attachment with per-node attachment counts summing to m.

    Every new node attaches ``m // (d-1)`` edges; ``m % (d-1)`` randomly
    chosen nodes attach one more. Counts a node cannot place (node i has
    only i predecessors) roll over to later nodes; anything still left is
    added as uniform random extra edges.
    """
    max_edges = d * (d - 1) // 2
    m = min(m, max_edges)
    base, rem = divmod(m, d - 1)
    quota = np.full(d, base, dtype=int)
    quota[0] = 0
    if rem:
        quota[1 + rng.choice(d - 1, size=rem, replace=False)] += 1

    degree = np.zeros(d)
    edges: set[tuple[int, int]] = set()
    carry = 0
    for i in range(1, d):
        want = quota[i] + carry
        k = min(want, i)
        carry = want - k
        w = degree[:i] + 1.0
        targets = rng.choice(i, size=k, replace=False, p=w / w.sum())
        for j in targets:
            edges.add((int(j), i))
            degree[j] += 1
            degree[i] += 1
    if carry:
        free = [p for p in itertools.combinations(range(d), 2) if p not in edges]
        for idx in rng.choice(len(free), size=min(carry, len(free)), replace=False):
            edges.add(free[idx])
    return sorted(edges)


def random_dag(d: int, n_edges: int, model: str, rng: np.random.Generator) -> Dag:
    """Skeleton from ER/SF, oriented along a random permutation."""
    if model == "ER":
        skel = _er_skeleton(d, n_edges, rng)
    elif model == "SF":
        skel = _sf_skeleton(d, n_edges, rng)
    else:
        raise ValueError(f"unknown graph model {model!r}")
    rank = rng.permutation(d)
    return Dag.from_edges(d, [(a, b) if rank[a] < rank[b] else (b, a) for a, b in skel])


def _draw_structure(config: SynthConfig, rng: np.random.Generator) -> tuple[Dag, str]:
    lo, hi = config.node_count_range
    d = int(rng.integers(lo, hi + 1))
    sparsity = float(rng.uniform(*config.sparsity_range))
    model = config.graph_model
    if model == "mixed":
        model = "ER" if rng.random() < 0.5 else "SF"
    return random_dag(d, int(round(sparsity * d)), model, rng), model


def gen_dag(config: SynthConfig, rng: np.random.Generator) -> Dag:
    """Node count and sparsity drawn from ``config``; edges = round(sparsity * d)."""
    return _draw_structure(config, rng)[0]


# -- parameters -----------------------------------------------------------------

def max_peers(dag: Dag, v: int) -> int:
    """Largest in-degree among the children of v; 1 for childless nodes."""
    return max((len(dag.parents(c)) for c in dag.children(v)), default=1)


def sample_cardinality(m: int, rng: np.random.Generator) -> int:
    sigma = 1.5 / m
    while True:
        x = rng.normal(2.0, sigma)
        if x >= 2.0:
            return int(np.rint(x))


def gen_cardinalities(dag: Dag, rng: np.random.Generator) -> list[int]:
    cards = [0] * dag.n
    for v in topological_order(dag):
        cards[v] = sample_cardinality(max_peers(dag, v), rng)
    return cards


def _dirichlet_rows(alpha: float, k: int, rows: int, rng: np.random.Generator) -> np.ndarray:
    p = rng.dirichlet(np.full(k, alpha), size=rows)
    bad = ~np.isfinite(p).all(axis=1) | (p.sum(axis=1) <= 0)
    while bad.any():  # tiny alpha can underflow every coordinate
        p[bad] = rng.dirichlet(np.full(k, alpha), size=int(bad.sum()))
        bad = ~np.isfinite(p).all(axis=1) | (p.sum(axis=1) <= 0)
    return p / p.sum(axis=1, keepdims=True)


def gen_cpts(
    dag: Dag,
    cardinalities: Sequence[int],
    rng: np.random.Generator,
    alpha_range: tuple[float, float] = (0.1, 1.0),
) -> list[Cpt]:
    """One symmetric-Dirichlet row per parent configuration, alpha drawn per node."""
    if min(cardinalities, default=2) < 2:
        raise ValueError("cardinalities must be >= 2")
    cpts: list[Cpt | None] = [None] * dag.n
    for v in topological_order(dag):
        parents = tuple(sorted(dag.parents(v)))
        shape = tuple(cardinalities[p] for p in parents)
        alpha = float(rng.uniform(*alpha_range))
        rows = _dirichlet_rows(alpha, cardinalities[v], math.prod(shape), rng)
        cpts[v] = Cpt(v, cardinalities[v], parents, rows.reshape(*shape, cardinalities[v]))
    return cpts


def gen_bayesnet(dag: Dag, rng: np.random.Generator, alpha_range=(0.1, 1.0)) -> BayesNet:
    cards = gen_cardinalities(dag, rng)
    return BayesNet(dag, tuple(cards), tuple(gen_cpts(dag, cards, rng, alpha_range)))


# -- sampling -------------------------------------------------------------------

def forward_sample(bn: BayesNet, n: int, rng: np.random.Generator) -> DiscreteDataset:
    """Ancestral sampling, one node (column) at a time in topological order."""
    if n < 1:
        raise ValueError("n must be >= 1")
    cols = np.zeros((bn.dag.n, n), dtype=np.int64)
    for v in topological_order(bn.dag):
        cpt = bn.cpts[v]
        config = np.zeros(n, dtype=np.int64)
        for p in cpt.parent_order:
            config = config * bn.cardinalities[p] + cols[p]
        cdf = np.cumsum(cpt.rows(), axis=1)[config]
        u = rng.random(n)
        cols[v] = np.minimum((u[:, None] >= cdf).sum(axis=1), cpt.cardinality - 1)
        # zero-probability states must never be drawn by float round-off
        cols[v] = _repair_zero_mass(cols[v], cpt.rows()[config])
    return DiscreteDataset(bn.dag.node_names, bn.cardinalities, np.ascontiguousarray(cols.T))


def _repair_zero_mass(values: np.ndarray, probs: np.ndarray) -> np.ndarray:
    bad = probs[np.arange(len(values)), values] <= 0
    if bad.any():
        values = values.copy()
        values[bad] = probs[bad].argmax(axis=1)
    return values


# -- corpora --------------------------------------------------------------------

@dataclass(frozen=True)
class CorpusItem:
    seed: int
    model: str
    dag: Dag
    bn: BayesNet
    data: DiscreteDataset

    def manifest_entry(self) -> dict:
        return {
            "seed": self.seed,
            "model": self.model,
            "d": self.dag.n,
            "n_edges": len(self.dag.edges),
            "n_rows": self.data.n_rows,
        }


def build_graph(config: SynthConfig, seed: int) -> CorpusItem:
    rng = np.random.default_rng(seed)
    dag, model = _draw_structure(config, rng)
    bn = gen_bayesnet(dag, rng, config.dirichlet_alpha_range)
    data = forward_sample(bn, config.sample_size, rng)
    return CorpusItem(seed, model, dag, bn, data)


def graph_seeds(seed: int, n_graphs: int) -> list[int]:
    rng = np.random.default_rng(seed)
    return [int(s) for s in rng.integers(0, 2**63 - 1, size=n_graphs)]


def build_corpus(config: SynthConfig, n_graphs: int, seed: int | None = None) -> list[CorpusItem]:
    """``n_graphs`` independent (graph, dataset) pairs from ``config.seed``."""
    if n_graphs < 0:
        raise ValueError("n_graphs must be >= 0")
    top = config.seed if seed is None else seed
    return [build_graph(config, s) for s in graph_seeds(top, n_graphs)]
