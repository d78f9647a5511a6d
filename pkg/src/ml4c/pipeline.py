"""End-to-end orientation: dataset + skeleton -> CPDAG."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .citest import CiTester, G2Tester, OracleTester, SepsetConfig
from .featurize import EmbeddingBasis, build_vicinity, featurize_context
from .graph import (
    Dag,
    OrientationConflict,
    Pdag,
    Skeleton,
    UnshieldedTriple,
    meek_closure,
    pdag_from_vstructures,
    skeleton_of,
    unshielded_triples,
)
from .learner import DEFAULT_THRESHOLD, UtExample, label_uts
from .synth import DiscreteDataset

log = logging.getLogger(__name__)


class VCandidate(NamedTuple):
    triple: UnshieldedTriple
    score: float


@dataclass(frozen=True)
class RunConfig:
    alpha: float = 0.05
    min_rows_per_dof: float = 5.0
    sepsets: SepsetConfig = field(default_factory=SepsetConfig)
    threshold: float = DEFAULT_THRESHOLD


def _directed(c: VCandidate) -> set[tuple[int, int]]:
    x, t, y = c.triple
    return {(x, t), (y, t)}


def conflicts(a: VCandidate, b: VCandidate) -> bool:
    """True if the two colliders orient some shared edge in opposite directions."""
    da = _directed(a)
    return any((v, u) in da for u, v in _directed(b))


def conflict_resolve(candidates: Sequence[VCandidate]) -> list[VCandidate]:
    """Drop the weakest conflicting candidate until none conflict.

    Candidates are ranked by score, ties by triple order (lower triple
    ranks higher). At each step the lowest-ranked candidate that conflicts
    with a higher-ranked survivor is removed.
    """
    ranked = sorted(candidates, key=lambda c: (-c.score, c.triple))
    alive = list(ranked)
    while True:
        loser = None
        for i in range(len(alive) - 1, -1, -1):
            if any(conflicts(alive[i], alive[j]) for j in range(i)):
                loser = i
                break
        if loser is None:
            break
        log.debug("conflict: dropping %s", alive[loser])
        del alive[loser]
    keep = set(alive)
    return [c for c in candidates if c in keep]


def orient(skel: Skeleton, survivors: Iterable[VCandidate]) -> Pdag:
    return pdag_from_vstructures(skel, [c.triple for c in survivors])


def close_consistent(skel: Skeleton, survivors: Sequence[VCandidate]) -> tuple[Pdag, list[VCandidate]]:
    """Orient and close; fall back to greedy admission if that fails.

    Pairwise-consistent colliders can still close a directed cycle or make
    the Meek rules contradict each other. In that case candidates are added
    best-first and any that break the closure are skipped.
    """
    try:
        return meek_closure(orient(skel, survivors)), list(survivors)
    except OrientationConflict:
        pass
    kept: list[VCandidate] = []
    cpdag = meek_closure(orient(skel, []))
    for c in sorted(survivors, key=lambda c: (-c.score, c.triple)):
        try:
            cpdag = meek_closure(orient(skel, kept + [c]))
        except OrientationConflict:
            log.info("skipping %s: inconsistent with higher-scored colliders", c)
            continue
        kept.append(c)
    keep = set(kept)
    return cpdag, [c for c in survivors if c in keep]


@dataclass
class RunReport:
    cpdag: Pdag
    scores: dict[UnshieldedTriple, float]
    candidates: list[VCandidate]
    survivors: list[VCandidate]
    timing: dict[str, float]


def make_tester(data: DiscreteDataset | None, config: RunConfig, dag: Dag | None = None) -> CiTester:
    if dag is not None:
        return OracleTester(dag)
    if data is None:
        raise ValueError("either a dataset or an oracle DAG is required")
    return G2Tester(data, config.alpha, config.min_rows_per_dof)


def score_uts(skel, uts, classifier, tester, config: RunConfig) -> dict[UnshieldedTriple, float]:
    scores = {}
    basis = getattr(classifier, "basis", None)
    for ut in uts:
        ctx = build_vicinity(skel, ut, tester, config.sepsets)
        if classifier.needs_features:
            scores[ut] = float(classifier.score(featurize_context(ctx, tester, basis)))
        else:
            scores[ut] = float(classifier.score_context(ctx, tester))
    return scores


def run_ml4c_report(
    data: DiscreteDataset | None,
    skel: Skeleton,
    classifier,
    config: RunConfig | None = None,
    tester: CiTester | None = None,
) -> RunReport:
    config = config or RunConfig()
    if data is not None and data.n_cols != skel.n:
        raise ValueError(f"dataset has {data.n_cols} columns, skeleton {skel.n} nodes")
    tester = tester or make_tester(data, config)
    timing = {}
    t0 = time.perf_counter()
    uts = unshielded_triples(skel)
    scores = score_uts(skel, uts, classifier, tester, config)
    t1 = time.perf_counter()
    timing["score"] = t1 - t0
    candidates = [VCandidate(ut, s) for ut, s in scores.items() if s >= config.threshold]
    survivors = conflict_resolve(candidates)
    cpdag, survivors = close_consistent(skel, survivors)
    timing["orient"] = time.perf_counter() - t1
    return RunReport(cpdag, scores, candidates, survivors, timing)


def run_ml4c(
    data: DiscreteDataset | None,
    skel: Skeleton,
    classifier,
    config: RunConfig | None = None,
    tester: CiTester | None = None,
) -> Pdag:
    """Score all UTs, keep those above threshold, resolve conflicts, orient, close."""
    return run_ml4c_report(data, skel, classifier, config, tester).cpdag


def graph_examples(
    dag: Dag,
    data: DiscreteDataset,
    basis: EmbeddingBasis,
    config: RunConfig | None = None,
    provenance: tuple = (),
) -> list[UtExample]:
    config = config or RunConfig()
    skel = skeleton_of(dag)
    tester = make_tester(data, config)
    out = []
    for ut, label in label_uts(dag, skel):
        ctx = build_vicinity(skel, ut, tester, config.sepsets)
        out.append(UtExample(featurize_context(ctx, tester, basis), label, provenance + (tuple(ut),)))
    return out


def build_training_set(
    corpus: Sequence[tuple[Dag, DiscreteDataset]],
    basis: EmbeddingBasis,
    config: RunConfig | None = None,
    corpus_id: str = "",
) -> list[UtExample]:
    examples = []
    for i, (dag, data) in enumerate(corpus):
        examples.extend(graph_examples(dag, data, basis, config, (corpus_id, i)))
    return examples


def examples_to_arrays(examples: Sequence[UtExample]) -> tuple[np.ndarray, np.ndarray]:
    if not examples:
        return np.zeros((0, 0)), np.zeros(0, dtype=int)
    return np.vstack([e.features for e in examples]), np.asarray([e.label for e in examples])


__all__ = [
    "OrientationConflict", "RunConfig", "RunReport", "VCandidate", "build_training_set",
    "close_consistent",
    "conflict_resolve", "conflicts", "examples_to_arrays", "graph_examples", "make_tester",
    "orient", "run_ml4c", "run_ml4c_report", "score_uts",
]
