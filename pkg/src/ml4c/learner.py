"""UT classifiers: ground-truth labels, fixed predicates and the trained ensemble."""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import boosting
from .boosting import BoostParams, BoostedTrees, DegenerateLabels
from .citest import CiTester
from .featurize import N_FEATURES, SCHEMA_VERSION, EmbeddingBasis, VicinityContext, iter_queries
from .graph import Dag, Skeleton, UnshieldedTriple, skeleton_of, unshielded_triples

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.1

__all__ = [
    "DEFAULT_THRESHOLD", "DegenerateLabels", "PredicateClassifier", "PredicateKind",
    "SchemaMismatch", "SkeletonMismatch", "TreeEnsembleModel", "UtExample",
    "label_uts", "predicate_score", "train",
]


class SkeletonMismatch(ValueError):
    pass


class SchemaMismatch(ValueError):
    pass


def label_uts(dag: Dag, skel: Skeleton) -> list[tuple[UnshieldedTriple, int]]:
    """Every UT of ``skel`` with label 1 iff it is a collider in ``dag``."""
    if skel.n != dag.n or skel.edges != skeleton_of(dag).edges:
        raise SkeletonMismatch("skeleton is not the skeleton of the DAG")
    return [
        (ut, int((ut.x, ut.t) in dag.edges and (ut.y, ut.t) in dag.edges))
        for ut in unshielded_triples(skel)
    ]


@dataclass(frozen=True)
class UtExample:
    features: np.ndarray = field(repr=False)
    label: int
    provenance: tuple = ()


# -- predicates ---------------------------------------------------------------------

class PredicateKind(str, enum.Enum):
    STRONG_CPC = "STRONG_CPC"
    STRONG_MPC = "STRONG_MPC"
    STRONG_GMB = "STRONG_GMB"
    WEAK_1 = "WEAK_1"
    WEAK_2 = "WEAK_2"
    WEAK_3 = "WEAK_3"


_NEEDS_SEPSETS = {
    PredicateKind.STRONG_CPC, PredicateKind.STRONG_MPC,
    PredicateKind.STRONG_GMB, PredicateKind.WEAK_3,
}


def _olp_t(ctx: VicinityContext) -> float:
    sets = ctx.sepsets.sets
    return sum(ctx.t in s for s in sets) / len(sets)


def _all_dependent(tester, a_set, b_set, ensemble) -> bool:
    # vacuously true when no valid query exists
    return all(tester.dependency(a, b, z) > 0 for a, b, z in iter_queries(a_set, b_set, ensemble))


def predicate_score(kind: PredicateKind | str, ctx: VicinityContext, tester: CiTester) -> int:
    """Evaluate one fixed v-structure rule on a vicinity; returns 0 or 1.

    Rules that read the sepsets return 0 when none were found. WEAK_2 also
    returns 0 for an empty PC_T, since there is nothing to condition on.
    """
    kind = PredicateKind(kind)
    x, t, y = ctx.ut
    if kind in _NEEDS_SEPSETS and not ctx.sepsets.sets:
        log.debug("no sepsets for %s; %s falls back to 0", ctx.ut, kind.value)
        return 0
    if kind is PredicateKind.STRONG_CPC:
        return int(_olp_t(ctx) == 0)
    if kind is PredicateKind.STRONG_MPC:
        return int(_olp_t(ctx) < 0.5)
    if kind is PredicateKind.STRONG_GMB:
        with_t = [s | {t} for s in ctx.sepsets.sets]
        return int(_olp_t(ctx) < 1 and _all_dependent(tester, [x], [y], with_t))
    if kind is PredicateKind.WEAK_1:
        return int(tester.dependency(x, y, {t}) > 0)
    if kind is PredicateKind.WEAK_2:
        if not ctx.pc_t:
            return 0
        return int(all(tester.dependency(x, y, {v}) == 0 for v in ctx.pc_t))
    if kind is PredicateKind.WEAK_3:
        with_t = [s | {t} for s in ctx.sepsets.sets]
        return int(_all_dependent(tester, sorted(ctx.pc_x), sorted(ctx.pc_y), with_t))
    raise AssertionError(kind)


@dataclass(frozen=True)
class PredicateClassifier:
    kind: PredicateKind
    needs_features = False

    def __post_init__(self):
        object.__setattr__(self, "kind", PredicateKind(self.kind))

    def score_context(self, ctx: VicinityContext, tester: CiTester) -> float:
        return float(predicate_score(self.kind, ctx, tester))


# -- trained ensemble ------------------------------------------------------------------

@dataclass
class TreeEnsembleModel:
    """Boosted trees plus the embedding basis their features were built with."""

    booster: BoostedTrees
    basis: EmbeddingBasis
    schema_version: str = SCHEMA_VERSION
    n_features: int = N_FEATURES
    needs_features = True

    @property
    def trees(self):
        return self.booster.trees

    def score(self, features) -> np.ndarray | float:
        X = np.asarray(features, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n_features or self.schema_version != SCHEMA_VERSION:
            raise SchemaMismatch(
                f"model expects {self.n_features} features ({self.schema_version}), "
                f"got {X.shape[1]} ({SCHEMA_VERSION})"
            )
        s = self.booster.predict_proba(X)
        return float(s[0]) if single else s

    def to_dict(self) -> dict:
        return {
            "format": "ml4c-model",
            "schema_version": self.schema_version,
            "n_features": self.n_features,
            "basis": self.basis.to_dict(),
            "booster": self.booster.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TreeEnsembleModel":
        if doc.get("format") != "ml4c-model":
            raise SchemaMismatch("not an ml4c model document")
        if doc["schema_version"] != SCHEMA_VERSION:
            raise SchemaMismatch(f"unsupported feature schema {doc['schema_version']!r}")
        return cls(
            BoostedTrees.from_dict(doc["booster"]),
            EmbeddingBasis.from_dict(doc["basis"]),
            doc["schema_version"],
            int(doc["n_features"]),
        )


def train(
    examples: Sequence[UtExample],
    basis: EmbeddingBasis,
    params: BoostParams | None = None,
) -> TreeEnsembleModel:
    if not examples:
        raise DegenerateLabels("no training examples")
    X = np.vstack([e.features for e in examples])
    y = np.asarray([e.label for e in examples], dtype=float)
    return TreeEnsembleModel(boosting.fit(X, y, params), basis)


def score(model, fv) -> float:
    """Score one feature vector with a trained model."""
    return model.score(fv)
