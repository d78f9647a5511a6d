import json

import numpy as np
import pytest

from ml4c.boosting import BoostedTrees, BoostParams, DegenerateLabels
from ml4c.citest import OracleTester, SepsetConfig
from ml4c.featurize import N_FEATURES, EmbeddingBasis, build_vicinity
from ml4c.graph import Dag, Skeleton, UnshieldedTriple, skeleton_of
from ml4c.learner import (
    PredicateClassifier,
    PredicateKind,
    SchemaMismatch,
    SkeletonMismatch,
    TreeEnsembleModel,
    UtExample,
    label_uts,
    predicate_score,
    score,
    train,
)
from oracles import random_dag

BASIS = EmbeddingBasis.from_seed(0)
UT = UnshieldedTriple(0, 1, 2)


def _ctx(dag, ut=UT):
    return build_vicinity(skeleton_of(dag), ut, OracleTester(dag), SepsetConfig(max_size=None))


def test_label_uts():
    g = Dag.from_edges(4, [(0, 1), (2, 1), (1, 3)])
    labels = dict(label_uts(g, skeleton_of(g)))
    assert labels[UT] == 1
    assert labels[UnshieldedTriple(0, 1, 3)] == 0
    with pytest.raises(SkeletonMismatch):
        label_uts(g, Skeleton.from_edges(4, [(0, 1)]))


@pytest.mark.parametrize("kind", ["STRONG_CPC", "STRONG_MPC", "STRONG_GMB", "WEAK_1"])
def test_predicates_on_collider_and_chain(kind):
    collider = Dag.from_edges(3, [(0, 1), (2, 1)])
    chain = Dag.from_edges(3, [(0, 1), (1, 2)])
    assert predicate_score(kind, _ctx(collider), OracleTester(collider)) == 1
    assert predicate_score(kind, _ctx(chain), OracleTester(chain)) == 0


def test_weak_2_needs_pc_t():
    collider = Dag.from_edges(3, [(0, 1), (2, 1)])
    assert predicate_score("WEAK_2", _ctx(collider), OracleTester(collider)) == 0
    # chain with a spare neighbour of T: conditioning on it alone leaves X~Y open
    g = Dag.from_edges(4, [(0, 1), (1, 2), (1, 3)])
    assert predicate_score("WEAK_2", _ctx(g), OracleTester(g)) == 0
    # collider with a third parent of T: conditioning on it keeps X, Y separated
    g2 = Dag.from_edges(4, [(0, 1), (2, 1), (3, 1)])
    assert predicate_score("WEAK_2", _ctx(g2), OracleTester(g2)) == 1


def test_weak_3_vacuous_without_pc_sets():
    collider = Dag.from_edges(3, [(0, 1), (2, 1)])
    assert predicate_score("WEAK_3", _ctx(collider), OracleTester(collider)) == 1


def test_predicates_without_sepsets_fall_back_to_zero():
    # X and Y connected through a second path that no PC subset blocks
    g = Dag.from_edges(5, [(0, 1), (2, 1), (0, 3), (3, 4), (4, 2)])
    skel = Skeleton.from_edges(5, [(0, 1), (1, 2), (0, 3), (3, 4), (2, 4)])
    tester = OracleTester(g)
    ctx = build_vicinity(skel, UT, tester, SepsetConfig(max_size=0, exhaustive_below=0))
    assert not ctx.sepsets.sets
    for kind in ("STRONG_CPC", "STRONG_MPC", "STRONG_GMB", "WEAK_3"):
        assert predicate_score(kind, ctx, tester) == 0


def test_strong_predicates_exact_on_random_dags():
    rng = np.random.default_rng(4)
    for _ in range(30):
        g = random_dag(int(rng.integers(5, 10)), 0.35, rng)
        tester = OracleTester(g)
        skel = skeleton_of(g)
        for ut, label in label_uts(g, skel):
            ctx = _ctx(g, ut)
            for kind in ("STRONG_CPC", "STRONG_MPC", "STRONG_GMB"):
                assert predicate_score(kind, ctx, tester) == label
            if label:
                assert predicate_score("WEAK_1", ctx, tester) == 1
                assert predicate_score("WEAK_3", ctx, tester) == 1
            else:
                assert predicate_score("WEAK_2", ctx, tester) == 0


def test_predicate_classifier_scores_are_binary():
    c = PredicateClassifier("STRONG_CPC")
    assert c.kind is PredicateKind.STRONG_CPC and not c.needs_features
    g = Dag.from_edges(3, [(0, 1), (2, 1)])
    assert c.score_context(_ctx(g), OracleTester(g)) in (0.0, 1.0)
    with pytest.raises(ValueError):
        PredicateClassifier("NOPE")


def _toy_examples(n=120, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.random((n, N_FEATURES))
    y = (X[:, 11] < 0.4).astype(int)
    return [UtExample(x, int(l)) for x, l in zip(X, y)], X


def test_ensemble_train_score_round_trip():
    examples, X = _toy_examples()
    model = train(examples, BASIS, BoostParams(n_rounds=10))
    s = model.score(X)
    assert s.shape == (len(X),) and ((0 <= s) & (s <= 1)).all()
    assert score(model, X[0]) == pytest.approx(s[0])
    again = TreeEnsembleModel.from_dict(json.loads(json.dumps(model.to_dict())))
    assert np.array_equal(again.score(X), s)
    assert again.basis == BASIS


def test_empty_ensemble_scores_half():
    m = TreeEnsembleModel(BoostedTrees(), BASIS)
    assert m.score(np.zeros(N_FEATURES)) == 0.5


def test_schema_mismatch():
    m = TreeEnsembleModel(BoostedTrees(), BASIS)
    with pytest.raises(SchemaMismatch):
        m.score(np.zeros(10))
    doc = m.to_dict()
    doc["schema_version"] = "other/0"
    with pytest.raises(SchemaMismatch):
        TreeEnsembleModel.from_dict(doc)
    with pytest.raises(SchemaMismatch):
        TreeEnsembleModel.from_dict({"format": "something-else"})


def test_train_rejects_degenerate_sets():
    with pytest.raises(DegenerateLabels):
        train([], BASIS)
    examples, _ = _toy_examples()
    with pytest.raises(DegenerateLabels):
        train([UtExample(e.features, 1) for e in examples], BASIS)
