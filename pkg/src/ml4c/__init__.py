"""Supervised orientation of unshielded triples in discrete causal skeletons."""
from .boosting import BoostParams
from .citest import G2Tester, OracleTester, SepsetConfig, find_sepsets, severity
from .featurize import FEATURE_NAMES, N_FEATURES, EmbeddingBasis, featurize_ut
from .fileio import bundled_network, parse_bif
from .graph import Dag, Pdag, Skeleton, UnshieldedTriple, cpdag_of, d_separated, meek_closure, skeleton_of
from .learner import PredicateClassifier, PredicateKind, TreeEnsembleModel, train
from .metrics import edge_confusion, edge_f1, shd, ut_f1
from .pipeline import RunConfig, build_training_set, conflict_resolve, run_ml4c
from .synth import SynthConfig, build_corpus, forward_sample

__version__ = "0.1.0"
