"""Command-line entry point: ``ml4c <command> [options]``.

Every command accepts ``--config FILE`` (a JSON object keyed by option
name, dashes or underscores); explicit flags override the file. Exit codes:
0 success, 1 usage or configuration error, 2 bad input data, 3 internal error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .boosting import BoostParams, DegenerateLabels
from .citest import SepsetConfig
from .featurize import FEATURE_NAMES, EmbeddingBasis
from .fileio import (
    ParseError,
    bundled_network,
    parse_bif,
    read_corpus,
    read_dataset,
    read_graph,
    read_model,
    write_corpus,
    write_dataset,
    write_graph,
    write_json,
    write_model,
    write_table,
)
from .graph import GraphError, Pdag, cpdag_of, skeleton_of, unshielded_triples
from .learner import PredicateClassifier, PredicateKind, SchemaMismatch, SkeletonMismatch, label_uts, train
from .metrics import NodeMismatch, edge_confusion, edge_f1, shd, ut_f1
from .pipeline import RunConfig, build_training_set, examples_to_arrays, make_tester, run_ml4c_report
from .synth import SynthConfig, build_corpus, forward_sample

log = logging.getLogger("ml4c")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


DATA_ERRORS = (ParseError, GraphError, NodeMismatch, SchemaMismatch, SkeletonMismatch,
               DegenerateLabels, FileNotFoundError, KeyError)

# option name -> default; these may come from the config file or the command line
RUN_OPTS = {"alpha": 0.05, "min_rows_per_dof": 5.0, "sepset_max_size": 4,
            "sepset_exhaustive_below": 8, "threshold": 0.1}
COMMAND_OPTS = {
    "synth": {"out": None, "n_graphs": 50, "seed": 0, "nodes": [10, 20], "sparsity": [1.2, 1.7],
              "graph_model": "mixed", "samples": 10_000, "dirichlet_alpha": [0.1, 1.0]},
    "sample": {"network": "child", "bif": None, "n": 10_000, "seed": 0, "out_data": None,
               "out_graph": None},
    "label": {"corpus": None, "out": None},
    "featurize": {"corpus": None, "out": None, "basis_seed": 0, **RUN_OPTS},
    "train": {"corpus": None, "out": None, "basis_seed": 0, "rounds": 100, "max_depth": 6,
              "learning_rate": 0.3, "reg_lambda": 1.0, "gamma": 0.0, "min_child_weight": 1.0,
              "seed": 0, **RUN_OPTS},
    "infer": {"data": None, "skeleton": None, "model": None, "predicate": None,
              "oracle_dag": None, "out": None, **RUN_OPTS},
    "eval": {"truth": None, "pred": None, "truth_kind": "pdag", "out": None},
}
REQUIRED = {
    "synth": ["out"], "sample": ["out_data"], "label": ["corpus", "out"],
    "featurize": ["corpus", "out"], "train": ["corpus", "out"],
    "infer": ["skeleton", "out"], "eval": ["truth", "pred"],
}


def _add_run_opts(p):
    p.add_argument("--alpha", type=float, help="CI test significance level")
    p.add_argument("--min-rows-per-dof", type=float)
    p.add_argument("--sepset-max-size", type=int, help="-1 for unbounded")
    p.add_argument("--sepset-exhaustive-below", type=int)
    p.add_argument("--threshold", type=float, help="v-structure score cutoff")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ml4c", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ml4c {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus of DAGs and datasets")
    p.add_argument("--out", help="output directory")
    p.add_argument("--n-graphs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--nodes", type=int, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--sparsity", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--graph-model", choices=["ER", "SF", "mixed"])
    p.add_argument("--samples", type=int)
    p.add_argument("--dirichlet-alpha", type=float, nargs=2, metavar=("LO", "HI"))

    p = sub.add_parser("sample", help="sample a dataset from a BIF network")
    p.add_argument("--network", help="bundled network name (default child)")
    p.add_argument("--bif", help="path to a BIF file (overrides --network)")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-data")
    p.add_argument("--out-graph", help="also write the true DAG")

    p = sub.add_parser("label", help="ground-truth UT labels for a corpus")
    p.add_argument("--corpus")
    p.add_argument("--out")

    p = sub.add_parser("featurize", help="feature table for every UT of a corpus")
    p.add_argument("--corpus")
    p.add_argument("--out")
    p.add_argument("--basis-seed", type=int)
    _add_run_opts(p)

    p = sub.add_parser("train", help="train a tree-ensemble UT classifier")
    p.add_argument("--corpus")
    p.add_argument("--out")
    p.add_argument("--basis-seed", type=int)
    p.add_argument("--rounds", type=int)
    p.add_argument("--max-depth", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--reg-lambda", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--min-child-weight", type=float)
    p.add_argument("--seed", type=int)
    _add_run_opts(p)

    p = sub.add_parser("infer", help="orient a skeleton into a CPDAG")
    p.add_argument("--data", help="dataset CSV")
    p.add_argument("--skeleton", help="graph JSON; edge directions are ignored")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--model", help="trained model JSON")
    g.add_argument("--predicate", choices=[k.value for k in PredicateKind])
    p.add_argument("--oracle-dag", help="answer CI queries from this DAG instead of data")
    p.add_argument("--out")
    _add_run_opts(p)

    p = sub.add_parser("eval", help="compare predicted CPDAGs with the truth")
    p.add_argument("--truth")
    p.add_argument("--pred", nargs="+")
    p.add_argument("--truth-kind", choices=["dag", "pdag"], help="dag: compare against its CPDAG")
    p.add_argument("--out", help="CSV report (default stdout)")

    for p in sub.choices.values():
        p.add_argument("--config", help="JSON file of option values")
    return parser


def resolve_options(command: str, ns: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    opts = dict(COMMAND_OPTS[command])
    if ns.config:
        try:
            with open(ns.config) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {ns.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise UsageError("config file must hold a JSON object")
        doc = {k.replace("-", "_"): v for k, v in doc.items()}
        unknown = set(doc) - set(opts)
        if unknown:
            raise UsageError(f"unknown config keys for {command}: {sorted(unknown)}")
        opts.update(doc)
    for k in opts:
        v = getattr(ns, k, None)
        if v is not None:
            opts[k] = v
    missing = [k for k in REQUIRED[command] if opts[k] is None]
    if missing:
        raise UsageError(f"{command}: missing required option(s) " + ", ".join("--" + m.replace("_", "-") for m in missing))
    return opts


def run_config(opts: dict) -> RunConfig:
    size = opts["sepset_max_size"]
    size = None if size is None or size < 0 else int(size)
    try:
        cfg = RunConfig(float(opts["alpha"]), float(opts["min_rows_per_dof"]),
                        SepsetConfig(size, int(opts["sepset_exhaustive_below"])),
                        float(opts["threshold"]))
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid run option: {exc}") from None
    if not 0 < cfg.alpha < 1:
        raise UsageError("--alpha must lie in (0, 1)")
    return cfg


def _run_config_doc(cfg: RunConfig) -> dict:
    return {"alpha": cfg.alpha, "min_rows_per_dof": cfg.min_rows_per_dof,
            "sepset_max_size": cfg.sepsets.max_size,
            "sepset_exhaustive_below": cfg.sepsets.exhaustive_below, "threshold": cfg.threshold}


# -- commands -------------------------------------------------------------------------

def cmd_synth(o: dict) -> None:
    try:
        cfg = SynthConfig(tuple(int(v) for v in o["nodes"]), tuple(float(v) for v in o["sparsity"]),
                          o["graph_model"], int(o["samples"]),
                          tuple(float(v) for v in o["dirichlet_alpha"]), int(o["seed"]))
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    if o["n_graphs"] < 0:
        raise UsageError("--n-graphs must be non-negative")
    items = build_corpus(cfg, int(o["n_graphs"]))
    doc = {k: o[k] for k in ("nodes", "sparsity", "graph_model", "samples", "dirichlet_alpha")}
    write_corpus(o["out"], items, doc, cfg.seed)
    log.info("wrote %d graphs to %s", len(items), o["out"])


def cmd_sample(o: dict) -> None:
    bn = parse_bif(o["bif"]) if o["bif"] else bundled_network(o["network"])
    data = forward_sample(bn, int(o["n"]), np.random.default_rng(int(o["seed"])))
    write_dataset(o["out_data"], data)
    if o["out_graph"]:
        write_graph(o["out_graph"], bn.dag)


def cmd_label(o: dict) -> None:
    rows = []
    for gid, dag, _ in read_corpus(o["corpus"]):
        for ut, label in label_uts(dag, skeleton_of(dag)):
            names = dag.node_names
            rows.append((gid, names[ut.x], names[ut.t], names[ut.y], label))
    write_table(o["out"], ("graph", "x", "t", "y", "label"), rows)


def _corpus_examples(o: dict):
    cfg = run_config(o)
    basis = EmbeddingBasis.from_seed(int(o["basis_seed"]))
    corpus = read_corpus(o["corpus"])
    examples = []
    for gid, dag, data in corpus:
        examples.extend(build_training_set([(dag, data)], basis, cfg, gid))
        log.info("featurized %s", gid)
    return corpus, basis, cfg, examples


def cmd_featurize(o: dict) -> None:
    corpus, basis, _, examples = _corpus_examples(o)
    names = {gid: dag.node_names for gid, dag, _ in corpus}
    rows = []
    for e in examples:
        gid, _, (x, t, y) = e.provenance
        nm = names[gid]
        rows.append((gid, nm[x], nm[t], nm[y], e.label, *e.features))
    write_table(o["out"], ("graph", "x", "t", "y", "label", *FEATURE_NAMES), rows)
    out = Path(o["out"])
    write_json(out.with_name(out.stem + ".basis.json"), basis.to_dict())


def cmd_train(o: dict) -> None:
    try:
        params = BoostParams(int(o["rounds"]), int(o["max_depth"]), float(o["learning_rate"]),
                             float(o["reg_lambda"]), float(o["gamma"]),
                             float(o["min_child_weight"]), int(o["seed"]))
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    t0 = time.perf_counter()
    corpus, basis, cfg, examples = _corpus_examples(o)
    _, y = examples_to_arrays(examples)
    model = train(examples, basis, params)
    log.info("trained on %d UTs (%d positive) from %d graphs", len(y), int(y.sum()), len(corpus))
    write_model(o["out"], model)
    out = Path(o["out"])
    write_json(out.with_name(out.stem + ".train.json"), {
        "corpus": str(o["corpus"]), "n_graphs": len(corpus), "n_examples": int(len(y)),
        "n_positive": int(y.sum()), "run_config": _run_config_doc(cfg),
        "boost": {k: o[k] for k in ("rounds", "max_depth", "learning_rate", "reg_lambda",
                                    "gamma", "min_child_weight", "seed")},
        "basis_seed": int(o["basis_seed"]), "seconds": time.perf_counter() - t0,
    })


def cmd_infer(o: dict) -> None:
    cfg = run_config(o)
    if (o["model"] is None) == (o["predicate"] is None):
        raise UsageError("infer needs exactly one of --model or --predicate")
    if o["data"] is None and o["oracle_dag"] is None:
        raise UsageError("infer needs --data or --oracle-dag")
    g = read_graph(o["skeleton"], "pdag")
    skel = g.skeleton()
    if o["model"]:
        classifier = read_model(o["model"])
    else:
        classifier = PredicateClassifier(o["predicate"])
    data = dag = None
    if o["oracle_dag"]:
        dag = read_graph(o["oracle_dag"], "dag")
        if dag.node_names != skel.node_names:
            raise NodeMismatch("oracle DAG nodes differ from the skeleton")
    else:
        data = read_dataset(o["data"])
        if data.column_names != skel.node_names:
            raise NodeMismatch("dataset columns differ from the skeleton nodes")
    tester = make_tester(data, cfg, dag)
    t0 = time.perf_counter()
    report = run_ml4c_report(data, skel, classifier, cfg, tester)
    elapsed = time.perf_counter() - t0
    write_graph(o["out"], report.cpdag)
    out = Path(o["out"])
    names = skel.node_names
    write_json(out.with_name(out.stem + ".run.json"), {
        "skeleton": str(o["skeleton"]), "data": o["data"], "oracle_dag": o["oracle_dag"],
        "classifier": o["model"] or o["predicate"],
        "model_sha256": hashlib.sha256(Path(o["model"]).read_bytes()).hexdigest() if o["model"] else None,
        "run_config": _run_config_doc(cfg),
        "n_uts": len(report.scores), "n_candidates": len(report.candidates),
        "n_survivors": len(report.survivors),
        "scores": [[names[u.x], names[u.t], names[u.y], s] for u, s in report.scores.items()],
        "seconds": elapsed, "timing": report.timing,
    })


def _vstructure_labels(truth: Pdag, pred: Pdag) -> tuple[list[int], list[int]]:
    t_dir, p_dir = set(truth.directed_edges), set(pred.directed_edges)
    uts = unshielded_triples(truth.skeleton())

    def collider(d, u):
        return int((u.x, u.t) in d and (u.y, u.t) in d)

    return [collider(t_dir, u) for u in uts], [collider(p_dir, u) for u in uts]


def cmd_eval(o: dict) -> None:
    truth = read_graph(o["truth"], o["truth_kind"])
    if o["truth_kind"] == "dag":
        truth = cpdag_of(truth)
    preds = o["pred"] if isinstance(o["pred"], list) else [o["pred"]]
    header = ["pred", "shd", "edge_f1", "ut_f1", "seconds"] + [f"cell{i}" for i in range(1, 11)]
    rows = []
    for path in preds:
        pred = read_graph(path, "pdag")
        tl, pl = _vstructure_labels(truth, pred)
        run = Path(path).with_name(Path(path).stem + ".run.json")
        seconds = json.loads(run.read_text()).get("seconds", "") if run.exists() else ""
        rows.append([path, shd(truth, pred), edge_f1(truth, pred), ut_f1(tl, pl), seconds,
                     *edge_confusion(truth, pred).cells()])
    if o["out"]:
        write_table(o["out"], header, rows)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


COMMANDS = {"synth": cmd_synth, "sample": cmd_sample, "label": cmd_label,
            "featurize": cmd_featurize, "train": cmd_train, "infer": cmd_infer, "eval": cmd_eval}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(ns.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        opts = resolve_options(ns.command, ns)
        COMMANDS[ns.command](opts)
    except UsageError as exc:
        print(f"ml4c: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DATA_ERRORS as exc:
        print(f"ml4c: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"ml4c: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
