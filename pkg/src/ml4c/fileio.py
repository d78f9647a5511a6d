"""On-disk formats.

* graphs: JSON ``{"nodes": [...], "directed_edges": [[a, b], ...],
  "undirected_edges": [[a, b], ...]}`` keyed by node name
* datasets: CSV with a header of column names and integer-coded rows, plus
  a ``<stem>.meta.json`` sidecar holding the cardinalities
* models: JSON produced by :meth:`TreeEnsembleModel.to_dict`
* Bayesian networks: read from the discrete subset of the BIF text format

Every writer goes through :func:`atomic_write_text`, so a failed command
never leaves a half-written file behind.
"""
from __future__ import annotations

import bisect
import csv
import io
import json
import math
import os
import re
import shutil
import tempfile
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .graph import Dag, Pdag, Skeleton, graph_from_dict, graph_to_dict
from .learner import TreeEnsembleModel
from .synth import BayesNet, Cpt, DiscreteDataset


class ParseError(ValueError):
    def __init__(self, msg: str, line: int | None = None, col: int | None = None):
        where = f" (line {line}, column {col})" if line is not None else ""
        super().__init__(msg + where)
        self.line, self.col = line, col


class UnsupportedFeature(ParseError):
    pass


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_json(path) -> dict:
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON: {exc.msg}", exc.lineno, exc.colno) from None


def write_json(path, doc) -> None:
    atomic_write_text(path, json.dumps(doc, indent=1) + "\n")


# -- graphs ---------------------------------------------------------------------------

def write_graph(path, g: Dag | Pdag | Skeleton) -> None:
    write_json(path, graph_to_dict(g))


def read_graph(path, kind: str = "pdag") -> Dag | Pdag | Skeleton:
    return graph_from_dict(_read_json(path), kind)


# -- datasets -------------------------------------------------------------------------

def _meta_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def write_dataset(path, data: DiscreteDataset) -> None:
    buf = io.StringIO()
    buf.write(",".join(data.column_names) + "\n")
    np.savetxt(buf, data.rows, fmt="%d", delimiter=",")
    atomic_write_text(path, buf.getvalue())
    write_json(_meta_path(path), {
        "column_names": list(data.column_names),
        "cardinalities": list(data.cardinalities),
    })


def read_dataset(path) -> DiscreteDataset:
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        try:
            rows = np.loadtxt(fh, delimiter=",", dtype=np.int64, ndmin=2)
        except ValueError as exc:
            raise ParseError(f"{path}: {exc}") from None
    if rows.size == 0:
        rows = rows.reshape(0, len(header))
    meta_file = _meta_path(path)
    if meta_file.exists():
        meta = _read_json(meta_file)
        if meta["column_names"] != header:
            raise ParseError(f"{meta_file}: column names differ from {path}")
        cards = meta["cardinalities"]
    else:
        cards = [max(int(rows[:, j].max()) + 1, 2) if len(rows) else 2 for j in range(rows.shape[1])]
    try:
        return DiscreteDataset(tuple(header), tuple(cards), rows)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None


# -- models ---------------------------------------------------------------------------

def write_model(path, model: TreeEnsembleModel) -> None:
    write_json(path, model.to_dict())


def read_model(path) -> TreeEnsembleModel:
    return TreeEnsembleModel.from_dict(_read_json(path))


# -- feature tables -------------------------------------------------------------------

def write_table(path, header: Sequence[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    atomic_write_text(path, buf.getvalue())


# -- BIF ------------------------------------------------------------------------------

_TOKEN = re.compile(
    r'(?P<ws>\s+)|(?P<comment>//[^\n]*|/\*.*?\*/)|(?P<str>"[^"]*")'
    r"|(?P<punct>[{}()\[\],;|])|(?P<word>[^\s{}()\[\],;|\"]+)",
    re.S,
)


class _Tokens:
    def __init__(self, text: str):
        self.toks: list[tuple[str, int, int]] = []
        line_starts = [0] + [m.end() for m in re.finditer("\n", text)]
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m:
                ln = bisect.bisect_right(line_starts, pos)
                raise ParseError(f"unexpected character {text[pos]!r}", ln, pos - line_starts[ln - 1] + 1)
            kind = m.lastgroup
            if kind in ("word", "punct", "str"):
                ln = bisect.bisect_right(line_starts, pos)
                val = m.group()[1:-1] if kind == "str" else m.group()
                self.toks.append((val, ln, pos - line_starts[ln - 1] + 1))
            pos = m.end()
        self.i = 0

    def peek(self) -> str | None:
        return self.toks[self.i][0] if self.i < len(self.toks) else None

    def where(self) -> tuple[int | None, int | None]:
        if self.i < len(self.toks):
            return self.toks[self.i][1:]
        return (self.toks[-1][1], self.toks[-1][2]) if self.toks else (None, None)

    def error(self, msg: str) -> ParseError:
        return ParseError(msg, *self.where())

    def next(self) -> str:
        if self.i >= len(self.toks):
            raise self.error("unexpected end of input")
        tok = self.toks[self.i][0]
        self.i += 1
        return tok

    def expect(self, tok: str) -> None:
        got = self.peek()
        if got != tok:
            raise self.error(f"expected {tok!r}, found {got!r}")
        self.i += 1

    def skip_block(self) -> None:
        self.expect("{")
        depth = 1
        while depth:
            t = self.next()
            depth += {"{": 1, "}": -1}.get(t, 0)

    def until(self, stop: str) -> list[str]:
        out = []
        while self.peek() != stop:
            out.append(self.next())
        self.i += 1
        return out


def _numbers(toks: list[str], ts: _Tokens) -> list[float]:
    vals = []
    for t in toks:
        if t == ",":
            continue
        try:
            vals.append(float(t))
        except ValueError:
            raise ts.error(f"expected a probability, found {t!r}") from None
    return vals


def parse_bif_text(text: str, tol: float = 1e-6) -> BayesNet:
    """Parse discrete variable and probability blocks into a :class:`BayesNet`."""
    ts = _Tokens(text)
    states: dict[str, list[str]] = {}
    order: list[str] = []
    probs: dict[str, tuple[list[str], dict[tuple[str, ...], list[float]], list[float] | None, tuple]] = {}

    while ts.peek() is not None:
        kw = ts.next()
        if kw == "network":
            while ts.peek() != "{":
                ts.next()
            ts.skip_block()
        elif kw == "variable":
            name = ts.next()
            ts.expect("{")
            while ts.peek() != "}":
                item = ts.next()
                if item == "type":
                    kind = ts.next()
                    if kind != "discrete":
                        raise UnsupportedFeature(f"variable {name}: type {kind!r}", *ts.where())
                    ts.expect("[")
                    k = int(ts.next())
                    ts.expect("]")
                    ts.expect("{")
                    labels = [t for t in ts.until("}") if t != ","]
                    ts.expect(";")
                    if len(labels) != k:
                        raise ts.error(f"variable {name}: {k} states declared, {len(labels)} listed")
                    if k < 1:
                        raise ts.error(f"variable {name} has no states")
                    states[name] = labels
                    order.append(name)
                elif item == "property":
                    ts.until(";")
                else:
                    raise ts.error(f"unexpected {item!r} in variable block")
            ts.expect("}")
        elif kw == "probability":
            pos = ts.where()
            ts.expect("(")
            head = [t for t in ts.until(")") if t != ","]
            if "|" in head:
                bar = head.index("|")
                child, parents = head[:bar], head[bar + 1:]
            else:
                child, parents = head, []
            if len(child) != 1:
                raise ParseError("probability block needs exactly one child", *pos)
            rows: dict[tuple[str, ...], list[float]] = {}
            table = default = None
            ts.expect("{")
            while ts.peek() != "}":
                item = ts.peek()
                if item == "table":
                    ts.next()
                    table = _numbers(ts.until(";"), ts)
                elif item == "default":
                    ts.next()
                    default = _numbers(ts.until(";"), ts)
                elif item == "(":
                    row_pos = ts.where()
                    ts.next()
                    key = tuple(t for t in ts.until(")") if t != ",")
                    rows[key] = (_numbers(ts.until(";"), ts), row_pos)
                elif item == "property":
                    ts.next()
                    ts.until(";")
                else:
                    raise ts.error(f"unexpected {item!r} in probability block")
            ts.expect("}")
            probs[child[0]] = (parents, rows, default, table, pos)
        else:
            raise ts.error(f"unexpected top-level token {kw!r}")

    return _assemble(states, order, probs, tol)


def _normalise(vals: list[float], k: int, what: str, pos, tol: float) -> np.ndarray:
    if len(vals) != k:
        raise ParseError(f"{what}: expected {k} probabilities, got {len(vals)}", *pos)
    arr = np.asarray(vals, dtype=float)
    if (arr < 0).any() or not math.isclose(arr.sum(), 1.0, rel_tol=0, abs_tol=tol):
        raise ParseError(f"{what}: probabilities sum to {arr.sum():.6g}", *pos)
    return arr / arr.sum()


def _assemble(states, order, probs, tol) -> BayesNet:
    index = {name: i for i, name in enumerate(order)}
    missing = [v for v in order if v not in probs]
    if missing:
        raise ParseError(f"no probability block for {missing}")
    edges = []
    cpts = []
    for v in order:
        parents, rows, default, table, pos = probs[v]
        for p in parents:
            if p not in index:
                raise ParseError(f"{v}: unknown parent {p!r}", *pos)
            edges.append((index[p], index[v]))
        k = len(states[v])
        pcards = [len(states[p]) for p in parents]
        arr = np.empty((*pcards, k))
        if table is not None:
            flat = np.asarray(table, dtype=float)
            n_cfg = int(np.prod(pcards)) if pcards else 1
            if flat.size != n_cfg * k:
                raise ParseError(f"{v}: table has {flat.size} entries, expected {n_cfg * k}", *pos)
            # child-major layout, parent configurations in C order
            mat = flat.reshape(k, n_cfg).T
            for i, row in enumerate(mat):
                arr.reshape(-1, k)[i] = _normalise(list(row), k, f"{v} table", pos, tol)
        else:
            filled = np.zeros(pcards, dtype=bool) if pcards else np.zeros((), dtype=bool)
            for key, (vals, row_pos) in rows.items():
                if len(key) != len(parents):
                    raise ParseError(f"{v}: row {key} does not match parents {parents}", *row_pos)
                try:
                    idx = tuple(states[p].index(s) for p, s in zip(parents, key))
                except ValueError:
                    raise ParseError(f"{v}: unknown parent state in {key}", *row_pos) from None
                arr[idx] = _normalise(vals, k, f"{v} row {key}", row_pos, tol)
                filled[idx] = True
            if not filled.all():
                if default is None:
                    raise ParseError(f"{v}: probability table does not cover all parent states", *pos)
                arr[~filled] = _normalise(default, k, f"{v} default", pos, tol)
        cpts.append(Cpt(index[v], k, tuple(index[p] for p in parents), arr))
    dag = Dag(order, edges)
    return BayesNet(dag, tuple(len(states[v]) for v in order), tuple(cpts),
                    tuple(tuple(states[v]) for v in order))


def parse_bif(path, tol: float = 1e-6) -> BayesNet:
    with open(path) as fh:
        return parse_bif_text(fh.read(), tol)


def bundled_network(name: str) -> BayesNet:
    """Load a network shipped with the package (currently ``child``)."""
    ref = resources.files("ml4c") / "data" / f"{name}.bif"
    return parse_bif_text(ref.read_text())


# -- corpora --------------------------------------------------------------------------

MANIFEST = "manifest.json"


def write_corpus(out_dir, items, config_doc: dict, seed: int) -> dict:
    """Write a synthetic corpus: one DAG and one dataset per graph plus a manifest.

    The directory is assembled under a temporary name and renamed at the end.
    """
    out_dir = Path(out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out_dir.name}.", dir=out_dir.parent))
    try:
        entries = []
        for i, item in enumerate(items):
            name = f"g{i:04d}"
            write_graph(tmp / "graphs" / f"{name}.json", item.dag)
            write_dataset(tmp / "data" / f"{name}.csv", item.data)
            entries.append({"id": name, **item.manifest_entry(),
                            "graph": f"graphs/{name}.json", "data": f"data/{name}.csv"})
        manifest = {"format": "ml4c-corpus", "seed": seed, "config": config_doc, "graphs": entries}
        write_json(tmp / MANIFEST, manifest)
        if out_dir.exists():
            shutil.rmtree(out_dir)
        os.replace(tmp, out_dir)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return manifest


def read_corpus(corpus_dir) -> list[tuple[str, Dag, DiscreteDataset]]:
    corpus_dir = Path(corpus_dir)
    manifest = _read_json(corpus_dir / MANIFEST)
    if manifest.get("format") != "ml4c-corpus":
        raise ParseError(f"{corpus_dir / MANIFEST}: not a corpus manifest")
    out = []
    for e in manifest["graphs"]:
        dag = read_graph(corpus_dir / e["graph"], "dag")
        data = read_dataset(corpus_dir / e["data"])
        if data.column_names != dag.node_names:
            raise ParseError(f"{e['id']}: dataset columns do not match graph nodes")
        out.append((e["id"], dag, data))
    return out
