"""CPDAG comparison metrics and UT-level F1."""
from __future__ import annotations

from dataclasses import astuple, dataclass
from itertools import combinations
from typing import Sequence

from .graph import Pdag


class NodeMismatch(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


@dataclass(frozen=True)
class EdgeConfusion:
    """Pair counts by (truth type, predicted type).

    Rows of the truth CPDAG: identifiable (directed), unidentifiable
    (undirected), absent. Columns of the prediction: directed the same way,
    directed the other way, undirected, absent.
    """

    iden_right: int = 0        # 1
    iden_reversed: int = 0     # 2
    iden_undirected: int = 0   # 3
    iden_missing: int = 0      # 4
    uniden_directed: int = 0   # 5
    uniden_right: int = 0      # 6
    uniden_missing: int = 0    # 7
    spurious_directed: int = 0     # 8
    spurious_undirected: int = 0   # 9
    true_nonedge: int = 0      # 10

    def cells(self) -> tuple[int, ...]:
        """Counts in table order, cell 1 first."""
        return astuple(self)

    @property
    def errors(self) -> int:
        c = self.cells()
        return c[1] + c[2] + c[3] + c[4] + c[6] + c[7] + c[8]


def _edge_types(g: Pdag) -> dict[tuple[int, int], tuple[int, int] | None]:
    """Pair -> directed edge, or None for undirected."""
    out = {}
    for u, v in g.directed_edges:
        out[(min(u, v), max(u, v))] = (u, v)
    for a, b in g.undirected_edges:
        out[(a, b)] = None
    return out


def edge_confusion(truth: Pdag, predicted: Pdag) -> EdgeConfusion:
    if truth.n != predicted.n:
        raise NodeMismatch(f"{truth.n} vs {predicted.n} nodes")
    if truth.node_names != predicted.node_names:
        raise NodeMismatch("node names differ")
    t_types, p_types = _edge_types(truth), _edge_types(predicted)
    counts = [0] * 10
    for pair in combinations(range(truth.n), 2):
        in_t, in_p = pair in t_types, pair in p_types
        t, p = t_types.get(pair), p_types.get(pair)
        if in_t and t is not None:
            if not in_p:
                cell = 3
            elif p is None:
                cell = 2
            else:
                cell = 0 if p == t else 1
        elif in_t:
            cell = 6 if not in_p else (5 if p is None else 4)
        else:
            cell = 9 if not in_p else (8 if p is None else 7)
        counts[cell] += 1
    return EdgeConfusion(*counts)


def shd(truth: Pdag, predicted: Pdag) -> int:
    """Structural Hamming distance between two CPDAGs.

    A reversed directed edge counts once.
    """
    return edge_confusion(truth, predicted).errors


def edge_f1(truth: Pdag, predicted: Pdag) -> float:
    """F1 over identifiable (directed) edges; 0 if truth has none."""
    c = edge_confusion(truth, predicted).cells()
    tp = c[0]
    p_den = c[0] + c[1] + c[2] + c[3]
    r_den = c[0] + c[1] + c[4] + c[7]
    if p_den == 0 or tp == 0:
        return 0.0
    precision = tp / p_den
    recall = tp / r_den
    return 2 * precision * recall / (precision + recall)


def ut_f1(truth_labels: Sequence[int], predicted_labels: Sequence[int]) -> float:
    """Binary F1 with v-structure as the positive class.

    1.0 when there are no positives in either list.
    """
    if len(truth_labels) != len(predicted_labels):
        raise LengthMismatch(f"{len(truth_labels)} vs {len(predicted_labels)} labels")
    tp = sum(1 for t, p in zip(truth_labels, predicted_labels) if t and p)
    fp = sum(1 for t, p in zip(truth_labels, predicted_labels) if p and not t)
    fn = sum(1 for t, p in zip(truth_labels, predicted_labels) if t and not p)
    if tp + fp + fn == 0:
        return 1.0
    return 2 * tp / (2 * tp + fp + fn)
