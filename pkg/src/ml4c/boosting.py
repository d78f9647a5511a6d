"""Gradient-boosted regression trees for binary classification.

Second-order boosting with logistic loss and exact greedy split search.
Defaults follow the usual library defaults: 100 rounds, depth 6, learning
rate 0.3, L2 leaf penalty 1, minimum child hessian 1, base score 0.5.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

log = logging.getLogger(__name__)


class DegenerateLabels(ValueError):
    pass


@dataclass(frozen=True)
class BoostParams:
    n_rounds: int = 100
    max_depth: int = 6
    learning_rate: float = 0.3
    reg_lambda: float = 1.0
    gamma: float = 0.0
    min_child_weight: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_rounds < 0 or self.max_depth < 0:
            raise ValueError("n_rounds and max_depth must be >= 0")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")


@dataclass(frozen=True)
class Tree:
    """Flat binary tree; ``left[i] == -1`` marks a leaf. Samples with
    ``x[feature] < threshold`` go left."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            inner = self.left[node] >= 0
            if not inner.any():
                break
            nd = node[inner]
            go_left = X[rows[inner], self.feature[nd]] < self.threshold[nd]
            node[inner] = np.where(go_left, self.left[nd], self.right[nd])
        return self.value[node]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Tree":
        return cls(
            np.asarray(doc["feature"], dtype=np.int64),
            np.asarray(doc["threshold"], dtype=float),
            np.asarray(doc["left"], dtype=np.int64),
            np.asarray(doc["right"], dtype=np.int64),
            np.asarray(doc["value"], dtype=float),
        )

    @property
    def n_leaves(self) -> int:
        return int((self.left < 0).sum())


def sigmoid(margin):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(margin, dtype=float)))


def logloss(y: np.ndarray, p: np.ndarray) -> float:
    p = np.clip(p, 1e-15, 1 - 1e-15)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def _best_split(XT, sidx, g, h, G, H, params: BoostParams):
    """Exact greedy split search over all features.

    ``XT`` is the feature-major copy of X and row f of ``sidx`` holds the
    node's samples sorted by feature f, so no per-node sort is needed.
    """
    n_feat = XT.shape[0]
    xs = np.take_along_axis(XT, sidx, axis=1)
    GL = np.cumsum(g[sidx], axis=1)[:, :-1]
    HL = np.cumsum(h[sidx], axis=1)[:, :-1]
    mcw = params.min_child_weight
    ok = xs[:, 1:] > xs[:, :-1]
    ok &= HL >= mcw
    ok &= HL <= H - mcw
    cand = np.flatnonzero(ok)
    if not len(cand):
        return None
    gl, hl = GL.ravel()[cand], HL.ravel()[cand]
    lam = params.reg_lambda
    gain = 0.5 * (gl**2 / (hl + lam) + (G - gl) ** 2 / (H - hl + lam) - G**2 / (H + lam)) - params.gamma
    best = int(np.argmax(gain))
    if not gain[best] > 1e-12:
        return None
    feat, pos = divmod(int(cand[best]), sidx.shape[1] - 1)
    lo, hi = xs[feat, pos], xs[feat, pos + 1]
    thr = lo + (hi - lo) / 2.0
    if not lo < thr <= hi:
        thr = hi
    return feat, float(thr)


def _partition(sidx: np.ndarray, goes_left: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # stable per-row filter keeps each feature's order sorted
    sel = goes_left[sidx]
    f, k = sidx.shape
    n_left = int(sel[0].sum())
    return sidx[sel].reshape(f, n_left), sidx[~sel].reshape(f, k - n_left)


def presort(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Feature-major copy of the non-constant columns of X, their per-feature
    stable sort order and their original column numbers."""
    active = np.flatnonzero(X.max(axis=0) > X.min(axis=0)) if len(X) else np.arange(0)
    XT = np.ascontiguousarray(X[:, active].T)
    order = np.argsort(XT, axis=1, kind="stable").astype(np.int32)
    return XT, order, active


def grow_tree(X: np.ndarray, g: np.ndarray, h: np.ndarray, params: BoostParams,
              presorted: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None) -> Tree:
    feature, threshold, left, right, value = [], [], [], [], []
    XT, order, active = presorted if presorted is not None else presort(X)
    goes_left = np.zeros(len(X), dtype=bool)

    def new_node():
        for arr, v in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1), (value, 0.0)):
            arr.append(v)
        return len(feature) - 1

    def grow(idx, sidx, depth):
        node = new_node()
        G, H = g[idx].sum(), h[idx].sum()
        split = None
        if depth < params.max_depth and len(idx) >= 2 and len(active):
            split = _best_split(XT, sidx, g, h, G, H, params)
        if split is None:
            value[node] = -G / (H + params.reg_lambda) * params.learning_rate
            return node
        feat, thr = split
        feat = int(active[feat])
        mask = X[idx, feat] < thr
        feature[node], threshold[node] = feat, thr
        goes_left[idx] = mask
        s_left, s_right = _partition(sidx, goes_left)
        left[node] = grow(idx[mask], s_left, depth + 1)
        right[node] = grow(idx[~mask], s_right, depth + 1)
        return node

    grow(np.arange(len(X)), order, 0)
    return Tree(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=float),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(value, dtype=float),
    )


@dataclass
class BoostedTrees:
    """Additive tree model; probability = sigmoid(sum of leaf values)."""

    trees: list[Tree] = field(default_factory=list)
    params: BoostParams = field(default_factory=BoostParams)
    train_loss: list[float] = field(default_factory=list)

    def margin(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.zeros(len(X))
        for tree in self.trees:
            out += tree.predict(X)
        return out

    def predict_proba(self, X) -> np.ndarray:
        return sigmoid(self.margin(X))

    def to_dict(self) -> dict:
        return {
            "params": asdict(self.params),
            "trees": [t.to_dict() for t in self.trees],
            "train_loss": list(self.train_loss),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "BoostedTrees":
        return cls(
            [Tree.from_dict(t) for t in doc["trees"]],
            BoostParams(**doc["params"]),
            list(doc.get("train_loss", [])),
        )


def fit(X, y, params: BoostParams | None = None) -> BoostedTrees:
    params = params or BoostParams()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be (n, f) with one label per row")
    if not np.isfinite(X).all():
        raise ValueError("features must be finite")
    if len(np.unique(y)) < 2:
        raise DegenerateLabels("training labels contain a single class")
    model = BoostedTrees(params=params)
    presorted = presort(X)
    margin = np.zeros(len(X))
    for r in range(params.n_rounds):
        p = sigmoid(margin)
        g, h = p - y, p * (1.0 - p)
        tree = grow_tree(X, g, h, params, presorted)
        model.trees.append(tree)
        margin += tree.predict(X)
        model.train_loss.append(logloss(y, sigmoid(margin)))
        log.debug("round %d: logloss %.6f, %d leaves", r, model.train_loss[-1], tree.n_leaves)
    return model
