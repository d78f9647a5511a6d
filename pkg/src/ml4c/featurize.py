"""Vicinity features of an unshielded triple.

Layout of the 755-dimensional vector (see :data:`FEATURE_NAMES`):

* 5 scaling values: |PC_X|, |PC_Y|, |PC_T|, number of sepsets, mean sepset size
* 7 overlap coefficients: the six pairs of {PC_X, PC_Y, PC_T, S} and olp({T}, S)
* 2 values for the single scalar X~Y|{T}: (1 - p, severity)
* 19 blocks of 39 for every other (bivariable, conditional) pair, each
  ``[size, mean/std/max/min of channel 1, same for channel 2,
  15 random-feature means of channel 1, 15 of channel 2]``

Bivariables are X~Y, X~PC_Y, PC_X~Y, PC_X~PC_Y; conditionals are
{}, {T}, PC_T as singletons, S, and S with T added to every member.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterable, Iterator, Sequence

import numpy as np

from .citest import CiTester, SepsetConfig, Sepsets, find_sepsets, pc_sets
from .graph import Skeleton, UnshieldedTriple

SCHEMA_VERSION = "ml4c-features/1"
N_EMBED = 15
BLOCK_SIZE = 1 + 2 * 4 + 2 * N_EMBED

BIVARIABLES = ("X~Y", "X~PCY", "PCX~Y", "PCX~PCY")
CONDITIONALS = ("none", "T", "PCT", "S", "S+T")
UNITARY = ("X~Y", "T")
PAIRS = tuple(p for p in product(BIVARIABLES, CONDITIONALS) if p != UNITARY)


def _feature_names() -> list[str]:
    names = ["n_pcx", "n_pcy", "n_pct", "n_sepsets", "mean_sepset_size"]
    names += [
        "olp_pcx_pcy", "olp_pcx_pct", "olp_pcy_pct",
        "olp_pcx_S", "olp_pcy_S", "olp_pct_S", "olp_T_S",
    ]
    names += ["X~Y|T:dep_p", "X~Y|T:severity"]
    for bv, cond in PAIRS:
        tag = f"{bv}|{cond}"
        names.append(f"{tag}:size")
        for ch in ("dep_p", "severity"):
            names += [f"{tag}:{ch}:{s}" for s in ("mean", "std", "max", "min")]
        for ch in ("dep_p", "severity"):
            names += [f"{tag}:{ch}:rff{j}" for j in range(N_EMBED)]
    return names


FEATURE_NAMES = tuple(_feature_names())
N_FEATURES = len(FEATURE_NAMES)
assert N_FEATURES == 755


def feature_index(name: str) -> int:
    return FEATURE_NAMES.index(name)


@dataclass(frozen=True)
class EmbeddingBasis:
    """Random Fourier features cos(w_j * z + b_j), w ~ N(0, 1), b ~ U[0, 2pi)."""

    w: tuple[float, ...]
    b: tuple[float, ...]
    seed: int | None = None

    @classmethod
    def from_seed(cls, seed: int, m: int = N_EMBED) -> "EmbeddingBasis":
        rng = np.random.default_rng(seed)
        w = rng.standard_normal(m)
        b = rng.uniform(0.0, 2.0 * np.pi, size=m)
        return cls(tuple(float(v) for v in w), tuple(float(v) for v in b), seed)

    @property
    def m(self) -> int:
        return len(self.w)

    def to_dict(self) -> dict:
        return {"w": list(self.w), "b": list(self.b), "seed": self.seed}

    @classmethod
    def from_dict(cls, doc: dict) -> "EmbeddingBasis":
        return cls(tuple(map(float, doc["w"])), tuple(map(float, doc["b"])), doc.get("seed"))


@dataclass(frozen=True)
class VicinityContext:
    ut: UnshieldedTriple
    pc_x: frozenset[int]
    pc_y: frozenset[int]
    pc_t: frozenset[int]
    vicinity: frozenset[int]
    sepsets: Sepsets

    @property
    def x(self) -> int:
        return self.ut.x

    @property
    def t(self) -> int:
        return self.ut.t

    @property
    def y(self) -> int:
        return self.ut.y


def build_vicinity(
    skel: Skeleton,
    ut: UnshieldedTriple,
    tester: CiTester,
    sepset_config: SepsetConfig | None = None,
) -> VicinityContext:
    pc_x, pc_y, pc_t = pc_sets(skel, ut)
    vicinity = frozenset(ut) | pc_x | pc_y | pc_t
    sepsets = find_sepsets(tester, skel, ut, sepset_config)
    return VicinityContext(ut, pc_x, pc_y, pc_t, vicinity, sepsets)


# -- set arithmetic --------------------------------------------------------------

def overlap(a: Iterable[int], b: Iterable[int]) -> float:
    """|A & B| / min(|A|, |B|); 0 if either set is empty."""
    a, b = set(a), set(b)
    if not a or not b:
        return 0.0
    return len(a & b) / min(len(a), len(b))


def overlap_ensemble(a: Iterable[int], ensemble: Sequence[Iterable[int]]) -> float:
    """Mean of ``overlap(a, s)`` over the members of ``ensemble``; 0 if empty."""
    if not ensemble:
        return 0.0
    a = set(a)
    return sum(overlap(a, s) for s in ensemble) / len(ensemble)


def conditional_domain(ctx: VicinityContext) -> dict[str, list[frozenset[int]]]:
    t = ctx.t
    return {
        "none": [frozenset()],
        "T": [frozenset({t})],
        "PCT": [frozenset({v}) for v in sorted(ctx.pc_t)],
        "S": list(ctx.sepsets.sets),
        "S+T": [s | {t} for s in ctx.sepsets.sets],
    }


def bivariable_domain(ctx: VicinityContext) -> dict[str, tuple[list[int], list[int]]]:
    x, y = [ctx.x], [ctx.y]
    pcx, pcy = sorted(ctx.pc_x), sorted(ctx.pc_y)
    return {"X~Y": (x, y), "X~PCY": (x, pcy), "PCX~Y": (pcx, y), "PCX~PCY": (pcx, pcy)}


def iter_queries(a_set, b_set, ensemble) -> Iterator[tuple[int, int, frozenset[int]]]:
    """Valid (a, b, z) combinations: a != b and neither inside z."""
    for z in ensemble:
        for a in a_set:
            if a in z:
                continue
            for b in b_set:
                if b != a and b not in z:
                    yield a, b, z


def extended_dependency(tester: CiTester, a_set, b_set, ensemble) -> np.ndarray:
    """Channel pairs (1 - p, severity) for every valid (a, b, z); shape (k, 2)."""
    vals = [tester.channels(a, b, z) for a, b, z in iter_queries(a_set, b_set, ensemble)]
    if not vals:
        return np.zeros((0, 2))
    return np.asarray(vals, dtype=float)


def entanglement_features(ctx: VicinityContext) -> np.ndarray:
    sets = ctx.sepsets.sets
    mean_size = float(np.mean([len(s) for s in sets])) if sets else 0.0
    scaling = [len(ctx.pc_x), len(ctx.pc_y), len(ctx.pc_t), len(sets), mean_size]
    overlaps = [
        overlap(ctx.pc_x, ctx.pc_y),
        overlap(ctx.pc_x, ctx.pc_t),
        overlap(ctx.pc_y, ctx.pc_t),
        overlap_ensemble(ctx.pc_x, sets),
        overlap_ensemble(ctx.pc_y, sets),
        overlap_ensemble(ctx.pc_t, sets),
        overlap_ensemble({ctx.t}, sets),
    ]
    return np.asarray(scaling + overlaps, dtype=float)


def embed(values, basis: EmbeddingBasis) -> np.ndarray:
    """Fixed-length summary of a variable-size set of channel pairs.

    ``values`` is (k, 2) (or (k,) for one channel, which is then used for
    both). Returns 39 floats; an empty set gives all zeros.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        v = np.column_stack([v, v])
    out = np.zeros(1 + 2 * 4 + 2 * basis.m)
    if len(v) == 0:
        return out
    w = np.asarray(basis.w)
    b = np.asarray(basis.b)
    out[0] = len(v)
    out[1:5] = [v[:, 0].mean(), v[:, 0].std(), v[:, 0].max(), v[:, 0].min()]
    out[5:9] = [v[:, 1].mean(), v[:, 1].std(), v[:, 1].max(), v[:, 1].min()]
    out[9:9 + basis.m] = np.cos(np.outer(v[:, 0], w) + b).mean(axis=0)
    out[9 + basis.m:] = np.cos(np.outer(v[:, 1], w) + b).mean(axis=0)
    return out


def featurize_context(ctx: VicinityContext, tester: CiTester, basis: EmbeddingBasis) -> np.ndarray:
    if basis.m != N_EMBED:
        raise ValueError(f"embedding basis must have {N_EMBED} frequencies")
    bivars = bivariable_domain(ctx)
    conds = conditional_domain(ctx)
    parts = [entanglement_features(ctx)]
    parts.append(np.asarray(tester.channels(ctx.x, ctx.y, {ctx.t}), dtype=float))
    for bv, cond in PAIRS:
        a_set, b_set = bivars[bv]
        parts.append(embed(extended_dependency(tester, a_set, b_set, conds[cond]), basis))
    fv = np.concatenate(parts)
    assert fv.shape == (N_FEATURES,)
    return fv


def featurize_ut(
    skel: Skeleton,
    ut: UnshieldedTriple,
    tester: CiTester,
    basis: EmbeddingBasis,
    sepset_config: SepsetConfig | None = None,
) -> np.ndarray:
    return featurize_context(build_vicinity(skel, ut, tester, sepset_config), tester, basis)
