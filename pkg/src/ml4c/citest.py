"""Conditional-independence testing on categorical data.

Two backends share one interface: :class:`G2Tester` runs an adjusted G^2
test on a :class:`~ml4c.synth.DiscreteDataset`, :class:`OracleTester`
answers from d-separation in a known DAG.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, NamedTuple

import numpy as np
from scipy import special

from .graph import Dag, InvalidNodes, Skeleton, UnshieldedTriple, d_separated
from .synth import DiscreteDataset

SEVERITY_CAP = 37.5


class CiResult(NamedTuple):
    statistic: float
    dof: int
    p_value: float
    severity: float


def severity(p: float) -> float:
    """Two-sided normal quantile of a p-value: sqrt(2) * erfcinv(p).

    p = 0.0455 maps to 2.0 (two sigma). Capped at ``SEVERITY_CAP`` so an
    underflowed p-value still gives a finite, maximal dependency.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p-value {p} outside [0, 1]")
    if p <= 0.0:
        return SEVERITY_CAP
    return float(min(max(0.0, math.sqrt(2.0) * special.erfcinv(p)), SEVERITY_CAP))


def _check_query(n: int, x: int, y: int, z: Iterable[int]) -> tuple[int, ...]:
    z = tuple(sorted(set(int(v) for v in z)))
    if x == y or x in z or y in z:
        raise InvalidNodes("CI query requires x != y and x, y not in z")
    for v in (x, y, *z):
        if not 0 <= v < n:
            raise InvalidNodes(f"variable {v} out of range")
    return z


def g2_statistic(counts: np.ndarray) -> tuple[float, int]:
    """G^2 and adjusted degrees of freedom for stacked tables.

    ``counts`` has shape (strata, rows, cols). Each stratum contributes
    (nonzero rows - 1) * (nonzero cols - 1) degrees of freedom, so empty
    strata and empty rows/columns reduce the total; zero cells add nothing
    to the statistic.
    """
    counts = np.asarray(counts, dtype=float)
    row = counts.sum(axis=2)
    col = counts.sum(axis=1)
    n_k = row.sum(axis=1)
    # sum O ln(O / E) with E = row * col / n, expanded into marginal terms
    stat = 2.0 * float(
        special.xlogy(counts, counts).sum()
        - special.xlogy(row, row).sum()
        - special.xlogy(col, col).sum()
        + special.xlogy(n_k, n_k).sum()
    )
    r_k = np.maximum((row > 0).sum(axis=1) - 1, 0)
    c_k = np.maximum((col > 0).sum(axis=1) - 1, 0)
    return max(stat, 0.0), int((r_k * c_k).sum())


class CiTester:
    """Base tester; subclasses implement :meth:`test` and :meth:`channels`."""

    n_vars: int

    def test(self, x: int, y: int, z: Iterable[int] = ()) -> CiResult:
        raise NotImplementedError

    def independent(self, x: int, y: int, z: Iterable[int] = ()) -> bool:
        return self.dependency(x, y, z) == 0

    def dependency(self, x: int, y: int, z: Iterable[int] = ()) -> float:
        raise NotImplementedError

    def channels(self, x: int, y: int, z: Iterable[int] = ()) -> tuple[float, float]:
        """(1 - p-value, severity): both grow with dependence."""
        raise NotImplementedError


class G2Tester(CiTester):
    """G^2 test on a discrete dataset with a per-query result cache.

    Queries are normalised to (min(x, y), max(x, y), sorted z) before
    lookup, so repeated or mirrored queries return identical results.
    """

    STRATA_CACHE = 2048

    def __init__(self, data: DiscreteDataset, alpha: float = 0.05, min_rows_per_dof: float = 5.0):
        if not 0 < alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        self.data = data
        self.alpha = alpha
        self.min_rows_per_dof = min_rows_per_dof
        self.n_vars = data.n_cols
        self._cols = np.ascontiguousarray(data.rows.T)
        self._cards = data.cardinalities
        self._cache: dict[tuple, CiResult] = {}
        self._strata: dict[tuple[int, ...], tuple[np.ndarray, int]] = {}

    def cache_size(self) -> int:
        return len(self._cache)

    def test(self, x: int, y: int, z: Iterable[int] = (), use_cache: bool = True) -> CiResult:
        z = _check_query(self.n_vars, x, y, z)
        if x > y:
            x, y = y, x
        key = (x, y, z)
        if use_cache:
            hit = self._cache.get(key)
            if hit is not None:
                return hit
        res = self._compute(x, y, z)
        if use_cache:
            self._cache[key] = res
        return res

    def _stratify(self, z: tuple[int, ...]) -> tuple[np.ndarray, int]:
        hit = self._strata.get(z)
        if hit is not None:
            return hit
        cols, cards = self._cols, self._cards
        n_strata = 1
        stratum = np.zeros(self.data.n_rows, dtype=np.int64)
        for w in z:
            stratum = stratum * cards[w] + cols[w]
            n_strata *= cards[w]
        if n_strata > self.data.n_rows:
            # keep the table no larger than the number of observed strata
            _, stratum = np.unique(stratum, return_inverse=True)
            n_strata = int(stratum.max()) + 1
        if len(self._strata) >= self.STRATA_CACHE:
            self._strata.clear()
        self._strata[z] = (stratum, n_strata)
        return stratum, n_strata

    def _compute(self, x: int, y: int, z: tuple[int, ...]) -> CiResult:
        cols, cards = self._cols, self._cards
        stratum, n_strata = self._stratify(z)
        cx, cy = cards[x], cards[y]
        cell = (stratum * cx + cols[x]) * cy + cols[y]
        counts = np.bincount(cell, minlength=n_strata * cx * cy).reshape(n_strata, cx, cy)
        stat, dof = g2_statistic(counts)
        if dof <= 0 or self.data.n_rows < self.min_rows_per_dof * dof:
            return CiResult(stat, dof, 1.0, 0.0)
        p = float(special.chdtrc(dof, stat))
        return CiResult(stat, dof, p, severity(p))

    def dependency(self, x: int, y: int, z: Iterable[int] = ()) -> float:
        res = self.test(x, y, z)
        return res.severity if res.p_value < self.alpha else 0.0

    def channels(self, x: int, y: int, z: Iterable[int] = ()) -> tuple[float, float]:
        res = self.test(x, y, z)
        return 1.0 - res.p_value, res.severity


class OracleTester(CiTester):
    """Perfect CI answers from d-separation in a known DAG."""

    def __init__(self, dag: Dag):
        self.dag = dag
        self.n_vars = dag.n
        self._cache: dict[tuple, bool] = {}

    def _separated(self, x: int, y: int, z: Iterable[int]) -> bool:
        z = _check_query(self.n_vars, x, y, z)
        if x > y:
            x, y = y, x
        key = (x, y, z)
        hit = self._cache.get(key)
        if hit is None:
            hit = self._cache[key] = d_separated(self.dag, x, y, z)
        return hit

    def test(self, x: int, y: int, z: Iterable[int] = ()) -> CiResult:
        if self._separated(x, y, z):
            return CiResult(0.0, 0, 1.0, 0.0)
        return CiResult(math.inf, 0, 0.0, SEVERITY_CAP)

    def dependency(self, x: int, y: int, z: Iterable[int] = ()) -> float:
        return 0.0 if self._separated(x, y, z) else 1.0

    def channels(self, x: int, y: int, z: Iterable[int] = ()) -> tuple[float, float]:
        dep = self.dependency(x, y, z)
        return dep, dep


# -- sepsets ----------------------------------------------------------------------

@dataclass(frozen=True)
class SepsetConfig:
    """Search bounds for :func:`find_sepsets`.

    Candidate pools (PC set plus the center) of at most ``exhaustive_below``
    variables are searched at every size; larger pools stop at ``max_size``.
    ``max_size=None`` removes the bound entirely.
    """

    max_size: int | None = 4
    exhaustive_below: int = 8

    def limit(self, pool_size: int) -> int:
        if self.max_size is None or pool_size <= self.exhaustive_below:
            return pool_size
        return min(self.max_size, pool_size)


@dataclass(frozen=True)
class Sepsets:
    sets: tuple[frozenset[int], ...]
    # per set: "x" (from PC_X + T), "y" (from PC_Y + T) or "xy"
    provenance: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.sets)

    def __iter__(self):
        return iter(self.sets)


def pc_sets(skel: Skeleton, ut: UnshieldedTriple) -> tuple[frozenset, frozenset, frozenset]:
    """Neighbour sets of x, y, t, each without the other triple members."""
    x, t, y = ut
    triple = {x, t, y}
    return (
        skel.neighbors(x) - triple,
        skel.neighbors(y) - triple,
        skel.neighbors(t) - triple,
    )


def find_sepsets(
    tester: CiTester,
    skel: Skeleton,
    ut: UnshieldedTriple,
    config: SepsetConfig | int | None = None,
) -> Sepsets:
    """All subsets of PC_X + {T} or PC_Y + {T} that render X and Y independent."""
    if config is None:
        config = SepsetConfig()
    elif not isinstance(config, SepsetConfig):
        config = SepsetConfig(max_size=config)
    x, t, y = ut
    if not (skel.adjacent(x, t) and skel.adjacent(y, t)) or skel.adjacent(x, y) or len({x, t, y}) < 3:
        raise InvalidNodes(f"{ut} is not an unshielded triple of the skeleton")
    pc_x, pc_y, _ = pc_sets(skel, ut)
    found: dict[frozenset[int], str] = {}
    for side, pool in (("x", pc_x | {t}), ("y", pc_y | {t})):
        pool = sorted(pool)
        for size in range(config.limit(len(pool)) + 1):
            for cand in combinations(pool, size):
                s = frozenset(cand)
                if s in found:
                    if side not in found[s]:
                        found[s] += side
                    continue
                if tester.independent(x, y, s):
                    found[s] = side
    order = sorted(found, key=lambda s: (len(s), sorted(s)))
    return Sepsets(tuple(order), tuple(found[s] for s in order))
