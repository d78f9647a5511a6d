"""Directed, undirected and partially directed graphs over indexed nodes.

Nodes are identified by integer index; names are carried along as metadata
and only matter when graphs are written to or read from disk.
"""
from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import Iterable, NamedTuple, Sequence


class GraphError(ValueError):
    pass


class CycleDetected(GraphError):
    pass


class InvalidNodes(GraphError):
    pass


class OrientationConflict(GraphError):
    pass


def _default_names(n: int) -> tuple[str, ...]:
    return tuple(f"X{i}" for i in range(n))


def _check_names(names) -> tuple[str, ...]:
    names = tuple(str(s) for s in names)
    if len(set(names)) != len(names):
        raise GraphError("duplicate node names")
    return names


def _pair(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def _check_index(n: int, *nodes: int) -> None:
    for v in nodes:
        if not 0 <= v < n:
            raise InvalidNodes(f"node index {v} out of range for {n} nodes")


def _kahn(n: int, edges: Iterable[tuple[int, int]]) -> list[int]:
    children = [[] for _ in range(n)]
    indeg = [0] * n
    for u, v in edges:
        children[u].append(v)
        indeg[v] += 1
    heap = [i for i in range(n) if indeg[i] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        u = heapq.heappop(heap)
        order.append(u)
        for v in children[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                heapq.heappush(heap, v)
    if len(order) != n:
        raise CycleDetected("directed edge set contains a cycle")
    return order


@dataclass(frozen=True)
class Dag:
    node_names: tuple[str, ...]
    edges: frozenset[tuple[int, int]]

    def __init__(self, node_names: Sequence[str], edges: Iterable[tuple[int, int]] = ()):
        names = _check_names(node_names)
        edge_set = frozenset((int(u), int(v)) for u, v in edges)
        for u, v in edge_set:
            _check_index(len(names), u, v)
            if u == v:
                raise GraphError(f"self-loop on node {u}")
            if (v, u) in edge_set:
                raise CycleDetected(f"edges {u}->{v} and {v}->{u} form a 2-cycle")
        object.__setattr__(self, "node_names", names)
        object.__setattr__(self, "edges", edge_set)
        # validates acyclicity and caches the order
        object.__setattr__(self, "_order", tuple(_kahn(len(names), edge_set)))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]] = ()) -> "Dag":
        return cls(_default_names(n), edges)

    @property
    def n(self) -> int:
        return len(self.node_names)

    @cached_property
    def _parents(self) -> tuple[frozenset[int], ...]:
        pa = [set() for _ in range(self.n)]
        for u, v in self.edges:
            pa[v].add(u)
        return tuple(frozenset(p) for p in pa)

    @cached_property
    def _children(self) -> tuple[frozenset[int], ...]:
        ch = [set() for _ in range(self.n)]
        for u, v in self.edges:
            ch[u].add(v)
        return tuple(frozenset(c) for c in ch)

    def parents(self, v: int) -> frozenset[int]:
        return self._parents[v]

    def children(self, v: int) -> frozenset[int]:
        return self._children[v]

    def adjacent(self, a: int, b: int) -> bool:
        return (a, b) in self.edges or (b, a) in self.edges

    def __repr__(self) -> str:
        return f"Dag(n={self.n}, edges={sorted(self.edges)})"


@dataclass(frozen=True)
class Skeleton:
    node_names: tuple[str, ...]
    edges: frozenset[tuple[int, int]]

    def __init__(self, node_names: Sequence[str], edges: Iterable[tuple[int, int]] = ()):
        names = _check_names(node_names)
        edge_set = set()
        for a, b in edges:
            a, b = int(a), int(b)
            _check_index(len(names), a, b)
            if a == b:
                raise GraphError(f"self-loop on node {a}")
            edge_set.add(_pair(a, b))
        object.__setattr__(self, "node_names", names)
        object.__setattr__(self, "edges", frozenset(edge_set))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]] = ()) -> "Skeleton":
        return cls(_default_names(n), edges)

    @property
    def n(self) -> int:
        return len(self.node_names)

    @cached_property
    def _nbrs(self) -> tuple[frozenset[int], ...]:
        nb = [set() for _ in range(self.n)]
        for a, b in self.edges:
            nb[a].add(b)
            nb[b].add(a)
        return tuple(frozenset(s) for s in nb)

    def neighbors(self, v: int) -> frozenset[int]:
        return self._nbrs[v]

    def adjacent(self, a: int, b: int) -> bool:
        return _pair(a, b) in self.edges

    def __repr__(self) -> str:
        return f"Skeleton(n={self.n}, edges={sorted(self.edges)})"


@dataclass(frozen=True)
class Pdag:
    """Mixed graph; used to hold partial DAGs and CPDAGs."""

    node_names: tuple[str, ...]
    directed_edges: frozenset[tuple[int, int]]
    undirected_edges: frozenset[tuple[int, int]]

    def __init__(
        self,
        node_names: Sequence[str],
        directed_edges: Iterable[tuple[int, int]] = (),
        undirected_edges: Iterable[tuple[int, int]] = (),
    ):
        names = _check_names(node_names)
        n = len(names)
        directed = frozenset((int(u), int(v)) for u, v in directed_edges)
        undirected = frozenset(_pair(int(a), int(b)) for a, b in undirected_edges)
        for u, v in directed | undirected:
            _check_index(n, u, v)
            if u == v:
                raise GraphError(f"self-loop on node {u}")
        if {_pair(u, v) for u, v in directed} & undirected:
            raise GraphError("pair present as both directed and undirected edge")
        _kahn(n, directed)
        object.__setattr__(self, "node_names", names)
        object.__setattr__(self, "directed_edges", directed)
        object.__setattr__(self, "undirected_edges", undirected)

    @property
    def n(self) -> int:
        return len(self.node_names)

    def skeleton(self) -> Skeleton:
        return Skeleton(self.node_names, set(self.directed_edges) | set(self.undirected_edges))

    def __repr__(self) -> str:
        return (
            f"Pdag(n={self.n}, directed={sorted(self.directed_edges)}, "
            f"undirected={sorted(self.undirected_edges)})"
        )


class UnshieldedTriple(NamedTuple):
    """Triple <x, t, y> with center t, stored with x < y."""

    x: int
    t: int
    y: int

    @classmethod
    def make(cls, a: int, t: int, b: int) -> "UnshieldedTriple":
        a, b = _pair(a, b)
        return cls(a, t, b)


def topological_order(dag: Dag) -> list[int]:
    """Parents-before-children order; ties broken by smallest index."""
    return list(dag._order)


def d_separated(dag: Dag, x: int, y: int, z: Iterable[int] = ()) -> bool:
    """Reachability ("Bayes-ball") test of x _||_ y | z in `dag`."""
    z = frozenset(z)
    _check_index(dag.n, x, y, *z)
    if x == y or x in z or y in z:
        raise InvalidNodes("d-separation requires x != y and x, y not in z")

    ancestors_of_z = set(z)
    stack = list(z)
    while stack:
        for p in dag.parents(stack.pop()):
            if p not in ancestors_of_z:
                ancestors_of_z.add(p)
                stack.append(p)

    # (node, True) = reached from a child, (node, False) = reached from a parent
    seen = set()
    queue = deque([(x, True)])
    while queue:
        v, from_child = queue.popleft()
        if (v, from_child) in seen:
            continue
        seen.add((v, from_child))
        if v == y:
            return False
        if from_child:
            if v not in z:
                queue.extend((p, True) for p in dag.parents(v))
                queue.extend((c, False) for c in dag.children(v))
        else:
            if v not in z:
                queue.extend((c, False) for c in dag.children(v))
            if v in ancestors_of_z:
                queue.extend((p, True) for p in dag.parents(v))
    return True


def skeleton_of(dag: Dag) -> Skeleton:
    return Skeleton(dag.node_names, dag.edges)


def unshielded_triples(skel: Skeleton) -> list[UnshieldedTriple]:
    uts = []
    for t in range(skel.n):
        for a, b in combinations(sorted(skel.neighbors(t)), 2):
            if not skel.adjacent(a, b):
                uts.append(UnshieldedTriple(a, t, b))
    uts.sort()
    return uts


def v_structures_of(dag: Dag) -> frozenset[UnshieldedTriple]:
    out = set()
    for t in range(dag.n):
        for a, b in combinations(sorted(dag.parents(t)), 2):
            if not dag.adjacent(a, b):
                out.add(UnshieldedTriple(a, t, b))
    return frozenset(out)


class _MixedState:
    """Mutable adjacency bookkeeping for Meek rule propagation."""

    def __init__(self, pdag: Pdag):
        n = pdag.n
        self.pa = [set() for _ in range(n)]
        self.ch = [set() for _ in range(n)]
        self.und = [set() for _ in range(n)]
        for u, v in pdag.directed_edges:
            self.pa[v].add(u)
            self.ch[u].add(v)
        for a, b in pdag.undirected_edges:
            self.und[a].add(b)
            self.und[b].add(a)

    def adjacent(self, a: int, b: int) -> bool:
        return b in self.pa[a] or b in self.ch[a] or b in self.und[a]

    def orient(self, a: int, b: int) -> None:
        self.und[a].discard(b)
        self.und[b].discard(a)
        self.ch[a].add(b)
        self.pa[b].add(a)

    def implied(self, a: int, b: int) -> bool:
        """Whether one of R1-R4 forces the undirected edge a-b into a->b."""
        # R1: c -> a - b, c and b nonadjacent
        for c in self.pa[a]:
            if not self.adjacent(c, b):
                return True
        # R2: a -> c -> b
        if self.ch[a] & self.pa[b]:
            return True
        # R3: a - c -> b, a - d -> b, c and d nonadjacent
        cands = sorted(self.und[a] & self.pa[b])
        for c, d in combinations(cands, 2):
            if not self.adjacent(c, d):
                return True
        # R4: a - c, c -> d -> b, a adjacent to d, c and b nonadjacent
        for d in self.pa[b]:
            if not self.adjacent(a, d):
                continue
            for c in self.pa[d]:
                if c in self.und[a] and not self.adjacent(c, b):
                    return True
        return False


def meek_closure(pdag: Pdag) -> Pdag:
    """Apply Meek rules R1-R4 to a fixpoint.

    Raises
    ------
    OrientationConflict
        If the rules force some undirected edge in both directions, or the
        propagated orientations close a directed cycle.
    """
    state = _MixedState(pdag)
    changed = True
    while changed:
        changed = False
        for a in range(pdag.n):
            for b in sorted(state.und[a]):
                if b < a:
                    continue
                fwd = state.implied(a, b)
                bwd = state.implied(b, a)
                if fwd and bwd:
                    raise OrientationConflict(f"edge {a}-{b} forced in both directions")
                if fwd:
                    state.orient(a, b)
                    changed = True
                elif bwd:
                    state.orient(b, a)
                    changed = True
    directed = {(u, v) for u in range(pdag.n) for v in state.ch[u]}
    undirected = {(a, b) for a in range(pdag.n) for b in state.und[a] if a < b}
    try:
        return Pdag(pdag.node_names, directed, undirected)
    except CycleDetected as exc:
        raise OrientationConflict("orientation propagation produced a directed cycle") from exc


def pdag_from_vstructures(skel: Skeleton, vstructs: Iterable[UnshieldedTriple]) -> Pdag:
    """Orient x->t<-y for each triple, leave other skeleton edges undirected."""
    directed = set()
    for x, t, y in vstructs:
        for p in (x, y):
            if (t, p) in directed:
                raise OrientationConflict(f"edge {p}-{t} oriented both ways")
            if not skel.adjacent(p, t):
                raise GraphError(f"triple edge {p}-{t} not in skeleton")
            directed.add((p, t))
    undirected = skel.edges - {_pair(u, v) for u, v in directed}
    try:
        return Pdag(skel.node_names, directed, undirected)
    except CycleDetected as exc:
        raise OrientationConflict("v-structure orientations form a directed cycle") from exc


def cpdag_of(dag: Dag) -> Pdag:
    return meek_closure(pdag_from_vstructures(skeleton_of(dag), v_structures_of(dag)))


# -- text format ------------------------------------------------------------

def graph_to_dict(g: Dag | Pdag | Skeleton) -> dict:
    names = list(g.node_names)
    if isinstance(g, Dag):
        directed, undirected = g.edges, ()
    elif isinstance(g, Pdag):
        directed, undirected = g.directed_edges, g.undirected_edges
    else:
        directed, undirected = (), g.edges
    return {
        "nodes": names,
        "directed_edges": [[names[u], names[v]] for u, v in sorted(directed)],
        "undirected_edges": [[names[a], names[b]] for a, b in sorted(undirected)],
    }


def _edges_by_name(doc: dict, key: str, index: dict[str, int]) -> list[tuple[int, int]]:
    try:
        return [(index[a], index[b]) for a, b in doc.get(key, [])]
    except KeyError as exc:
        raise GraphError(f"unknown node {exc.args[0]!r} in {key}") from None
    except (TypeError, ValueError):
        raise GraphError(f"malformed {key}: expected list of [name, name]") from None


def graph_from_dict(doc: dict, kind: str = "pdag") -> Dag | Pdag | Skeleton:
    """Inverse of `graph_to_dict`; `kind` is one of dag, pdag, skeleton."""
    unknown = set(doc) - {"nodes", "directed_edges", "undirected_edges"}
    if unknown:
        raise GraphError(f"unknown graph fields: {sorted(unknown)}")
    names = [str(s) for s in doc["nodes"]]
    index = {s: i for i, s in enumerate(names)}
    directed = _edges_by_name(doc, "directed_edges", index)
    undirected = _edges_by_name(doc, "undirected_edges", index)
    if kind == "dag":
        if undirected:
            raise GraphError("a DAG cannot contain undirected edges")
        return Dag(names, directed)
    if kind == "skeleton":
        return Skeleton(names, directed + undirected)
    if kind == "pdag":
        return Pdag(names, directed, undirected)
    raise ValueError(f"unknown graph kind {kind!r}")
