"""Graph representations and the raw counting quantities.

Vertices are integer ids ``0..n-1``.  Adjacency and vertex subsets are stored as
Python integers used as bit sets, so intersections are single ``&`` operations
and sizes are ``int.bit_count``.  Every density returned here is an exact
:class:`fractions.Fraction`; nothing on a counting path touches floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, reduce
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import EmptyPart, NotInC


def iter_bits(mask: int) -> Iterator[int]:
    """Yield the set bit positions of ``mask`` in increasing order."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def mask_of(vertices: Iterable[int]) -> int:
    m = 0
    for v in vertices:
        m |= 1 << v
    return m


def as_fraction(x) -> Fraction:
    """Exact rational view of a numeric parameter.

    Floats are snapped to the nearest rational with denominator <= 10**12, so a
    value typed as ``1/27`` compares equal to ``Fraction(1, 27)``.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(x).limit_denominator(10**12)


def log2_fraction(x: Fraction) -> float:
    return math.log2(x.numerator) - math.log2(x.denominator)


@dataclass(frozen=True)
class VertexSet:
    """An immutable set of vertex ids backed by a bit mask."""

    mask: int = 0

    @classmethod
    def of(cls, vertices: Iterable[int]) -> "VertexSet":
        return cls(mask_of(vertices))

    def __len__(self) -> int:
        return self.mask.bit_count()

    def __iter__(self) -> Iterator[int]:
        return iter_bits(self.mask)

    def __contains__(self, v: int) -> bool:
        return v >= 0 and (self.mask >> v) & 1 == 1

    def __bool__(self) -> bool:
        return self.mask != 0

    def __and__(self, other: "VertexSet") -> "VertexSet":
        return VertexSet(self.mask & other.mask)

    def __or__(self, other: "VertexSet") -> "VertexSet":
        return VertexSet(self.mask | other.mask)

    def __sub__(self, other: "VertexSet") -> "VertexSet":
        return VertexSet(self.mask & ~other.mask)

    def isdisjoint(self, other: "VertexSet") -> bool:
        return self.mask & other.mask == 0

    def issubset(self, other: "VertexSet") -> bool:
        return self.mask & ~other.mask == 0

    def sorted(self) -> list[int]:
        return list(iter_bits(self.mask))

    def first(self, t: int) -> "VertexSet":
        """The ``t`` smallest members."""
        out = 0
        m = self.mask
        for _ in range(t):
            low = m & -m
            if not low:
                break
            out |= low
            m ^= low
        return VertexSet(out)

    def __repr__(self) -> str:
        return f"VertexSet({self.sorted()})"


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on ``range(n)`` with bit-set adjacency."""

    n: int
    adj: tuple[int, ...]

    def __post_init__(self):
        if len(self.adj) != self.n:
            raise ValueError("adjacency length must equal n")
        full = (1 << self.n) - 1
        for v, nb in enumerate(self.adj):
            if nb & ~full:
                raise ValueError(f"vertex {v} has a neighbour id >= n")
            if (nb >> v) & 1:
                raise ValueError(f"self-loop at {v}")
            for u in iter_bits(nb >> (v + 1) << (v + 1)):
                if not (self.adj[u] >> v) & 1:
                    raise ValueError(f"asymmetric adjacency between {v} and {u}")

    @classmethod
    def _trusted(cls, n: int, adj: Sequence[int]) -> "Graph":
        g = object.__new__(cls)
        object.__setattr__(g, "n", n)
        object.__setattr__(g, "adj", tuple(adj))
        return g

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        adj = [0] * n
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop at {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={n}")
            adj[u] |= 1 << v
            adj[v] |= 1 << u
        return cls._trusted(n, adj)

    @classmethod
    def empty(cls, n: int) -> "Graph":
        return cls._trusted(n, [0] * n)

    @classmethod
    def complete(cls, n: int) -> "Graph":
        full = (1 << n) - 1
        return cls._trusted(n, [full ^ (1 << v) for v in range(n)])

    @classmethod
    def cycle(cls, n: int) -> "Graph":
        return cls.from_edges(n, [(i, (i + 1) % n) for i in range(n)])

    @classmethod
    def path(cls, n: int) -> "Graph":
        return cls.from_edges(n, [(i, i + 1) for i in range(n - 1)])

    @classmethod
    def complete_multipartite(cls, sizes: Sequence[int]) -> "Graph":
        n = sum(sizes)
        full = (1 << n) - 1
        adj = []
        start = 0
        for s in sizes:
            block = ((1 << s) - 1) << start
            adj.extend([full & ~block] * s)
            start += s
        return cls._trusted(n, adj)

    @property
    def vertices(self) -> VertexSet:
        return VertexSet((1 << self.n) - 1)

    def has_edge(self, u: int, v: int) -> bool:
        return (self.adj[u] >> v) & 1 == 1

    def degree(self, v: int) -> int:
        return self.adj[v].bit_count()

    def neighbors(self, v: int) -> VertexSet:
        return VertexSet(self.adj[v])

    def edges(self) -> Iterator[tuple[int, int]]:
        for v, nb in enumerate(self.adj):
            for u in iter_bits(nb >> (v + 1) << (v + 1)):
                yield v, u

    def edge_count(self) -> int:
        return sum(nb.bit_count() for nb in self.adj) // 2

    def remove_edges(self, edges: Iterable[tuple[int, int]]) -> "Graph":
        adj = list(self.adj)
        for u, v in edges:
            adj[u] &= ~(1 << v)
            adj[v] &= ~(1 << u)
        return Graph._trusted(self.n, adj)

    def induced(self, vertices: Iterable[int]) -> tuple["Graph", list[int]]:
        """Induced subgraph relabelled to ``0..m-1``; also returns new->old ids."""
        old = sorted(set(vertices))
        pos = {v: i for i, v in enumerate(old)}
        adj = []
        for v in old:
            adj.append(mask_of(pos[u] for u in iter_bits(self.adj[v]) if u in pos))
        return Graph._trusted(len(old), adj), old


def _check_disjoint_nonempty(parts: Sequence[VertexSet]) -> None:
    seen = 0
    for p in parts:
        if not p:
            raise EmptyPart("empty part")
        if seen & p.mask:
            raise ValueError("parts must be pairwise disjoint")
        seen |= p.mask


def pair_edge_count(g: Graph, a: VertexSet, b: VertexSet) -> int:
    """Number of ordered pairs (x, y) in a x b with xy an edge."""
    bm = b.mask
    return sum((g.adj[x] & bm).bit_count() for x in a)


def bipartite_density(g: Graph, a: VertexSet, b: VertexSet) -> Fraction:
    if not a or not b:
        raise EmptyPart("bipartite_density needs two non-empty sets")
    if not a.isdisjoint(b):
        raise ValueError("bipartite_density needs disjoint sets")
    return Fraction(pair_edge_count(g, a, b), len(a) * len(b))


@dataclass(frozen=True, eq=False)
class KPartiteSystem:
    """``k`` disjoint parts with a k-uniform edge relation, one vertex per part.

    For ``k == 2`` the relation is read from ``graph`` (pairs across the two
    parts).  For ``k >= 3`` it is the explicit ``tuples`` array of shape
    ``(E, k)``, rows sorted lexicographically, column ``i`` inside part ``i``.
    """

    parts: tuple[VertexSet, ...]
    graph: Graph | None = None
    tuples: np.ndarray | None = None

    def __post_init__(self):
        seen = 0
        for p in self.parts:
            if seen & p.mask:
                raise ValueError("parts must be pairwise disjoint")
            seen |= p.mask
        if self.k == 2:
            if self.graph is None:
                raise ValueError("a 2-partite system needs a graph")
        else:
            if self.tuples is None:
                raise ValueError("k >= 3 systems need explicit tuples")
            t = self.tuples
            if t.ndim != 2 or t.shape[1] != self.k:
                raise ValueError("tuples must have shape (E, k)")
            for i, p in enumerate(self.parts):
                col = t[:, i]
                if len(col) and not all((p.mask >> int(v)) & 1 for v in np.unique(col)):
                    raise ValueError(f"tuple column {i} leaves part {i}")

    @classmethod
    def bipartite(cls, g: Graph, a: VertexSet, b: VertexSet) -> "KPartiteSystem":
        return cls((a, b), graph=g)

    @classmethod
    def from_tuples(cls, parts: Sequence[VertexSet], tuples) -> "KPartiteSystem":
        arr = np.asarray(sorted(set(map(tuple, tuples))), dtype=np.int64).reshape(-1, len(parts))
        return cls(tuple(parts), tuples=arr)

    @property
    def k(self) -> int:
        return len(self.parts)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(p) for p in self.parts)

    @property
    def size_product(self) -> int:
        return math.prod(self.sizes)

    @property
    def union(self) -> VertexSet:
        return VertexSet(reduce(lambda x, y: x | y, (p.mask for p in self.parts), 0))

    def edge_count(self) -> int:
        return self.edge_count_in(self.parts)

    def edge_count_in(self, subsets: Sequence[VertexSet]) -> int:
        """e(X_1, ..., X_k) for X_i contained in the parts."""
        if self.k == 2:
            x, y = subsets
            ym = y.mask
            adj = self.graph.adj
            return sum((adj[v] & ym).bit_count() for v in x)
        if len(self.tuples) == 0:
            return 0
        keep = np.ones(len(self.tuples), dtype=bool)
        for i, s in enumerate(subsets):
            keep &= _member(self.tuples[:, i], s)
        return int(keep.sum())

    def edges(self) -> Iterator[tuple[int, ...]]:
        if self.k == 2:
            a, b = self.parts
            bm = b.mask
            for x in a:
                for y in iter_bits(self.graph.adj[x] & bm):
                    yield x, y
        else:
            for row in self.tuples.tolist():
                yield tuple(row)

    def restrict(self, subsets: Sequence[VertexSet]) -> "KPartiteSystem":
        subsets = tuple(subsets)
        for s, p in zip(subsets, self.parts):
            if not s.issubset(p):
                raise ValueError("restriction must use subsets of the parts")
        if self.k == 2:
            return KPartiteSystem(subsets, graph=self.graph)
        keep = np.ones(len(self.tuples), dtype=bool)
        for i, s in enumerate(subsets):
            keep &= _member(self.tuples[:, i], s)
        return KPartiteSystem(subsets, tuples=self.tuples[keep])

    def degrees(self, part: int) -> dict[int, int]:
        """Number of edges through each vertex of ``parts[part]``."""
        p = self.parts[part]
        if self.k == 2:
            other = self.parts[1 - part].mask
            return {v: (self.graph.adj[v] & other).bit_count() for v in p}
        counts = np.bincount(self.tuples[:, part], minlength=_max_id(self.parts) + 1)
        return {v: int(counts[v]) for v in p}

    def __repr__(self) -> str:
        return f"KPartiteSystem(sizes={self.sizes}, edges={self.edge_count()})"


def _max_id(parts: Sequence[VertexSet]) -> int:
    return max((p.mask.bit_length() for p in parts), default=0)


def _member(col: np.ndarray, s: VertexSet) -> np.ndarray:
    """Boolean membership of the ids in ``col`` inside ``s``."""
    if len(col) == 0:
        return np.zeros(0, dtype=bool)
    lookup = np.zeros(max(int(col.max()) + 1, 1), dtype=bool)
    ids = [v for v in s if v < len(lookup)]
    lookup[ids] = True
    return lookup[col]


def kpartite_density(s: KPartiteSystem) -> Fraction:
    if any(len(p) == 0 for p in s.parts):
        raise EmptyPart("kpartite_density needs non-empty parts")
    return Fraction(s.edge_count(), s.size_product)


def count_cliques(g: Graph, k: int) -> int:
    """Number of (unlabeled) k-cliques."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return g.n
    higher = [nb >> (v + 1) << (v + 1) for v, nb in enumerate(g.adj)]

    def rec(cand: int, r: int) -> int:
        if r == 1:
            return cand.bit_count()
        total = 0
        for v in iter_bits(cand):
            nxt = cand & higher[v]
            if nxt.bit_count() >= r - 1:
                total += rec(nxt, r - 1)
        return total

    return rec((1 << g.n) - 1, k)


def count_spanning_cliques(g: Graph, parts: Sequence[VertexSet]) -> int:
    """Number of tuples (v_1, ..., v_r), v_i in parts[i], that form a clique."""
    masks = [p.mask for p in parts]
    r = len(masks)
    if r == 0:
        return 1

    def rec(i: int, common: int) -> int:
        cand = masks[i] & common
        if i == r - 1:
            return cand.bit_count()
        return sum(rec(i + 1, common & g.adj[v]) for v in iter_bits(cand))

    return rec(0, -1)


def spanning_cliques(g: Graph, parts: Sequence[VertexSet]) -> np.ndarray:
    """All spanning clique tuples as an ``(E, r)`` array in lexicographic order."""
    masks = [p.mask for p in parts]
    r = len(masks)
    out: list[tuple[int, ...]] = []

    def rec(i: int, common: int, prefix: tuple[int, ...]) -> None:
        cand = masks[i] & common
        if i == r - 1:
            out.extend(prefix + (v,) for v in iter_bits(cand))
            return
        for v in iter_bits(cand):
            rec(i + 1, common & g.adj[v], prefix + (v,))

    rec(0, -1, ())
    return np.asarray(out, dtype=np.int64).reshape(-1, r)


def labeled_copies(g: Graph, h: Graph, parts: Sequence[VertexSet] | None = None) -> int:
    """Injective homomorphisms H -> G; with ``parts``, vertex i of H must land in parts[i]."""
    order = _search_order(h)
    earlier = {u: [w for w in order[: order.index(u)] if h.has_edge(u, w)] for u in order}
    allowed = [p.mask for p in parts] if parts is not None else [(1 << g.n) - 1] * h.n
    image: dict[int, int] = {}

    def rec(idx: int, used: int) -> int:
        u = order[idx]
        cand = allowed[u] & ~used
        for w in earlier[u]:
            cand &= g.adj[image[w]]
        if idx == len(order) - 1:
            return cand.bit_count()
        total = 0
        for v in iter_bits(cand):
            image[u] = v
            total += rec(idx + 1, used | (1 << v))
        return total

    if h.n == 0:
        return 1
    return rec(0, 0)


def _search_order(h: Graph) -> list[int]:
    """Greedy order maximising back-connectivity so candidate masks shrink fast."""
    if h.n == 0:
        return []
    remaining = set(range(h.n))
    start = max(remaining, key=lambda v: (h.degree(v), -v))
    order = [start]
    remaining.discard(start)
    while remaining:
        nxt = max(remaining, key=lambda v: (sum(h.has_edge(v, w) for w in order), h.degree(v), -v))
        order.append(nxt)
        remaining.discard(nxt)
    return order


def automorphism_count(h: Graph) -> int:
    return labeled_copies(h, h)


def triangle_density(g: Graph, a: VertexSet, b: VertexSet, c: VertexSet) -> Fraction:
    _check_disjoint_nonempty((a, b, c))
    return Fraction(count_spanning_cliques(g, (a, b, c)), len(a) * len(b) * len(c))


@dataclass(frozen=True, eq=False)
class MixedGraph:
    """A k-partite system ``A_1..A_k`` plus a part ``C`` joined to ``A_1 u ... u A_k``.

    ``cross[c]`` is the bit mask of the neighbours of ``c`` inside the union of
    the ``A_i``; vertices of ``C`` missing from ``cross`` have no neighbours.
    """

    system: KPartiteSystem
    c_part: VertexSet
    cross: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        union = self.system.union.mask
        if self.c_part.mask & union:
            raise ValueError("C must be disjoint from the parts")
        for c, nb in self.cross.items():
            if c not in self.c_part:
                raise ValueError(f"cross edge from {c}, which is not in C")
            if nb & ~union:
                raise ValueError(f"cross edges of {c} leave the parts")

    @classmethod
    def from_graph(
        cls,
        g: Graph,
        parts: Sequence[VertexSet],
        c_part: VertexSet,
        system: KPartiteSystem | None = None,
    ) -> "MixedGraph":
        """Triangle-style mixed graph: the system defaults to the pairs of ``g``."""
        if system is None:
            if len(parts) == 2:
                system = KPartiteSystem(tuple(parts), graph=g)
            else:
                system = KPartiteSystem(tuple(parts), tuples=spanning_cliques(g, parts))
        union = system.union.mask
        cross = {c: g.adj[c] & union for c in c_part}
        return cls(system, c_part, cross)

    @property
    def k(self) -> int:
        return self.system.k

    def neighborhood(self, c: int) -> int:
        return self.cross.get(c, 0)

    @cached_property
    def c_masks(self) -> dict[int, int]:
        """For each vertex of the parts, the mask of its neighbours in C."""
        inv: dict[int, int] = {}
        cm = self.c_part.mask
        for c, nb in self.cross.items():
            if not (cm >> c) & 1:
                continue
            bit = 1 << c
            for a in iter_bits(nb):
                inv[a] = inv.get(a, 0) | bit
        return inv

    def restrict(self, parts: Sequence[VertexSet], c_part: VertexSet | None = None) -> "MixedGraph":
        system = self.system.restrict(parts)
        c_part = self.c_part if c_part is None else c_part
        union = system.union.mask
        cross = {c: self.cross.get(c, 0) & union for c in c_part}
        return MixedGraph(system, c_part, cross)

    def with_system(self, system: KPartiteSystem) -> "MixedGraph":
        return MixedGraph(system, self.c_part, self.cross)


def edge_extension_counts(m: MixedGraph) -> list[tuple[tuple[int, ...], int]]:
    """(edge, number of c in C extending it) for every edge of the system."""
    inv = m.c_masks
    out = []
    for e in m.system.edges():
        common = -1
        for v in e:
            common &= inv.get(v, 0)
        out.append((e, common.bit_count() if common != -1 else 0))
    return out


def c_extension_counts(m: MixedGraph) -> dict[int, int]:
    """e(N_1(c), ..., N_k(c)) for every c in C."""
    s = m.system
    out = {}
    for c in m.c_part:
        nb = m.cross.get(c, 0)
        out[c] = s.edge_count_in([VertexSet(p.mask & nb) for p in s.parts])
    return out


def extension_count(m: MixedGraph) -> int:
    """Total number of (edge, c) extension pairs, summed both ways and cross-checked."""
    by_edges = sum(cnt for _, cnt in edge_extension_counts(m))
    by_c = sum(c_extension_counts(m).values())
    if by_edges != by_c:
        from .errors import InvariantViolation

        raise InvariantViolation(f"extension sums disagree: {by_edges} != {by_c}")
    return by_edges


def min_extension_density(m: MixedGraph) -> Fraction:
    if not m.c_part:
        raise EmptyPart("C is empty")
    counts = [cnt for _, cnt in edge_extension_counts(m)]
    if not counts:
        return Fraction(0)
    return Fraction(min(counts), len(m.c_part))


def restrict_to_extension(m: MixedGraph, c: int) -> KPartiteSystem:
    if c not in m.c_part:
        raise NotInC(f"{c} is not in C")
    nb = m.cross.get(c, 0)
    return m.system.restrict([VertexSet(p.mask & nb) for p in m.system.parts])


@dataclass(frozen=True)
class BlowupCertificate:
    """Classes witnessing ``pattern[t]`` inside a host graph."""

    pattern: Graph
    classes: tuple[VertexSet, ...]
    t: int

    @classmethod
    def empty(cls, pattern: Graph) -> "BlowupCertificate":
        return cls(pattern, tuple(VertexSet() for _ in range(pattern.n)), 0)

    def to_dict(self) -> dict:
        return {
            "pattern_n": self.pattern.n,
            "pattern_edges": [list(e) for e in self.pattern.edges()],
            "t": self.t,
            "classes": [c.sorted() for c in self.classes],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "BlowupCertificate":
        pattern = Graph.from_edges(int(d["pattern_n"]), [tuple(e) for e in d["pattern_edges"]])
        classes = tuple(VertexSet.of(int(v) for v in c) for c in d["classes"])
        return cls(pattern, classes, int(d["t"]))


def classes_complete(g: Graph, pattern: Graph, classes: Sequence[VertexSet]) -> bool:
    """Disjoint classes inside ``g`` with every pattern edge fully present between its classes."""
    if len(classes) != pattern.n:
        return False
    full = (1 << g.n) - 1
    seen = 0
    for c in classes:
        if c.mask < 0 or c.mask & ~full or seen & c.mask:
            return False
        seen |= c.mask
    for u, v in pattern.edges():
        target = classes[v].mask
        for x in classes[u]:
            if target & ~g.adj[x]:
                return False
    return True


def verify_blowup(g: Graph, cert: BlowupCertificate) -> bool:
    if cert.t < 0 or any(len(c) != cert.t for c in cert.classes):
        return False
    return classes_complete(g, cert.pattern, cert.classes)


def verify_complete_multipartite(g: Graph, classes: Sequence[VertexSet]) -> bool:
    """True iff the classes are disjoint and every cross pair is an edge of ``g``."""
    return classes_complete(g, Graph.complete(len(classes)), classes)
