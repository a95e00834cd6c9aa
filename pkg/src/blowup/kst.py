"""Balanced biclique extraction from dense bipartite pairs.

A pair ``(X, Y)`` of density at least ``p`` contains ``K_{t,t}`` for
``t = floor(log2 min(|X|,|Y|) / (2 log2(1/p)))``.  The extractor finds such a
biclique (and usually a larger one) by a greedy seed with local swaps, falling
back to a complete depth-first search over t-subsets of the smaller side.
"""

from __future__ import annotations

import logging
from fractions import Fraction

from .errors import BadParams, DensityTooLow, InvariantViolation
from .graphcore import BlowupCertificate, Graph, VertexSet, as_fraction, bipartite_density

log = logging.getLogger(__name__)

K2 = Graph.complete(2)
DEFAULT_NODE_BUDGET = 200_000


def kst_order(size_x: int, size_y: int, p) -> int:
    """Largest t with ``(1/p)^(2t) <= min(size_x, size_y)``, computed exactly."""
    q = as_fraction(p)
    if not 0 < q <= Fraction(1, 2):
        raise BadParams(f"p must lie in (0, 1/2], got {p}")
    m = min(size_x, size_y)
    if m < 1:
        return 0
    a, b = q.numerator, q.denominator
    t = 0
    num, den = b * b, a * a
    lhs, rhs = num, m * den
    while lhs <= rhs:
        t += 1
        lhs *= num
        rhs *= den
    return t


def _greedy(adj, pool: list[int], target: int, t: int) -> tuple[list[int], int] | None:
    """Seed with the t highest-degree pool vertices, then improve by swaps."""
    if t > len(pool):
        return None
    ranked = sorted(pool, key=lambda v: (-(adj[v] & target).bit_count(), v))
    chosen = ranked[:t]
    rest = ranked[t:]

    def common_of(vs):
        c = target
        for v in vs:
            c &= adj[v]
        return c

    common = common_of(chosen)
    for _ in range(len(pool)):
        if common.bit_count() >= t:
            break
        best = (common.bit_count(), None, None)
        for i in range(t):
            without = common_of(chosen[:i] + chosen[i + 1:])
            for j, w in enumerate(rest):
                size = (without & adj[w]).bit_count()
                if size > best[0]:
                    best = (size, i, j)
        if best[1] is None:
            break
        _, i, j = best
        chosen[i], rest[j] = rest[j], chosen[i]
        common = common_of(chosen)
    if common.bit_count() >= t:
        return sorted(chosen), common
    return None


def _search(adj, pool: list[int], target: int, t: int, budget: int | None) -> tuple[list[int], int] | None:
    """Depth-first search for t pool vertices with >= t common neighbours in target.

    Returns ``None`` when no such set exists or the node budget runs out.
    """
    order = sorted(pool, key=lambda v: (-(adj[v] & target).bit_count(), v))
    order = [v for v in order if (adj[v] & target).bit_count() >= t]
    nodes = 0
    chosen: list[int] = []

    def rec(start: int, common: int) -> int | None:
        nonlocal nodes
        if len(chosen) == t:
            return common
        need = t - len(chosen)
        for idx in range(start, len(order) - need + 1):
            nodes += 1
            if budget is not None and nodes > budget:
                raise _Budget
            v = order[idx]
            nxt = common & adj[v]
            if nxt.bit_count() < t:
                continue
            chosen.append(v)
            found = rec(idx + 1, nxt)
            if found is not None:
                return found
            chosen.pop()
        return None

    try:
        common = rec(0, target)
    except _Budget:
        return None
    if common is None:
        return None
    return sorted(chosen), common


class _Budget(Exception):
    pass


def find_biclique(g: Graph, x: VertexSet, y: VertexSet, t: int, budget: int | None = None):
    """A ``K_{t,t}`` between x and y as ``(x_class, y_class)``, or ``None``."""
    small, large = (x, y) if len(x) <= len(y) else (y, x)
    pool = small.sorted()
    hit = _greedy(g.adj, pool, large.mask, t)
    if hit is None:
        hit = _search(g.adj, pool, large.mask, t, budget)
    if hit is None:
        return None
    chosen, common = hit
    s_class = VertexSet.of(chosen)
    l_class = VertexSet(common).first(t)
    return (s_class, l_class) if small is x else (l_class, s_class)


def extract_biclique(
    g: Graph,
    x: VertexSet,
    y: VertexSet,
    p,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> BlowupCertificate:
    """A verified ``K_2[t]`` between x and y with ``t >= kst_order(|x|, |y|, p)``.

    The guaranteed order is searched without a budget (it always exists), then
    larger orders are tried with a bounded search.  A zero-order (empty)
    certificate is returned only when the pair has no edge at all.
    """
    q = as_fraction(p)
    guaranteed = kst_order(len(x), len(y), q)
    d = bipartite_density(g, x, y)
    if d < q:
        raise DensityTooLow(f"density {d} is below p={q}")
    best = None
    t = max(guaranteed, 1)
    if guaranteed >= 1:
        best = find_biclique(g, x, y, guaranteed, budget=None)
        if best is None:
            raise InvariantViolation("no biclique of the guaranteed order was found")
        t = guaranteed + 1
    limit = min(len(x), len(y))
    while t <= limit:
        hit = find_biclique(g, x, y, t, budget=node_budget)
        if hit is None:
            break
        best = hit
        t += 1
    if best is None:
        log.debug("biclique extraction degenerate: no edge between the sides")
        return BlowupCertificate.empty(K2)
    return BlowupCertificate(K2, best, len(best[0]))
