"""Exhaustive ground truth for small instances.

Each function here answers an existence or optimisation question by plain
enumeration, sharing no search code with the extractors it is used to check.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import mpmath

from .errors import TooLargeForExhaustive
from .graphcore import Graph, KPartiteSystem, VertexSet, as_fraction, iter_bits


def _subsets(members: Sequence[int], min_size: int = 0):
    """All subsets as (mask, size), smallest sizes first."""
    for r in range(min_size, len(members) + 1):
        for combo in itertools.combinations(members, r):
            m = 0
            for v in combo:
                m |= 1 << v
            yield m, r


def max_biclique_bruteforce(g: Graph, x: VertexSet, y: VertexSet) -> tuple[int, tuple[VertexSet, VertexSet]]:
    """Largest t with ``K_{t,t}`` between x and y, and a witness (x_class, y_class)."""
    if len(x) + len(y) > 24:
        raise TooLargeForExhaustive("max_biclique_bruteforce needs |x|+|y| <= 24")
    small, large = (x, y) if len(x) <= len(y) else (y, x)
    best_t, best = 0, (VertexSet(), VertexSet())
    for mask, size in _subsets(small.sorted(), 1):
        common = large.mask
        for v in iter_bits(mask):
            common &= g.adj[v]
        t = min(size, common.bit_count())
        if t > best_t:
            best_t = t
            best = (VertexSet(mask).first(t), VertexSet(common).first(t))
    if small is not x:
        best = (best[1], best[0])
    return best_t, best


def _twin_pairs(h: Graph) -> list[tuple[int, int]]:
    """Pairs u < v whose transposition is an automorphism of h."""
    out = []
    for u in range(h.n):
        for v in range(u + 1, h.n):
            nu = h.adj[u] & ~(1 << v)
            nv = h.adj[v] & ~(1 << u)
            if nu == nv:
                out.append((u, v))
    return out


def _blowup_exists(g: Graph, h: Graph, t: int, allowed: list[int], twins) -> tuple[VertexSet, ...] | None:
    classes: list[int] = [0] * h.n
    lower_of = {v: u for u, v in twins}

    def rec(u: int, used: int) -> bool:
        if u == h.n:
            return True
        cand = allowed[u] & ~used
        for w in range(u):
            if h.has_edge(u, w):
                for x in iter_bits(classes[w]):
                    cand &= g.adj[x]
        if cand.bit_count() < t:
            return False
        floor = -1
        if u in lower_of:
            floor = (classes[lower_of[u]] & -classes[lower_of[u]]).bit_length() - 1
        members = [v for v in iter_bits(cand)]
        for combo in itertools.combinations(members, t):
            if combo[0] <= floor:
                continue
            m = 0
            for v in combo:
                m |= 1 << v
            classes[u] = m
            if rec(u + 1, used | m):
                return True
        classes[u] = 0
        return False

    if rec(0, 0):
        return tuple(VertexSet(c) for c in classes)
    return None


def max_blowup_bruteforce(
    g: Graph, h: Graph, parts: Sequence[VertexSet] | None = None
) -> tuple[int, tuple[VertexSet, ...]]:
    """Largest t with ``H[t]`` in g (class i inside parts[i] when given), plus witness."""
    triangle = h.n == 3 and h.edge_count() == 3
    limit = 14 if triangle else 12
    if g.n > limit:
        raise TooLargeForExhaustive(f"max_blowup_bruteforce supports n <= {limit} for this pattern")
    full = (1 << g.n) - 1
    allowed = [p.mask for p in parts] if parts is not None else [full] * h.n
    twins = _twin_pairs(h) if parts is None else []
    best_t, best = 0, tuple(VertexSet() for _ in range(h.n))
    t = 1
    while t * h.n <= g.n:
        hit = _blowup_exists(g, h, t, allowed, twins)
        if hit is None:
            break
        best_t, best = t, hit
        t += 1
    return best_t, best


def _edge_counter(s: KPartiteSystem):
    rows = [tuple(r) for r in s.tuples.tolist()]

    def count(masks):
        return sum(all((m >> v) & 1 for m, v in zip(masks, r)) for r in rows)

    return count


def _bipartite_groups(s: KPartiteSystem, groups: dict) -> None:
    """Fill ``groups`` for a 2-partite system.

    For each Y subset, edge counts over all X subsets come from a subset sum
    of per-vertex degrees into Y.
    """
    adj = s.graph.adj
    xs = s.parts[0].sorted()
    nx = len(xs)
    xsub = [None] * (1 << nx)
    for idx in range(1, 1 << nx):
        ids = tuple(xs[i] for i in range(nx) if idx >> i & 1)
        xsub[idx] = (sum(1 << v for v in ids), len(ids), ids)
    ysub = [(m, r, tuple(iter_bits(m))) for m, r in _subsets(s.parts[1].sorted(), 1)]
    e = [0] * (1 << nx)
    for y, sy, yids in ysub:
        deg = [(adj[v] & y).bit_count() for v in xs]
        for idx in range(1, 1 << nx):
            low = (idx & -idx).bit_length() - 1
            ex = e[idx] = e[idx & (idx - 1)] + deg[low]
            if ex == 0:
                continue
            x, sx, xids = xsub[idx]
            key = (ex, sx * sy)
            cur = groups.get(key)
            total = sx + sy
            if cur is not None:
                ctie = cur[0]
                if total > ctie[0] or (total == ctie[0] and (xids, yids) >= ctie[1]):
                    continue
            groups[key] = ((total, (xids, yids)), (x, y))


@lru_cache(maxsize=1 << 16)
def _pow_ratio(e: int, size: int, p: int, q: int) -> Fraction:
    """(energy)^q as an exact rational, for R = p/q: e^p / size^(p-q)."""
    return Fraction(e) ** p / Fraction(size) ** (p - q)


def _energy_cmp(R) -> callable:
    r = Fraction(R).limit_denominator(1000)
    if abs(float(r) - float(R)) <= 1e-15 * max(1.0, abs(float(R))):
        p, q = r.numerator, r.denominator

        def key(e, size):
            return _pow_ratio(e, size, p, q)

        return key
    with mpmath.workdps(50):
        rr = mpmath.mpf(R)

    def key_mp(e, size):
        with mpmath.workdps(50):
            return mpmath.mpf(e) * (mpmath.mpf(e) / size) ** (rr - 1)

    return key_mp


_grouped_store: dict = {}


def _grouped(s: KPartiteSystem):
    """Best (size sum, lexicographic key, masks) for each distinct (e, size product)."""
    masks = tuple(p.mask for p in s.parts)
    if s.k == 2:
        bm = s.parts[1].mask
        key = (masks, tuple(s.graph.adj[a] & bm for a in s.parts[0]))
    else:
        key = (masks, s.tuples.tobytes())
    hit = _grouped_store.get(key)
    if hit is not None:
        return hit
    groups: dict[tuple[int, int], tuple] = {}
    if s.k == 2:
        _bipartite_groups(s, groups)
    else:
        count = _edge_counter(s)
        members = [p.sorted() for p in s.parts]
        for combo in itertools.product(*[list(_subsets(m, 1)) for m in members]):
            masks = tuple(c[0] for c in combo)
            e = count(masks)
            if e == 0:
                continue
            size = math.prod(c[1] for c in combo)
            tie = (sum(c[1] for c in combo), tuple(tuple(iter_bits(m)) for m in masks))
            cur = groups.get((e, size))
            if cur is None or tie < cur[0]:
                groups[(e, size)] = (tie, masks)
    if len(_grouped_store) > 4096:
        _grouped_store.clear()
    _grouped_store[key] = groups
    return groups


def max_energy_subsystem_bruteforce(s: KPartiteSystem, R) -> tuple[tuple[VertexSet, ...], float]:
    """Global energy maximiser over all subset tuples, with exact comparisons.

    Ties go to the least total size, then to the lexicographically least tuple
    of sorted id tuples.  An edgeless system is returned unchanged (energy 0).
    """
    if sum(s.sizes) > 24:
        raise TooLargeForExhaustive("max_energy_subsystem_bruteforce needs sum of sizes <= 24")
    groups = _grouped(s)
    if not groups:
        return tuple(s.parts), 0.0
    value = _energy_cmp(R)

    best, best_v = None, None
    for cand, (tie, _) in groups.items():
        v = value(*cand)
        if best is None or v > best_v or (v == best_v and tie < groups[best][0]):
            best, best_v = cand, v
    e, size = best
    masks = groups[best][1]
    return tuple(VertexSet(m) for m in masks), size * (e / size) ** float(R)


def find_switcher_bruteforce(g: Graph, a: VertexSet, b: VertexSet, c: VertexSet, m: int, mu=None, *, mu_sq=None):
    """Any induced ``(m, mu)``-switcher inside the tripartite graph, or ``None``.

    Every role assignment is tried (which host part plays Z; X and Y are
    symmetric).  For fixed X, Y the best Z of each size takes the vertices
    closing the most X-Y triangles, so the search over Z is exact.
    """
    from .iterate import SwitcherReport

    if len(a) + len(b) + len(c) > 18:
        raise TooLargeForExhaustive("find_switcher_bruteforce needs |a|+|b|+|c| <= 18")
    mu2 = as_fraction(mu) ** 2 if mu_sq is None else as_fraction(mu_sq)
    m = max(m, 1)
    hosts = (a, b, c)
    for zi in (2, 1, 0):
        xi, yi = [i for i in range(3) if i != zi]
        xp, yp, zp = hosts[xi], hosts[yi], hosts[zi]
        zs = zp.sorted()
        for xm, xs in _subsets(xp.sorted(), m):
            for ym, ys in _subsets(yp.sorted(), m):
                e_xy = sum((g.adj[v] & ym).bit_count() for v in iter_bits(xm))
                weights = []
                for z in zs:
                    nx = xm & g.adj[z]
                    ny = ym & g.adj[z]
                    weights.append((sum((g.adj[v] & ny).bit_count() for v in iter_bits(nx)), z))
                weights.sort(key=lambda w: (-w[0], w[1]))
                total = 0
                for j, (w, z) in enumerate(weights, start=1):
                    total += w
                    if j < m:
                        continue
                    vol = xs * ys * j
                    # T >= mu^2 |X||Y||Z| and T >= mu e(X,Y) |Z|, squared where mu enters linearly
                    if total >= mu2 * vol and e_xy > 0 and total * total >= mu2 * e_xy * e_xy * j * j:
                        zmask = 0
                        for _, zz in weights[:j]:
                            zmask |= 1 << zz
                        return SwitcherReport(
                            x=VertexSet(xm),
                            y=VertexSet(ym),
                            z=VertexSet(zmask),
                            m=m,
                            mu_sq=mu2,
                            kappa3=Fraction(total, vol),
                            dxy=Fraction(e_xy, xs * ys),
                        )
    return None
