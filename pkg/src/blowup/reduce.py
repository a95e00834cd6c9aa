"""From a graph with many (k+1)-cliques to a k-mixed graph with certified extension density.

Two strategies are offered.  ``pruning`` (the default) takes a random spanning
partition directly, picks the part that plays ``C`` and keeps exactly the
k-cliques with enough extensions, choosing the threshold as large as the
density budget allows.  ``regularity`` first refines the partition into
cylinders with an epsilon-regularity searcher and works inside the densest
regular cylinder.  Either way the returned inequalities are recomputed from
scratch before the result is marked certified.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Literal, Sequence

import numpy as np

from .errors import InvariantViolation, NotEnoughCliques, RegularityNotCertified, ReductionFailed, RetriesExhausted
from .graphcore import (
    Graph,
    KPartiteSystem,
    MixedGraph,
    VertexSet,
    as_fraction,
    count_cliques,
    count_spanning_cliques,
    edge_extension_counts,
    iter_bits,
    min_extension_density,
    pair_edge_count,
    spanning_cliques,
)

log = logging.getLogger(__name__)

Strategy = Literal["pruning", "regularity"]
EXHAUSTIVE_PAIR_LIMIT = 20


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def random_spanning_partition(
    g: Graph, r: int, gamma, seed=0, max_tries: int = 200
) -> tuple[VertexSet, ...]:
    """Uniform random r-partition whose spanning r-clique count is >= gamma * r! * prod |V_i|."""
    gam = as_fraction(gamma)
    rng = _rng(seed)
    need = gam * math.factorial(r)
    for _ in range(max_tries):
        labels = rng.integers(r, size=g.n)
        parts = tuple(VertexSet.of(np.flatnonzero(labels == i).tolist()) for i in range(r))
        if any(len(p) == 0 for p in parts):
            continue
        size = math.prod(len(p) for p in parts)
        if count_spanning_cliques(g, parts) >= need * size:
            return parts
    raise RetriesExhausted(f"no spanning partition reached the target after {max_tries} tries")


@dataclass(frozen=True)
class Regular:
    exhaustive: bool


@dataclass(frozen=True)
class Witness:
    a_sub: VertexSet
    b_sub: VertexSet
    deviation: Fraction


def _density(g: Graph, a: VertexSet, b: VertexSet) -> Fraction:
    return Fraction(pair_edge_count(g, a, b), len(a) * len(b))


def _extreme_pairs(g: Graph, s_sub: int, t_ids: list[int], j: int):
    """The j-subsets of t_ids with the most and the fewest edges to s_sub."""
    degs = sorted(((g.adj[v] & s_sub).bit_count(), v) for v in t_ids)
    low = degs[:j]
    high = degs[-j:]
    return (sum(d for d, _ in high), [v for _, v in high]), (sum(d for d, _ in low), [v for _, v in low])


def regularity_check(g: Graph, a: VertexSet, b: VertexSet, epsilon, budget: int = 200, seed=0):
    """Search for a pair of large subsets whose density deviates by at least epsilon.

    For ``|a| + |b| <= 20`` the search is exhaustive: all large subsets of the
    smaller side are enumerated and, for each size of the other subset, only
    the max- and min-edge choices can be extreme.  Above that, ``budget``
    random subsets are tried and ``Regular(exhaustive=False)`` is advisory.
    """
    eps = as_fraction(epsilon)
    if not 0 < eps < Fraction(1, 2):
        raise ValueError("epsilon must lie in (0, 1/2)")
    d = _density(g, a, b)
    swap = len(a) > len(b)
    s, t = (b, a) if swap else (a, b)
    s_ids, t_ids = s.sorted(), t.sorted()
    s_min = math.ceil(eps * len(s))
    t_min = math.ceil(eps * len(t))

    def found(s_mask: int, t_list: list[int], e: int):
        sub_s, sub_t = VertexSet(s_mask), VertexSet.of(t_list)
        dev = abs(Fraction(e, len(sub_s) * len(sub_t)) - d)
        if dev >= eps:
            pair = (sub_t, sub_s) if swap else (sub_s, sub_t)
            w = Witness(pair[0], pair[1], dev)
            if abs(_density(g, w.a_sub, w.b_sub) - d) != dev:
                raise InvariantViolation("witness deviation does not recompute")
            return w
        return None

    if len(a) + len(b) <= EXHAUSTIVE_PAIR_LIMIT:
        for r in range(max(s_min, 1), len(s_ids) + 1):
            for combo in itertools.combinations(s_ids, r):
                s_mask = 0
                for v in combo:
                    s_mask |= 1 << v
                for j in range(max(t_min, 1), len(t_ids) + 1):
                    (e_hi, hi), (e_lo, lo) = _extreme_pairs(g, s_mask, t_ids, j)
                    w = found(s_mask, hi, e_hi) or found(s_mask, lo, e_lo)
                    if w is not None:
                        return w
        return Regular(exhaustive=True)

    rng = _rng(seed)
    r = max(s_min, 1)
    j = max(t_min, 1)
    for _ in range(budget):
        combo = rng.choice(len(s_ids), size=r, replace=False)
        s_mask = 0
        for i in combo:
            s_mask |= 1 << s_ids[int(i)]
        (e_hi, hi), (e_lo, lo) = _extreme_pairs(g, s_mask, t_ids, j)
        w = found(s_mask, hi, e_hi) or found(s_mask, lo, e_lo)
        if w is not None:
            return w
    return Regular(exhaustive=False)


@dataclass(frozen=True)
class RegularityConfig:
    epsilon: Fraction
    r: int
    beta_floor: float | None = None

    def __post_init__(self):
        eps = as_fraction(self.epsilon)
        object.__setattr__(self, "epsilon", eps)
        if not 0 < eps < Fraction(1, 2):
            raise ValueError("epsilon must lie in (0, 1/2)")
        if self.beta_floor is None:
            object.__setattr__(self, "beta_floor", float(eps) ** 4)


@dataclass(frozen=True)
class Cylinder:
    sets: tuple[VertexSet, ...]
    regular: bool = False
    exhaustive: bool = False

    @property
    def volume(self) -> int:
        return math.prod(len(w) for w in self.sets)


@dataclass
class CylinderPartition:
    parts: tuple[VertexSet, ...]
    cylinders: list[Cylinder] = field(default_factory=list)

    @property
    def total(self) -> int:
        return math.prod(len(p) for p in self.parts)

    def irregular_mass(self) -> Fraction:
        bad = sum(c.volume for c in self.cylinders if not c.regular)
        return Fraction(bad, self.total)

    def locate(self, tup: Sequence[int]) -> int:
        """Index of the unique cylinder containing the tuple."""
        hits = [i for i, c in enumerate(self.cylinders) if all(v in w for v, w in zip(tup, c.sets))]
        if len(hits) != 1:
            raise InvariantViolation(f"tuple {tuple(tup)} lies in {len(hits)} cylinders")
        return hits[0]


def _check_cylinder(g: Graph, sets, eps, budget, seed):
    exhaustive = True
    for i, j in itertools.combinations(range(len(sets)), 2):
        res = regularity_check(g, sets[i], sets[j], eps, budget=budget, seed=seed)
        if isinstance(res, Witness):
            return (i, j, res), False
        exhaustive = exhaustive and res.exhaustive
    return None, exhaustive


def cylinder_partition(
    g: Graph, parts: Sequence[VertexSet], cfg: RegularityConfig, seed=0, budget: int = 200
) -> CylinderPartition:
    """Refine the full product into cylinders until the irregular mass is at most epsilon.

    A cylinder with a witness on pair (i, j) is split along the witness sets
    into at most four cylinders.  Refinement stops, leaving the rest labelled
    irregular, once a split would create a piece below ``beta_floor * |V_i|``.
    """
    if len(parts) < 2:
        raise ValueError("need at least two parts")
    parts = tuple(parts)
    eps = cfg.epsilon
    out = CylinderPartition(parts)
    pending = [Cylinder(parts)]
    done: list[Cylinder] = []
    floor = [cfg.beta_floor * len(p) for p in parts]
    total = out.total

    def mass(cs):
        return Fraction(sum(c.volume for c in cs), total)

    stuck: list[Cylinder] = []
    while pending and mass(pending) + mass(stuck) > eps:
        pending.sort(key=lambda c: (-c.volume, [w.sorted() for w in c.sets]))
        cyl = pending.pop(0)
        hit, exhaustive = _check_cylinder(g, cyl.sets, eps, budget, seed)
        if hit is None:
            done.append(Cylinder(cyl.sets, regular=True, exhaustive=exhaustive))
            continue
        i, j, w = hit
        pieces_i = [p for p in (w.a_sub, cyl.sets[i] - w.a_sub) if p]
        pieces_j = [p for p in (w.b_sub, cyl.sets[j] - w.b_sub) if p]
        if any(len(p) < floor[i] for p in pieces_i) or any(len(p) < floor[j] for p in pieces_j):
            stuck.append(cyl)
            continue
        for pi, pj in itertools.product(pieces_i, pieces_j):
            sets = list(cyl.sets)
            sets[i], sets[j] = pi, pj
            pending.append(Cylinder(tuple(sets)))
    out.cylinders = done + [Cylinder(c.sets) for c in stuck] + [Cylinder(c.sets) for c in pending]
    return out


def _hom_count(g: Graph, sets: Sequence[VertexSet], h: Graph) -> int:
    """Tuples (v_1..v_t) in V_1 x ... x V_t mapping every edge of h to an edge of g."""
    t = h.n

    def rec(i: int, chosen: list[int]) -> int:
        cand = sets[i].mask
        for j in range(i):
            if h.has_edge(i, j):
                cand &= g.adj[chosen[j]]
        if i == t - 1:
            return cand.bit_count()
        total = 0
        for v in iter_bits(cand):
            chosen.append(v)
            total += rec(i + 1, chosen)
            chosen.pop()
        return total

    return rec(0, []) if t else 1


def counting_lemma_check(g: Graph, sets: Sequence[VertexSet], h: Graph, epsilon):
    """(lower, upper, actual) homomorphism counts; every h-edge pair must be exhaustively regular."""
    eps = as_fraction(epsilon)
    dens = Fraction(1)
    for i, j in h.edges():
        res = regularity_check(g, sets[i], sets[j], eps)
        if not (isinstance(res, Regular) and res.exhaustive):
            raise RegularityNotCertified(f"pair ({i}, {j}) is not certified regular")
        dens *= _density(g, sets[i], sets[j])
    vol = math.prod(len(s) for s in sets)
    slack = eps * math.comb(h.n, 2)
    lower = (dens - slack) * vol
    upper = (dens + slack) * vol
    actual = _hom_count(g, sets, h)
    if not lower <= actual <= upper:
        raise InvariantViolation(f"count {actual} outside [{lower}, {upper}]")
    return lower, upper, actual


def prune_low_extension_edges(m: MixedGraph, tau, inclusive: bool = False) -> MixedGraph:
    """Drop the A-edges extended by fewer than ``tau*|C|`` vertices of C.

    With ``inclusive`` the edges with at most ``tau*|C|`` extensions are
    dropped instead.  Only edges of the k-partite system are removed.
    """
    t = as_fraction(tau) * len(m.c_part)
    if inclusive:
        drop = [e for e, cnt in edge_extension_counts(m) if cnt <= t]
    else:
        drop = [e for e, cnt in edge_extension_counts(m) if cnt < t]
    if not drop:
        return m
    s = m.system
    if s.k == 2:
        system = KPartiteSystem(s.parts, graph=s.graph.remove_edges(drop))
    else:
        gone = set(drop)
        keep = [row for row in map(tuple, s.tuples.tolist()) if row not in gone]
        system = KPartiteSystem.from_tuples(s.parts, keep)
    return m.with_system(system)


@dataclass
class ReductionResult:
    mixed: MixedGraph
    tau: Fraction
    zeta: float
    gamma_in: Fraction
    certified: bool
    strategy: str
    parts: tuple[VertexSet, ...]
    c_index: int
    notes: list[str] = field(default_factory=list)

    @property
    def density(self) -> Fraction:
        s = self.mixed.system
        return Fraction(s.edge_count(), s.size_product)

    def summary(self) -> dict:
        return {
            "strategy": self.strategy,
            "tau": str(self.tau),
            "zeta": self.zeta,
            "gamma_in": str(self.gamma_in),
            "certified": self.certified,
            "density": str(self.density),
            "sizes": [len(p) for p in self.mixed.system.parts] + [len(self.mixed.c_part)],
            "notes": list(self.notes),
        }


def _pair_density_product(g: Graph, sets: Sequence[VertexSet], skip: int | None = None) -> Fraction:
    out = Fraction(1)
    for i, j in itertools.combinations(range(len(sets)), 2):
        if skip is not None and skip not in (i, j):
            continue
        out *= _density(g, sets[i], sets[j])
    return out


def _choose_c(g: Graph, sets: Sequence[VertexSet]) -> int:
    """Index maximising the product of densities from that part to the others (first on ties)."""
    best, best_val = 0, Fraction(-1)
    for i in range(len(sets)):
        val = _pair_density_product(g, sets, skip=i)
        if val > best_val:
            best, best_val = i, val
    return best


def _kclique_mixed(g: Graph, a_parts: Sequence[VertexSet], c_part: VertexSet) -> MixedGraph:
    """Mixed graph with all spanning k-cliques of the A-parts and all G-edges to C."""
    a_parts = tuple(a_parts)
    union = 0
    for p in a_parts:
        union |= p.mask
    if len(a_parts) == 2:
        a, b = a_parts
        adj = [0] * g.n
        for v in a:
            adj[v] = g.adj[v] & b.mask
        for v in b:
            adj[v] = g.adj[v] & a.mask
        system = KPartiteSystem(a_parts, graph=Graph._trusted(g.n, adj))
    else:
        system = KPartiteSystem(a_parts, tuples=spanning_cliques(g, a_parts))
    cross = {c: g.adj[c] & union for c in c_part}
    return MixedGraph(system, c_part, cross)


def certify(red_mixed: MixedGraph, tau: Fraction, gamma: Fraction, k: int) -> tuple[bool, list[str]]:
    """Recompute the reduction inequalities; returns (ok, failed checks)."""
    fails = []
    s = red_mixed.system
    if s.edge_count() == 0:
        return False, ["system is edgeless"]
    tc = min_extension_density(red_mixed)
    d = Fraction(s.edge_count(), s.size_product)
    if tc < tau:
        fails.append(f"tau_C={tc} < tau={tau}")
    if d * tau < gamma / 4:
        fails.append(f"d*tau={d * tau} < gamma/4={gamma / 4}")
    if tau > Fraction(1, 2):
        fails.append("tau exceeds 1/2")
    # tau >= gamma^(2/(k+1)) compared exactly as tau^(k+1) >= gamma^2, capped at 1/2
    if tau < Fraction(1, 2) and tau ** (k + 1) < gamma**2:
        fails.append("tau below gamma^(2/(k+1))")
    return not fails, fails


def _pruning_threshold(m: MixedGraph, gamma: Fraction) -> Fraction | None:
    """Largest tau <= 1/2 with d(post-prune) * tau >= gamma/4, over the exact breakpoints."""
    counts = sorted(cnt for _, cnt in edge_extension_counts(m))
    size_c = len(m.c_part)
    vol = m.system.size_product
    if not counts or size_c == 0:
        return None
    half = Fraction(1, 2)
    candidates = sorted({min(Fraction(c, size_c), half) for c in counts if c > 0} | {half}, reverse=True)
    for tau in candidates:
        kept = sum(1 for c in counts if c >= tau * size_c)
        if kept and Fraction(kept, vol) * tau >= gamma / 4:
            return tau
    return None


def regularize_cliques(
    g: Graph,
    k: int,
    gamma,
    strategy: Strategy = "pruning",
    seed=0,
    parts: Sequence[VertexSet] | None = None,
    epsilon=None,
) -> ReductionResult:
    """Build a k-mixed graph whose k-edges are k-cliques of g, with tau_C >= tau and d*tau >= gamma/4.

    ``gamma`` is the unlabeled (k+1)-clique density: at least ``gamma*N^(k+1)``
    copies are required.  With explicit ``parts`` the random partition is
    skipped.  Results failing recomputation are returned with
    ``certified=False``; a :class:`ReductionFailed` is raised only when no
    threshold gives any kept edge at all.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    gam = as_fraction(gamma)
    if gam <= 0:
        raise NotEnoughCliques("gamma must be positive")
    n = g.n
    if parts is None:
        have = count_cliques(g, k + 1)
        if have < gam * n ** (k + 1) or have == 0:
            raise NotEnoughCliques(f"{have} copies of K_{k + 1} < gamma*N^{k + 1}")
        parts = random_spanning_partition(g, k + 1, gam, seed=seed)
    else:
        parts = tuple(parts)
        if len(parts) != k + 1:
            raise ValueError("need exactly k+1 parts")
        if count_spanning_cliques(g, parts) == 0:
            raise NotEnoughCliques("no spanning clique across the given parts")
    notes: list[str] = []

    if strategy == "pruning":
        sets = parts
    elif strategy == "regularity":
        eps = as_fraction(epsilon) if epsilon is not None else Fraction(1, 4)
        cp = cylinder_partition(g, parts, RegularityConfig(eps, k + 1), seed=seed)
        regular = [c for c in cp.cylinders if c.regular]
        if not regular:
            raise ReductionFailed("no regular cylinder found at this scale")
        best = max(
            regular,
            key=lambda c: (_pair_density_product(g, c.sets), [tuple(-v for v in w.sorted()) for w in c.sets]),
        )
        top = _pair_density_product(g, best.sets)
        if top < gam * (math.factorial(k + 1) - 1):
            notes.append("densest regular cylinder is below gamma((k+1)!-1)")
        sets = best.sets
        if not best.exhaustive:
            notes.append("regularity of the chosen cylinder is advisory")
    else:
        raise ValueError(f"unknown strategy {strategy!r}")

    ci = _choose_c(g, sets)
    a_parts = [p for i, p in enumerate(sets) if i != ci]
    c_part = sets[ci]
    full = _kclique_mixed(g, a_parts, c_part)
    if full.system.edge_count() == 0:
        raise ReductionFailed("no k-clique across the A-parts")

    if strategy == "pruning":
        tau = _pruning_threshold(full, gam)
        if tau is None:
            raise ReductionFailed("no threshold satisfies d*tau >= gamma/4")
        mixed = prune_low_extension_edges(full, tau)
    else:
        tau = Fraction(2, 5) * math.prod(_density(g, a, c_part) for a in a_parts)
        if tau == 0:
            raise ReductionFailed("C has no edges to some A-part")
        mixed = prune_low_extension_edges(full, tau)
        if mixed.system.edge_count() == 0:
            raise ReductionFailed("no k-clique has tau*|C| extensions")

    ok, fails = certify(mixed, tau, gam, k)
    notes.extend(fails)
    zeta = min(len(p) for p in sets) / n
    return ReductionResult(mixed, tau, zeta, gam, ok, strategy, tuple(parts), ci, notes)
