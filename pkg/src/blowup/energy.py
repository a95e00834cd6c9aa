"""R-energy of a k-partite system and extraction of strictly balanced subsystems.

The R-energy of parts ``A_1..A_k`` with edge count ``e`` and size product ``P``
is ``P * (e/P)**R = e * (e/P)**(R-1)``.  All comparisons happen on ``log2`` of
this quantity with a relative tolerance :data:`TOL`, because exact powering
with large real ``R`` is wasteful and ``R`` need not be rational.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Literal, NamedTuple, Sequence

import numpy as np

from .errors import EtaPreconditionFailed, PreconditionFailed, TooLargeForExhaustive
from .graphcore import KPartiteSystem, VertexSet, iter_bits

TOL = 1e-12
EXHAUSTIVE_LIMIT = 24
SWEEP_THETA = 0.5

Mode = Literal["exact", "heuristic"]


def log_energy_from_counts(e: int, size_product: int, R: float) -> float:
    """log2 of the energy; ``-inf`` for an edgeless system."""
    if e <= 0 or size_product <= 0:
        return -math.inf
    le = math.log2(e)
    return le + (R - 1.0) * (le - math.log2(size_product))


def log_energy(s: KPartiteSystem, R: float) -> float:
    return log_energy_from_counts(s.edge_count(), s.size_product, R)


def energy(s: KPartiteSystem, R: float) -> float:
    if R <= 0:
        raise ValueError("R must be positive")
    e = s.edge_count()
    size = s.size_product
    if e == 0 or size == 0:
        return 0.0
    return size * (e / size) ** R


def _close(a: float, b: float) -> bool:
    if a == b:
        return True
    if math.isinf(a) or math.isinf(b):
        return False
    return abs(a - b) <= TOL * max(1.0, abs(a), abs(b))


def log_greater(a: float, b: float) -> bool:
    """``a > b`` beyond the comparison tolerance."""
    return a > b and not _close(a, b)


@dataclass(frozen=True)
class BalancedSystem:
    system: KPartiteSystem
    R: float
    certified: Mode

    @property
    def parts(self) -> tuple[VertexSet, ...]:
        return self.system.parts

    def log_energy(self) -> float:
        return log_energy(self.system, self.R)

    def energy(self) -> float:
        return energy(self.system, self.R)


def _check_guard(s: KPartiteSystem) -> None:
    if sum(s.sizes) > EXHAUSTIVE_LIMIT:
        raise TooLargeForExhaustive(
            f"exhaustive search needs sum of part sizes <= {EXHAUSTIVE_LIMIT}, got {sum(s.sizes)}"
        )


class _Candidate(NamedTuple):
    e: int
    size_product: int
    size_sum: int
    key: tuple[tuple[int, ...], ...]
    log_e: float
    log_density: float


def _system_key(s: KPartiteSystem) -> tuple:
    masks = tuple(p.mask for p in s.parts)
    if s.k == 2:
        bm = s.parts[1].mask
        return masks, tuple(s.graph.adj[a] & bm for a in s.parts[0])
    return masks, s.tuples.tobytes()


def candidate_profile(s: KPartiteSystem) -> list[_Candidate]:
    """For every nonempty choice of subsets of the non-free parts and every size
    ``j`` of the free part, the lexicographically first max-edge completion.

    The free part is the largest one.  For a fixed choice elsewhere, the best
    ``j`` vertices of the free part are the ``j`` of largest degree (ties to
    smaller ids), which is also the lexicographically least optimal choice.
    The list therefore contains a maximiser of the energy for every ``R`` along
    with its tie-break keys.  Results are cached per system.
    """
    return list(_profile_cached(_system_key(s), s))


_profile_store: dict = {}


def _profile_cached(key, s: KPartiteSystem) -> tuple[_Candidate, ...]:
    hit = _profile_store.get(key)
    if hit is not None:
        return hit
    out = tuple(_build_profile(s))
    if len(_profile_store) > 4096:
        _profile_store.clear()
    _profile_store[key] = out
    return out


def _build_profile(s: KPartiteSystem) -> list[_Candidate]:
    k = s.k
    if any(len(p) == 0 for p in s.parts):
        return []
    free = max(range(k), key=lambda i: (len(s.parts[i]), -i))
    others = [i for i in range(k) if i != free]
    members = [p.sorted() for p in s.parts]
    free_ids = members[free]
    out: list[_Candidate] = []

    if k == 2:
        adj = s.graph.adj
        other = others[0]
        o_ids = members[other]
        rows = [adj[v] for v in free_ids]
        for sub in range(1, 1 << len(o_ids)):
            chosen = [o_ids[i] for i in iter_bits(sub)]
            cm = 0
            for v in chosen:
                cm |= 1 << v
            degs = [(r & cm).bit_count() for r in rows]
            _emit(out, k, free, others, [chosen], free_ids, degs)
        return out

    tuples = s.tuples
    loc = {}
    for i in others:
        pos = {v: j for j, v in enumerate(members[i])}
        loc[i] = np.array([pos[int(v)] for v in tuples[:, i]], dtype=np.int64)
    free_pos = {v: j for j, v in enumerate(free_ids)}
    free_loc = np.array([free_pos[int(v)] for v in tuples[:, free]], dtype=np.int64)

    def rec(idx: int, keep: np.ndarray, chosen: list[list[int]]):
        if idx == len(others):
            degs = np.bincount(free_loc[keep], minlength=len(free_ids)).tolist()
            _emit(out, k, free, others, chosen, free_ids, degs)
            return
        i = others[idx]
        size = len(members[i])
        for sub in range(1, 1 << size):
            bits = np.array([(sub >> j) & 1 for j in range(size)], dtype=bool)
            rec(idx + 1, keep & bits[loc[i]], chosen + [[members[i][j] for j in iter_bits(sub)]])

    rec(0, np.ones(len(tuples), dtype=bool), [])
    return out


def _emit(out, k, free, others, chosen, free_ids, degs):
    order = sorted(range(len(free_ids)), key=lambda j: (-degs[j], free_ids[j]))
    base_product = math.prod(len(c) for c in chosen)
    base_sum = sum(len(c) for c in chosen)
    fixed: list[tuple[int, ...]] = [()] * k
    for i, c in zip(others, chosen):
        fixed[i] = tuple(c)
    e = 0
    picked: list[int] = []
    for j, idx in enumerate(order, start=1):
        e += degs[idx]
        picked.append(free_ids[idx])
        parts = list(fixed)
        parts[free] = tuple(sorted(picked))
        size = base_product * j
        log_e = math.log2(e) if e > 0 else -math.inf
        log_d = log_e - math.log2(size) if e > 0 else -math.inf
        out.append(_Candidate(e, size, base_sum + j, tuple(parts), log_e, log_d))


def _best(cands: Sequence[_Candidate], R: float) -> tuple[_Candidate | None, float]:
    best = None
    best_le = -math.inf
    r1 = R - 1.0
    for c in cands:
        le = c.log_e + r1 * c.log_density if c.e > 0 else -math.inf
        if best is None:
            best, best_le = c, le
            continue
        if le == best_le:
            tied = True
        elif math.isinf(le) or math.isinf(best_le):
            if le > best_le:
                best, best_le = c, le
            continue
        else:
            tol = TOL * max(1.0, abs(le), abs(best_le))
            if le - best_le > tol:
                best, best_le = c, le
                continue
            tied = le - best_le >= -tol
        if tied and (c.size_sum, c.key) < (best.size_sum, best.key):
            best, best_le = c, le
    return best, best_le


def is_strictly_balanced(s: KPartiteSystem, R: float) -> bool:
    """Every subsystem with a proper inclusion has strictly smaller energy."""
    _check_guard(s)
    full_le = log_energy(s, R)
    if full_le == -math.inf:
        return False
    full_key = tuple(tuple(p.sorted()) for p in s.parts)
    for c in candidate_profile(s):
        if c.key == full_key:
            continue
        le = log_energy_from_counts(c.e, c.size_product, R)
        if not log_greater(full_le, le):
            return False
    return True


def extract_strictly_balanced(s: KPartiteSystem, R: float, mode: Mode = "exact") -> BalancedSystem:
    """A subsystem of maximum energy (exact) or a local maximum (heuristic)."""
    if R <= 0:
        raise ValueError("R must be positive")
    if s.edge_count() == 0:
        return BalancedSystem(s, R, mode)
    if mode == "exact":
        _check_guard(s)
        best, _ = _best(candidate_profile(s), R)
        subsets = [VertexSet.of(ids) for ids in best.key]
        return BalancedSystem(s.restrict(subsets), R, "exact")
    if mode == "heuristic":
        return BalancedSystem(_hill_climb(s, R), R, "heuristic")
    raise ValueError(f"unknown mode {mode!r}")


def _part_degrees(s: KPartiteSystem) -> list[dict[int, int]]:
    if s.k == 2:
        return [s.degrees(0), s.degrees(1)]
    return [s.degrees(i) for i in range(s.k)]


def _hill_climb(s: KPartiteSystem, R: float) -> KPartiteSystem:
    cur = s
    cur_le = log_energy(cur, R)
    while True:
        e = cur.edge_count()
        if e == 0:
            return cur
        size = cur.size_product
        degs = _part_degrees(cur)
        moved = False

        # degree-threshold sweep, one part at a time
        d = e / size
        for i, part in enumerate(cur.parts):
            others = size // len(part)
            cut = SWEEP_THETA * d * others
            drop = [v for v, dv in degs[i].items() if dv < cut]
            if drop and len(drop) < len(part):
                nxt = list(cur.parts)
                nxt[i] = part - VertexSet.of(drop)
                cand = cur.restrict(nxt)
                le = log_energy(cand, R)
                if log_greater(le, cur_le):
                    cur, cur_le, moved = cand, le, True
                    break
        if moved:
            continue

        # steepest single-vertex deletion
        best = None
        for i, part in enumerate(cur.parts):
            n_i = len(part)
            if n_i <= 1:
                continue
            new_size = size // n_i * (n_i - 1)
            for v in part:
                le = log_energy_from_counts(e - degs[i][v], new_size, R)
                if best is None or log_greater(le, best[0]):
                    best = (le, i, v)
        if best is None or not log_greater(best[0], cur_le):
            return cur
        _, i, v = best
        nxt = list(cur.parts)
        nxt[i] = nxt[i] - VertexSet.of([v])
        cur = cur.restrict(nxt)
        cur_le = log_energy(cur, R)


def balanced_edge_bound(
    b: BalancedSystem, subsets: Sequence[VertexSet], eta: float | None = None
) -> tuple[Fraction, float | None]:
    """Upper bounds on ``e(X_1..X_k)`` for subsets of a strictly balanced system.

    ``bound_a = p*prod|X_i| + (p/R)*prod|A_i|`` is exact.  With ``eta`` the
    sharper bound replaces ``1/R`` by ``eta*log2(1/eta)/R``; it needs
    ``R >= log2(1/eta)`` and the size ratio in ``[0, eta] u [(1-eta)^2, 1]``.
    """
    s = b.system
    for x, a in zip(subsets, s.parts):
        if not x.issubset(a):
            raise ValueError("subsets must lie inside the parts")
    pa = s.size_product
    px = math.prod(len(x) for x in subsets)
    p = Fraction(s.edge_count(), pa) if pa else Fraction(0)
    r = Fraction(b.R)
    bound_a = p * px + p / r * pa
    if eta is None:
        return bound_a, None
    if not 0 < eta <= 0.25:
        raise EtaPreconditionFailed("eta must lie in (0, 1/4]")
    if b.R < math.log2(1 / eta):
        raise EtaPreconditionFailed("R must be at least log2(1/eta)")
    ratio = px / pa if pa else 0.0
    if not (ratio <= eta or ratio >= (1 - eta) ** 2):
        raise EtaPreconditionFailed(f"size ratio {ratio} lies in the excluded middle range")
    bound_b = float(p) * px + eta * math.log2(1 / eta) * float(p) / b.R * pa
    return bound_a, bound_b


def _leq(lhs: float, rhs: float) -> bool:
    return lhs <= rhs * (1 + TOL) + TOL


def bernoulli_check(y: float, R: float) -> bool:
    """``y**(1/R) <= 1 + y/R`` for ``y >= 0`` and ``R >= 1``."""
    if y < 0 or R < 1:
        raise PreconditionFailed("need y >= 0 and R >= 1")
    return _leq(y ** (1.0 / R), 1.0 + y / R)


def stronger_bernoulli_check(y: float, R: float, eta: float) -> bool:
    """``y**(1/R) <= 1 + eta*log2(1/eta)*y/R`` on the two admissible y-ranges."""
    if not 0 < eta <= 0.25:
        raise PreconditionFailed("eta must lie in (0, 1/4]")
    if R < math.log2(1 / eta):
        raise PreconditionFailed("R must be at least log2(1/eta)")
    low = 1 <= y <= (1 - eta) ** -2
    high = y >= 1 / eta
    if not (low or high):
        raise PreconditionFailed("y outside [1, (1-eta)^-2] u [1/eta, inf)")
    return _leq(y ** (1.0 / R), 1.0 + eta * math.log2(1 / eta) * y / R)
