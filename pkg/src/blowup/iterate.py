"""Energy-guided iteration and the blowup pipelines built on it.

One step picks a vertex ``c*`` of ``C`` with the most extensions, restricts
every part to its neighbourhood and passes to a maximum-energy subsystem.
Repeating this gives parts that are complete to a growing set of removed
``c*`` vertices.  The triangle pipeline adds a switching variant which either
keeps the density loss tiny or exposes a dense tripartite piece where roles can
be exchanged.  Clique and general-pattern pipelines reduce to the triangle one.

The size thresholds behind the quantitative guarantees are astronomically large,
so every plan carries a ``threshold_ok`` flag.  When it is false, conditions
derived from the thresholds are checked and recorded in the trace as advisory
instead of being asserted.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Literal, Sequence

import numpy as np

from . import energy as en
from .errors import (
    BadParams,
    Degenerate,
    InvariantViolation,
    NoExtensions,
    NotEnoughCliques,
    PreconditionFailed,
    ReductionFailed,
    RetriesExhausted,
    TooLargeForExhaustive,
)
from .graphcore import (
    BlowupCertificate,
    Graph,
    KPartiteSystem,
    MixedGraph,
    VertexSet,
    as_fraction,
    bipartite_density,
    c_extension_counts,
    count_cliques,
    count_spanning_cliques,
    iter_bits,
    labeled_copies,
    min_extension_density,
    restrict_to_extension,
    triangle_density,
    verify_blowup,
    verify_complete_multipartite,
)
from .kst import extract_biclique
from .reduce import prune_low_extension_edges, regularize_cliques

log = logging.getLogger(__name__)

Mode = Literal["exact", "heuristic", "auto"]
AUTO_EXACT_LIMIT = 16
LOG_TOL = 1e-9
HALF = Fraction(1, 2)
# the balanced-subsystem edge bound needs R >= 1; tiny plans would give R near 0
MIN_R = 1.0


def _log2(x) -> float:
    x = as_fraction(x)
    return math.log2(x.numerator) - math.log2(x.denominator)


def _floor_snap(x: float) -> int:
    r = round(x)
    if abs(x - r) <= 1e-9 * max(1.0, abs(x)):
        return int(r)
    return math.floor(x)


def _icbrt(n: int) -> int:
    if n < 0:
        raise ValueError("n must be non-negative")
    if n < 2:
        return n
    x = 1 << ((n.bit_length() + 2) // 3)
    while True:
        y = (2 * x + n // (x * x)) // 3
        if y >= x:
            break
        x = y
    while x**3 > n:
        x -= 1
    while (x + 1) ** 3 <= n:
        x += 1
    return x


def _unit(name: str, x) -> Fraction:
    q = as_fraction(x)
    if not 0 < q <= HALF:
        raise BadParams(f"{name} must lie in (0, 1/2], got {x}")
    return q


@dataclass(frozen=True)
class IterationPlan:
    kind: str
    k: int
    tau0: Fraction
    p: Fraction
    n: int
    s: int
    R: float
    threshold_ok: bool
    m: int | None = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "k": self.k,
            "tau0": str(self.tau0),
            "p": str(self.p),
            "n": self.n,
            "s": self.s,
            "R": self.R,
            "threshold_ok": self.threshold_ok,
            "m": self.m,
        }


def plan_basic(k: int, tau0, p, n: int) -> IterationPlan:
    """Step count ``floor(tau0 log n / (2^(k+5) log 1/p))`` and exponent ``log n / (4 log 1/p)``."""
    t0, q = _unit("tau0", tau0), _unit("p", p)
    if n < 1:
        raise BadParams("n must be positive")
    ln, lp = math.log2(n), -_log2(q)
    s = _floor_snap(float(t0) * ln / (2 ** (k + 5) * lp))
    R = ln / (4 * lp)
    ok = ln >= (10**k / float(t0)) * lp
    return IterationPlan("basic", k, t0, q, n, max(s, 0), R, ok)


def plan_switch(tau0, p0, n: int) -> IterationPlan:
    """Switching plan: ``s = floor(sqrt(p0 tau0) log n / (320 log 1/p0 log 1/tau0))``, ``m = floor(n^(1/3))``."""
    t0, q = _unit("tau0", tau0), _unit("p0", p0)
    if n < 1:
        raise BadParams("n must be positive")
    ln, lp, lt = math.log2(n), -_log2(q), -_log2(t0)
    s = _floor_snap(math.sqrt(float(q * t0)) * ln / (320 * lp * lt))
    R = ln / (4 * lp)
    ok = ln >= (400 / float(t0)) * lp
    return IterationPlan("switch", 2, t0, q, n, max(s, 0), R, ok, m=_icbrt(n))


def good_for_switcher_orders(kappa, nu, m: int) -> tuple[int, int, bool]:
    """``(s, t, threshold_ok)`` for the complete tripartite ``K_{s,t,t}`` inside a dense switcher."""
    kap, v = _unit("kappa", kappa), _unit("nu", nu)
    lm, lk = math.log2(m), -_log2(kap)
    s = _floor_snap(float(v) * lm / (512 * lk))
    t = _floor_snap(lm / (12 * lk))
    ok = lm >= (400 / float(v)) * lk
    return max(s, 0), max(t, 0), ok


@dataclass
class StepRecord:
    step: int
    c_star: int | None
    sizes: tuple[int, ...]
    c_remaining: int
    density: Fraction
    log_energy: float
    certified: str
    checks: dict[str, bool] = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["density"] = str(self.density)
        d["sizes"] = list(self.sizes)
        return d


@dataclass
class RunTrace:
    kind: str
    plan: IterationPlan | None = None
    R: float | None = None
    steps: list[StepRecord] = field(default_factory=list)
    status: str = "running"
    failure_step: int | None = None
    advisory: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    children: list["RunTrace"] = field(default_factory=list)

    def advise(self, msg: str) -> None:
        if msg not in self.advisory:
            self.advisory.append(msg)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "plan": self.plan.to_dict() if self.plan else None,
            "R": self.R,
            "status": self.status,
            "failure_step": self.failure_step,
            "steps": [s.to_dict() for s in self.steps],
            "advisory": list(self.advisory),
            "notes": list(self.notes),
            "children": [c.to_dict() for c in self.children],
        }


def _resolve_mode(mode: Mode, s: KPartiteSystem) -> str:
    if mode == "auto":
        return "exact" if sum(s.sizes) <= AUTO_EXACT_LIMIT else "heuristic"
    return mode


def _balanced(s: KPartiteSystem, R: float, mode: Mode) -> en.BalancedSystem:
    return en.extract_strictly_balanced(s, R, _resolve_mode(mode, s))


def _balanced_flag(b: en.BalancedSystem) -> bool | None:
    """Exact strict-balancedness when checkable, else ``None``."""
    if b.certified != "exact":
        return None
    try:
        return en.is_strictly_balanced(b.system, b.R)
    except TooLargeForExhaustive:
        return None


def _density(s: KPartiteSystem) -> Fraction:
    if any(len(p) == 0 for p in s.parts):
        return Fraction(0)
    return Fraction(s.edge_count(), s.size_product)


def _log_ok(actual: float, bound: float) -> bool:
    if actual == -math.inf:
        return bound == -math.inf
    return actual >= bound - LOG_TOL * max(1.0, abs(bound))


@dataclass
class OneStepResult:
    c_star: int
    balanced: en.BalancedSystem
    checks: dict[str, bool]


def check_one_step(m: MixedGraph, res: OneStepResult, tau, R: float) -> dict[str, bool]:
    """Conclusions (i)-(iii): completeness to c*, the energy factor and balancedness."""
    nb = m.neighborhood(res.c_star)
    complete = all(p.mask & ~nb == 0 for p in res.balanced.parts)
    nonempty = all(len(p) > 0 for p in res.balanced.parts)
    k = m.k
    bound = en.log_energy(m.system, R) - 2 ** (k + 2) / float(as_fraction(tau))
    ok_energy = _log_ok(res.balanced.log_energy(), bound)
    bal = _balanced_flag(res.balanced)
    return {"complete": complete, "nonempty": nonempty, "energy": ok_energy, "balanced": bal is not False}


def pick_c_star(m: MixedGraph) -> tuple[int, int]:
    counts = c_extension_counts(m)
    if not counts:
        raise NoExtensions("C is empty")
    c, best = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    if best == 0:
        raise NoExtensions("no vertex of C extends any edge")
    return c, best


def one_step(m: MixedGraph, tau, R: float, mode: Mode = "exact", strict: bool = True, trace: RunTrace | None = None) -> OneStepResult:
    """Choose c* and a balanced subsystem of its neighbourhoods.

    With ``strict`` the hypotheses raise :class:`PreconditionFailed`; without,
    they are recorded in ``trace`` as advisory.
    """
    t = as_fraction(tau)
    k = m.k
    if not 0 < t <= 1:
        raise PreconditionFailed("tau must lie in (0, 1]")

    def need(cond: bool, msg: str):
        if cond:
            return
        if strict:
            raise PreconditionFailed(msg)
        if trace is not None:
            trace.advise(msg)

    need(R >= 2 ** (k + 1) / float(t), f"R={R} < 2^(k+1)/tau")
    need(min_extension_density(m) >= t, "tau_C below tau")
    if _resolve_mode(mode, m.system) == "exact" and sum(m.system.sizes) <= en.EXHAUSTIVE_LIMIT:
        need(en.is_strictly_balanced(m.system, R), "system is not strictly R-balanced")
    elif trace is not None:
        trace.advise("strict balancedness not certified (heuristic)")

    c, _ = pick_c_star(m)
    plus = restrict_to_extension(m, c)
    b = _balanced(plus, R, mode)
    res = OneStepResult(c, b, {})
    res.checks = check_one_step(m, res, t, R)
    if strict and b.certified == "exact" and not all(res.checks.values()):
        raise InvariantViolation(f"one-step conclusions failed: {res.checks}")
    return res


@dataclass
class IterationResult:
    parts: tuple[VertexSet, ...]
    c_dagger: tuple[int, ...]
    trace: RunTrace
    history: list[tuple[tuple[VertexSet, ...], tuple[int, ...]]]

    @property
    def status(self) -> str:
        return self.trace.status


def _record(trace, step, c, s: KPartiteSystem, c_left, R, cert, checks=None):
    trace.steps.append(
        StepRecord(step, c, s.sizes, c_left, _density(s), en.log_energy(s, R), cert, dict(checks or {}))
    )


def _verify_daggers(host_adj, parts: Sequence[VertexSet], c_dagger: Sequence[int]) -> bool:
    for c in c_dagger:
        nb = host_adj(c)
        if any(p.mask & ~nb for p in parts):
            return False
    return True


def basic_iteration(
    m: MixedGraph,
    tau0,
    p,
    mode: Mode = "auto",
    steps: int | None = None,
    stop: Callable[[int, tuple[VertexSet, ...]], bool] | None = None,
    R: float | None = None,
) -> IterationResult:
    """Iterate single extension steps; returns daggers with C-dagger complete to every part.

    ``steps`` overrides the planned step count (the plan is still recorded);
    ``stop(l, parts)`` may end the run early.  If a per-step check fails
    below the size threshold, the run stops with status ``partial`` and the
    state reached before the failing step.
    """
    t0, q = _unit("tau0", tau0), _unit("p", p)
    s0 = m.system
    k = m.k
    n = min(list(s0.sizes) + [len(m.c_part)])
    if n < 1:
        raise PreconditionFailed("all parts must be non-empty")
    plan = plan_basic(k, t0, q, n)
    if min_extension_density(m) < t0:
        raise PreconditionFailed("tau_C below tau0")
    if _density(s0) < q:
        raise PreconditionFailed("density below p")
    total = plan.s if steps is None else steps
    if total <= 0:
        raise Degenerate("planned step count is zero", partial=plan)
    R = max(plan.R, MIN_R) if R is None else R
    trace = RunTrace("basic", plan, R)
    if R < 2 ** (k + 2) / float(t0):
        trace.advise("R below the one-step minimum 2^(k+2)/tau0")
    if not plan.threshold_ok:
        trace.advise("size threshold not met; derived conditions are advisory")

    base = math.log2(s0.size_product) + R * _log2(q)
    cur = _balanced(s0, R, mode)
    _record(trace, 0, None, cur.system, len(m.c_part), R, cur.certified)
    if not _log_ok(cur.log_energy(), base):
        raise InvariantViolation("initial balanced subsystem lost energy")
    c_left = m.c_part
    chosen: list[int] = []
    history = [(cur.parts, ())]
    status = "complete"
    for ell in range(total):
        if stop is not None and stop(ell, cur.parts):
            status = "stopped"
            break
        g_l = m.restrict(cur.parts, c_left)
        if not c_left or cur.system.edge_count() == 0:
            trace.notes.append(f"step {ell + 1}: nothing left to extend")
            status, trace.failure_step = "partial", ell + 1
            break
        tc = min_extension_density(g_l)
        if tc < t0 / 2:
            msg = f"step {ell + 1}: tau_C={float(tc):.4g} below tau0/2"
            if plan.threshold_ok:
                raise InvariantViolation(msg)
            trace.advise("tau_C dropped below tau0/2")
        try:
            res = one_step(g_l, t0 / 2, R, mode=mode, strict=False, trace=trace)
        except NoExtensions:
            trace.notes.append(f"step {ell + 1}: no extensions")
            status, trace.failure_step = "partial", ell + 1
            break
        bound = base - 2 ** (k + 3) * (ell + 1) / float(t0)
        checks = dict(res.checks)
        checks["iteration_energy"] = _log_ok(res.balanced.log_energy(), bound)
        _record(trace, ell + 1, res.c_star, res.balanced.system, len(c_left) - 1, R, res.balanced.certified, checks)
        hard = ["complete", "nonempty"]
        if not all(checks[h] for h in hard):
            raise InvariantViolation(f"step {ell + 1}: completeness failed")
        if not all(checks.values()):
            proven = plan.threshold_ok and res.balanced.certified == "exact" and tc >= t0 / 2
            if proven:
                raise InvariantViolation(f"step {ell + 1}: checks failed {checks}")
            trace.advise(f"step {ell + 1}: postcondition failed {sorted(k_ for k_, v in checks.items() if not v)}")
            status, trace.failure_step = "partial", ell + 1
            break
        chosen.append(res.c_star)
        c_left = c_left - VertexSet.of([res.c_star])
        cur = res.balanced
        history.append((cur.parts, tuple(chosen)))
    trace.status = status

    if not _verify_daggers(m.neighborhood, cur.parts, chosen):
        raise InvariantViolation("C-dagger is not complete to the A-daggers")
    if status == "complete" and steps is None:
        checks = {
            "size": all(len(p) ** 2 >= n for p in cur.parts),
            "density": _density(cur.system) >= q / 2,
        }
        if not all(checks.values()):
            if plan.threshold_ok:
                raise InvariantViolation(f"dagger guarantees failed: {checks}")
            trace.advise(f"dagger guarantees failed below threshold: {checks}")
    return IterationResult(cur.parts, tuple(chosen), trace, history)


@dataclass(frozen=True)
class SwitcherReport:
    x: VertexSet
    y: VertexSet
    z: VertexSet
    m: int
    mu_sq: Fraction
    kappa3: Fraction
    dxy: Fraction

    @property
    def mu(self) -> float:
        return math.sqrt(self.mu_sq)

    def to_dict(self) -> dict:
        return {
            "x": self.x.sorted(),
            "y": self.y.sorted(),
            "z": self.z.sorted(),
            "m": self.m,
            "mu": self.mu,
            "kappa3": str(self.kappa3),
            "dxy": str(self.dxy),
        }


def _mu_sq(mu, mu_sq) -> Fraction:
    if mu_sq is not None:
        return as_fraction(mu_sq)
    if mu is None:
        raise ValueError("give mu or mu_sq")
    return as_fraction(mu) ** 2


def is_switcher(g: Graph, x: VertexSet, y: VertexSet, z: VertexSet, m: int, mu=None, *, mu_sq=None) -> bool:
    """min part >= m, triangle density >= mu^2 and triangle density >= mu * d(X, Y).

    The last condition is compared squared, so irrational ``mu`` can be passed
    exactly through ``mu_sq``.
    """
    m2 = _mu_sq(mu, mu_sq)
    k3 = triangle_density(g, x, y, z)
    d = bipartite_density(g, x, y)
    if min(len(x), len(y), len(z)) < m:
        return False
    if d == 0:
        return False
    return k3 >= m2 and k3 * k3 >= m2 * d * d


def switcher_report(g: Graph, x, y, z, m: int, mu_sq: Fraction) -> SwitcherReport:
    return SwitcherReport(x, y, z, m, mu_sq, triangle_density(g, x, y, z), bipartite_density(g, x, y))


@dataclass
class SwitcherFound:
    report: SwitcherReport
    trace: RunTrace | None = None


@dataclass
class SwitchStep:
    c_star: int
    balanced: en.BalancedSystem
    checks: dict[str, bool]
    c0: VertexSet
    c_a: VertexSet
    c_b: VertexSet


def _tri_mixed(g: Graph, a: VertexSet, b: VertexSet, c: VertexSet) -> MixedGraph:
    return MixedGraph.from_graph(g, (a, b), c)


def one_step_switching(
    g: Graph,
    a: VertexSet,
    b: VertexSet,
    c: VertexSet,
    tau,
    R: float,
    m: int,
    mode: Mode = "exact",
    strict: bool = True,
    trace: RunTrace | None = None,
) -> SwitchStep | SwitcherFound:
    """One switching step: a (c*, A*, B*) with a small energy loss, or a verified switcher."""
    t = as_fraction(tau)
    if not 0 < t <= HALF:
        raise PreconditionFailed("tau must lie in (0, 1/2]")
    if m < 1:
        raise PreconditionFailed("m must be a positive integer")
    mg = _tri_mixed(g, a, b, c)

    def need(cond: bool, msg: str):
        if cond:
            return
        if strict:
            raise PreconditionFailed(msg)
        if trace is not None:
            trace.advise(msg)

    need(R >= 50 / float(t), f"R={R} < 50/tau")
    need(m <= t / 4 * min(len(a), len(b), len(c)), "m exceeds tau/4 * min part")
    need(min_extension_density(mg) >= t, "tau_C below tau")
    system = mg.system
    if _resolve_mode(mode, system) == "exact" and sum(system.sizes) <= en.EXHAUSTIVE_LIMIT:
        need(en.is_strictly_balanced(system, R), "(A, B) is not strictly R-balanced")
    elif trace is not None:
        trace.advise("strict balancedness not certified (heuristic)")

    size_a, size_b, size_c = len(a), len(b), len(c)
    e_ab = system.edge_count()
    if e_ab == 0:
        raise NoExtensions("(A, B) has no edges")
    p = Fraction(e_ab, size_a * size_b)
    tri = c_extension_counts(mg)
    kappa = Fraction(sum(tri.values()), size_a * size_b * size_c)
    mu2 = p * t / 16
    c0 = VertexSet.of(v for v, cnt in tri.items() if cnt <= kappa * size_a * size_b / 4)
    nb_a = {v: g.adj[v] & a.mask for v in c}
    nb_b = {v: g.adj[v] & b.mask for v in c}
    c_a = VertexSet.of(v for v in c if v not in c0 and nb_a[v].bit_count() ** 2 <= mu2 * size_a**2)
    c_b = VertexSet.of(v for v in c if v not in c0 and nb_b[v].bit_count() ** 2 <= mu2 * size_b**2)

    for roles in ((a, c_a, b), (b, c_b, a)):
        x, y, z = roles
        if len(y) >= m and y:
            if is_switcher(g, x, y, z, m, mu_sq=mu2):
                return SwitcherFound(switcher_report(g, x, y, z, m, mu2), trace)
            if trace is not None:
                trace.advise("sparse-vertex set failed the switcher recheck")
    if p <= 16 * t:
        if is_switcher(g, a, b, c, m, mu_sq=mu2):
            return SwitcherFound(switcher_report(g, a, b, c, m, mu2), trace)
        if trace is not None:
            trace.advise("p <= 16 tau but G failed the switcher recheck")

    pool = [v for v in c if v not in c0 and v not in c_a and v not in c_b and tri[v] > 0]
    if not pool:
        if strict:
            raise InvariantViolation("no admissible c* although the hypotheses hold")
        pool = [v for v in c if tri[v] > 0]
        if trace is not None:
            trace.advise("no admissible c*; falling back to any extending vertex")
    if not pool:
        raise NoExtensions("no vertex of C closes a triangle")
    c_star = min(pool, key=lambda v: (-tri[v], v))
    plus = restrict_to_extension(mg, c_star)
    bal = _balanced(plus, R, mode)
    nb = nb_a[c_star] | nb_b[c_star]
    factor = 20 / math.sqrt(float(p * t)) * _log2(t)
    checks = {
        "complete": all(q.mask & ~nb == 0 for q in bal.parts),
        "nonempty": all(len(q) > 0 for q in bal.parts),
        "energy": _log_ok(bal.log_energy(), en.log_energy(system, R) + factor),
        "balanced": _balanced_flag(bal) is not False,
    }
    if strict and bal.certified == "exact" and not all(checks.values()):
        raise InvariantViolation(f"switching step conclusions failed: {checks}")
    return SwitchStep(c_star, bal, checks, c0, c_a, c_b)


@dataclass
class SwitchIterationResult:
    parts: tuple[VertexSet, VertexSet] | None
    c_dagger: tuple[int, ...]
    trace: RunTrace
    history: list
    switcher: SwitcherReport | None = None

    @property
    def found_switcher(self) -> bool:
        return self.switcher is not None


def switch_iteration(
    g: Graph,
    a: VertexSet,
    b: VertexSet,
    c: VertexSet,
    tau0,
    p0,
    mode: Mode = "auto",
    steps: int | None = None,
    stop: Callable[[int, tuple[VertexSet, ...]], bool] | None = None,
    R: float | None = None,
) -> SwitchIterationResult:
    """Iterate switching steps: daggers complete to C-dagger, or a verified switcher."""
    t0, q = _unit("tau0", tau0), _unit("p0", p0)
    n = min(len(a), len(b), len(c))
    if n < 1:
        raise PreconditionFailed("all parts must be non-empty")
    plan = plan_switch(t0, q, n)
    mg = _tri_mixed(g, a, b, c)
    if min_extension_density(mg) < t0:
        raise PreconditionFailed("tau_C below tau0")
    if _density(mg.system) < q:
        raise PreconditionFailed("d(A, B) below p0")
    total = plan.s if steps is None else steps
    if total <= 0:
        raise Degenerate("planned step count is zero", partial=plan)
    R = max(plan.R, MIN_R) if R is None else R
    m = max(plan.m, 1)
    trace = RunTrace("switch", plan, R)
    if R < 100 / float(t0):
        trace.advise("R below the switching minimum 100/tau0")
    if not plan.threshold_ok:
        trace.advise("size threshold not met; derived conditions are advisory")
    kappa0 = q * t0 / 4
    base = math.log2(len(a) * len(b)) + R * _log2(q)
    cur = _balanced(mg.system, R, mode)
    _record(trace, 0, None, cur.system, len(c), R, cur.certified)
    c_left = c
    chosen: list[int] = []
    history = [(cur.parts, ())]
    status = "complete"
    for ell in range(total):
        if stop is not None and stop(ell, cur.parts):
            status = "stopped"
            break
        ca, cb = cur.parts
        if not c_left or cur.system.edge_count() == 0:
            status, trace.failure_step = "partial", ell + 1
            trace.notes.append(f"step {ell + 1}: nothing left to extend")
            break
        sub = _tri_mixed(g, ca, cb, c_left)
        tc = min_extension_density(sub)
        if tc < t0 / 2:
            if plan.threshold_ok:
                raise InvariantViolation(f"step {ell + 1}: tau_C below tau0/2")
            trace.advise("tau_C dropped below tau0/2")
        tau_step = max(min(t0 / 2, tc), Fraction(1, 10**9)) if not plan.threshold_ok else t0 / 2
        try:
            out = one_step_switching(g, ca, cb, c_left, tau_step, R, m, mode=mode, strict=False, trace=trace)
        except NoExtensions:
            status, trace.failure_step = "partial", ell + 1
            trace.notes.append(f"step {ell + 1}: no extensions")
            break
        if isinstance(out, SwitcherFound):
            rep = out.report
            if not is_switcher(g, rep.x, rep.y, rep.z, rep.m, mu_sq=rep.mu_sq):
                raise InvariantViolation("reported switcher fails the recheck")
            trace.status = "switcher"
            trace.notes.append(f"switcher found at step {ell + 1}")
            return SwitchIterationResult(None, tuple(chosen), trace, history, switcher=rep)
        bound = base + 40 * (ell + 1) / math.sqrt(float(kappa0)) * _log2(t0)
        checks = dict(out.checks)
        checks["iteration_energy"] = _log_ok(out.balanced.log_energy(), bound)
        _record(trace, ell + 1, out.c_star, out.balanced.system, len(c_left) - 1, R, out.balanced.certified, checks)
        if not (checks["complete"] and checks["nonempty"]):
            raise InvariantViolation(f"step {ell + 1}: completeness failed")
        if not all(checks.values()):
            if plan.threshold_ok and out.balanced.certified == "exact":
                raise InvariantViolation(f"step {ell + 1}: checks failed {checks}")
            trace.advise(f"step {ell + 1}: postcondition failed {sorted(k_ for k_, v in checks.items() if not v)}")
            status, trace.failure_step = "partial", ell + 1
            break
        chosen.append(out.c_star)
        c_left = c_left - VertexSet.of([out.c_star])
        cur = out.balanced
        history.append((cur.parts, tuple(chosen)))
    trace.status = status
    if not _verify_daggers(lambda v: g.adj[v], cur.parts, chosen):
        raise InvariantViolation("C-dagger is not complete to the daggers")
    if status == "complete" and steps is None:
        checks = {
            "size": all(len(p) ** 2 >= n for p in cur.parts),
            "density": _density(cur.system) >= q / 2,
        }
        if not all(checks.values()):
            if plan.threshold_ok:
                raise InvariantViolation(f"dagger guarantees failed: {checks}")
            trace.advise(f"dagger guarantees failed below threshold: {checks}")
    return SwitchIterationResult(cur.parts, tuple(chosen), trace, history)


K3 = Graph.complete(3)


@dataclass
class TripartiteBlowup:
    """A complete tripartite ``K_{s,t,t}`` (classes ``c``, ``x``, ``y``) and its balanced truncation."""

    s_class: VertexSet
    x_class: VertexSet
    y_class: VertexSet
    certificate: BlowupCertificate
    trace: RunTrace
    threshold_ok: bool = False

    @property
    def s(self) -> int:
        return len(self.s_class)

    @property
    def t(self) -> int:
        return min(len(self.x_class), len(self.y_class))


def _best_prefix(g: Graph, history, density_floor: Fraction | None, trace: RunTrace):
    """Scan iteration prefixes for the largest ``min(l, t)`` with a KST biclique in the l-th daggers."""
    best = None
    for parts, cd in reversed(history):
        ell = len(cd)
        if best is not None and ell <= best[0]:
            break
        x, y = parts
        if not x or not y:
            continue
        d = bipartite_density(g, x, y)
        if d == 0:
            continue
        p = min(HALF, d)
        if density_floor is not None:
            p = min(p, max(density_floor, Fraction(1, 10**12)))
        cert = extract_biclique(g, x, y, p)
        if cert.t == 0:
            continue
        order = min(ell, cert.t) if ell else 0
        if best is None or order > best[0]:
            best = (order, cd, cert)
    if best is None:
        return None
    trace.notes.append(f"best prefix: order {best[0]} with |C|={len(best[1])}, t={best[2].t}")
    return best


def _assemble_k3(g: Graph, cd: Sequence[int], cert: BlowupCertificate, trace: RunTrace, threshold_ok=False) -> TripartiteBlowup:
    s_class = VertexSet.of(cd)
    x_class, y_class = cert.classes
    if not verify_complete_multipartite(g, (s_class, x_class, y_class)):
        raise InvariantViolation("assembled K_{s,t,t} does not verify")
    o = min(len(s_class), len(x_class))
    tri = BlowupCertificate(K3, (x_class.first(o), y_class.first(o), s_class.first(o)), o)
    if o and not verify_blowup(g, tri):
        raise InvariantViolation("truncated certificate does not verify")
    trace.notes.append(f"K_(s,t,t) with s={len(s_class)}, t={len(x_class)}")
    return TripartiteBlowup(s_class, x_class, y_class, tri, trace, threshold_ok)


def _desk_steps(plan: IterationPlan, c_size: int) -> int:
    return plan.s if plan.threshold_ok else c_size


def _stop_when_small(ell: int, parts) -> bool:
    return ell >= min(len(p) for p in parts)


def switcher_solve(
    g: Graph,
    a: VertexSet,
    b: VertexSet,
    c: VertexSet,
    kappa,
    nu,
    mode: Mode = "auto",
) -> TripartiteBlowup:
    """``K_{s,t,t}`` inside a tripartite graph with triangle density >= kappa and ratio >= nu."""
    kap, v = _unit("kappa", kappa), _unit("nu", nu)
    if min(len(a), len(b), len(c)) < 1:
        raise PreconditionFailed("parts must be non-empty")
    k3 = triangle_density(g, a, b, c)
    d = bipartite_density(g, a, b)
    if k3 < kap:
        raise PreconditionFailed(f"triangle density {k3} below kappa={kap}")
    if k3 < v * d:
        raise PreconditionFailed("triangle density / d(A, B) below nu")
    m = min(len(a), len(b), len(c))
    s_f, t_f, ok = good_for_switcher_orders(kap, v, m)
    trace = RunTrace("switcher_solve")
    trace.notes.append(f"formula orders s={s_f}, t={t_f}, threshold_ok={ok}")
    if not ok:
        trace.advise("switcher size threshold not met; formula orders are advisory")

    mg = prune_low_extension_edges(_tri_mixed(g, a, b, c), v / 2, inclusive=True)
    if mg.system.edge_count() == 0:
        raise InvariantViolation("edge filtering removed every edge")
    tc = min_extension_density(mg)
    dp = _density(mg.system)
    if not (tc >= v / 2 and dp >= kap / 2):
        raise InvariantViolation(f"filtered graph has tau_C={tc}, d={dp}")
    pruned = _graph_of_mixed(g, mg)
    tau0 = v / 2
    p = min(kap * kap, dp)
    plan = plan_basic(2, tau0, p, m)
    it = basic_iteration(mg, tau0, p, mode=mode, steps=_desk_steps(plan, len(c)), stop=None if ok else _stop_when_small)
    trace.children.append(it.trace)
    best = _best_prefix(pruned, it.history, None, trace)
    if best is None:
        trace.status = "degenerate"
        return TripartiteBlowup(VertexSet(), VertexSet(), VertexSet(), BlowupCertificate.empty(K3), trace, ok)
    _, cd, cert = best
    out = _assemble_k3(pruned, cd, cert, trace, ok)
    if ok and (out.s < s_f or out.t < t_f):
        raise InvariantViolation("switcher blowup below the guaranteed orders")
    trace.status = "complete"
    return out


def _graph_of_mixed(g: Graph, mg: MixedGraph) -> Graph:
    """Graph with the (possibly pruned) A-B edges and all C-to-A cross edges; k = 2 only."""
    s = mg.system
    a, b = s.parts
    adj = [0] * g.n
    sg = s.graph
    for v in a:
        adj[v] |= sg.adj[v] & b.mask
    for v in b:
        adj[v] |= sg.adj[v] & a.mask
    for c, nb in mg.cross.items():
        adj[c] |= nb
        for u in iter_bits(nb):
            adj[u] |= 1 << c
    return Graph._trusted(g.n, adj)


@dataclass
class PipelineResult:
    certificate: BlowupCertificate
    trace: RunTrace
    reduction: dict | None = None
    gamma_used: Fraction | None = None
    branch: str | None = None
    s: int | None = None
    kst_t: int | None = None

    @property
    def order(self) -> int:
        return self.certificate.t


def _sqrt_floor_fraction(x: Fraction) -> Fraction:
    """A rational lower bound for sqrt(x), within 1e-12 relative."""
    r = Fraction(math.sqrt(x)).limit_denominator(10**12)
    while r * r > x:
        r -= Fraction(1, 10**12)
    return r


def find_triangle_blowup(
    g: Graph,
    gamma,
    strategy: str = "pruning",
    mode: Mode = "auto",
    seed=0,
    parts: Sequence[VertexSet] | None = None,
) -> PipelineResult:
    """A verified ``K_3[s]`` in a graph with at least ``gamma*N^3`` triangles."""
    gam = as_fraction(gamma)
    if gam <= 0:
        raise NotEnoughCliques("gamma must be positive")
    trace = RunTrace("triangle")
    n = g.n
    if parts is None:
        have = count_cliques(g, 3)
        if have == 0 or have < gam * n**3:
            raise NotEnoughCliques(f"{have} triangles < gamma*N^3")
    red = regularize_cliques(g, 2, gam, strategy=strategy, seed=seed, parts=parts)
    if not red.certified:
        trace.advise("reduction not certified: " + "; ".join(red.notes))
    mg = red.mixed
    a, b = mg.system.parts
    c = mg.c_part
    gt = _graph_of_mixed(g, mg)
    tc = min_extension_density(mg)
    d = _density(mg.system)
    tau0 = min(red.tau, tc, HALF)
    if tau0 <= 0 or d == 0:
        raise Degenerate("reduction left no extendable edge")
    p0 = min(HALF, gam / (4 * tau0), d)
    plan = plan_switch(tau0, p0, min(len(a), len(b), len(c)))
    sw = switch_iteration(
        gt, a, b, c, tau0, p0, mode=mode, steps=_desk_steps(plan, len(c)),
        stop=None if plan.threshold_ok else _stop_when_small,
    )
    trace.children.append(sw.trace)
    if sw.found_switcher:
        rep = sw.switcher
        kappa = min(gam / 256, rep.kappa3, HALF)
        nu = min(_sqrt_floor_fraction(gam) / 16, rep.kappa3 / rep.dxy, HALF)
        sol = switcher_solve(gt, rep.x, rep.y, rep.z, kappa, nu, mode=mode)
        trace.children.append(sol.trace)
        branch = "switcher"
        blow = sol
        cert = sol.certificate
    else:
        branch = "daggers"
        best = _best_prefix(gt, sw.history, min(HALF, d / 2), trace)
        if best is None:
            raise Degenerate("no biclique in the daggers", partial=trace)
        _, cd, kcert = best
        blow = _assemble_k3(gt, cd, kcert, trace, plan.threshold_ok)
        cert = blow.certificate
    if cert.t == 0:
        raise Degenerate("blowup order is zero at this scale", partial=trace)
    cert = _canonical_k3(cert, parts)
    if not verify_blowup(g, cert):
        raise InvariantViolation("pipeline certificate does not verify against the input")
    trace.status = "complete"
    return PipelineResult(cert, trace, red.summary(), gam, branch, blow.s, blow.t)


def _canonical_k3(cert: BlowupCertificate, parts) -> BlowupCertificate:
    """With explicit parts, order classes by the part containing them."""
    if parts is None:
        return cert
    order = []
    for cl in cert.classes:
        idx = next(i for i, p in enumerate(parts) if cl.issubset(p))
        order.append(idx)
    classes = [None] * len(parts)
    for cl, idx in zip(cert.classes, order):
        classes[idx] = cl
    return BlowupCertificate(cert.pattern, tuple(classes), cert.t)


def _downsample(rng, s: KPartiteSystem, size: int, tries: int = 100):
    """Random equal-size subsets keeping at least half the density; the best sample otherwise."""
    target = _density(s) / 2
    best = None
    for _ in range(tries):
        subs = []
        for p in s.parts:
            ids = p.sorted()
            if len(ids) == size:
                subs.append(p)
            else:
                pick = rng.choice(len(ids), size=size, replace=False)
                subs.append(VertexSet.of(ids[int(i)] for i in pick))
        d = Fraction(s.edge_count_in(subs), size ** len(subs))
        if best is None or d > best[0]:
            best = (d, subs)
        if d >= target:
            return subs, True
    return best[1], False


def find_clique_blowup(
    g: Graph,
    k_plus_1: int,
    gamma,
    strategy: str = "pruning",
    mode: Mode = "auto",
    seed=0,
    parts: Sequence[VertexSet] | None = None,
) -> PipelineResult:
    """A verified ``K_{k+1}[t]``; cliques of order four and up recurse down to triangles."""
    if k_plus_1 < 3:
        raise BadParams("k_plus_1 must be at least 3")
    if k_plus_1 == 3:
        return find_triangle_blowup(g, gamma, strategy=strategy, mode=mode, seed=seed, parts=parts)
    k = k_plus_1 - 1
    gam = as_fraction(gamma)
    if gam <= 0:
        raise NotEnoughCliques("gamma must be positive")
    trace = RunTrace(f"K{k_plus_1}")
    n = g.n
    if parts is None:
        have = count_cliques(g, k_plus_1)
        if have == 0 or have < gam * n**k_plus_1:
            raise NotEnoughCliques(f"{have} copies of K_{k_plus_1} < gamma*N^{k_plus_1}")
    red = regularize_cliques(g, k, gam, strategy=strategy, seed=seed, parts=parts)
    if not red.certified:
        trace.advise("reduction not certified: " + "; ".join(red.notes))
    mg = red.mixed
    tc = min_extension_density(mg)
    d = _density(mg.system)
    tau0 = min(red.tau, tc, HALF)
    if tau0 <= 0 or d == 0:
        raise Degenerate("reduction left no extendable edge")
    p = min(HALF, gam / (4 * tc), d)
    sizes = list(mg.system.sizes) + [len(mg.c_part)]
    plan = plan_basic(k, tau0, p, min(sizes))
    it = basic_iteration(
        mg, tau0, p, mode=mode, steps=_desk_steps(plan, len(mg.c_part)),
        stop=None if plan.threshold_ok else _stop_when_small,
    )
    trace.children.append(it.trace)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & (2**63 - 1), k_plus_1]))
    c_index = red.c_index
    best = None
    for a_parts, cd in reversed(it.history):
        ell = len(cd)
        if ell == 0 or (best is not None and ell <= best[0]):
            break
        if any(len(p_) == 0 for p_ in a_parts):
            continue
        size = min(len(p_) for p_ in a_parts)
        if plan.threshold_ok:
            size = min(size, math.isqrt(math.isqrt(n)))
        s_l = mg.system.restrict(a_parts)
        if s_l.edge_count() == 0:
            continue
        subs, kept = _downsample(rng, s_l, size)
        if not kept:
            trace.advise("downsampling kept less than half the density")
        ids = sorted(v for p_ in subs for v in p_)
        sub, back = _kpartite_induced(g, subs, ids)
        pos = {v: i for i, v in enumerate(back)}
        sub_parts = tuple(VertexSet.of(pos[v] for v in p_) for p_ in subs)
        copies = count_spanning_cliques(sub, sub_parts)
        if copies == 0:
            continue
        gam_rec = Fraction(copies, sub.n**k)
        try:
            inner = find_clique_blowup(sub, k, gam_rec, strategy=strategy, mode=mode, seed=seed + ell, parts=sub_parts)
        except (Degenerate, NotEnoughCliques, RetriesExhausted) as exc:
            trace.notes.append(f"prefix {ell}: recursion gave no blowup ({type(exc).__name__})")
            continue
        except ReductionFailed:
            trace.notes.append(f"prefix {ell}: recursion reduction failed")
            continue
        trace.children.append(inner.trace)
        t_in = inner.order
        o = min(t_in, ell)
        if o and (best is None or o > best[0]):
            classes_in = [VertexSet.of(back[v] for v in cl) for cl in inner.certificate.classes]
            best = (o, classes_in, cd)
    if best is None:
        raise Degenerate("blowup order is zero at this scale", partial=trace)
    o, classes_in, cd = best
    c_cls = VertexSet.of(cd).first(o)
    a_cls = [cl.first(o) for cl in classes_in]
    # class order: A-classes in part order, with C inserted at its part index
    classes = list(a_cls)
    classes.insert(c_index, c_cls)
    cert = BlowupCertificate(Graph.complete(k_plus_1), tuple(classes), o)
    if parts is not None:
        cert = _canonical_k3(cert, parts)
    if not verify_blowup(g, cert):
        raise InvariantViolation("clique certificate does not verify against the input")
    trace.status = "complete"
    return PipelineResult(cert, trace, red.summary(), gam, "recursion", len(cd), o)


def _kpartite_induced(g: Graph, parts: Sequence[VertexSet], ids: list[int]) -> tuple[Graph, list[int]]:
    """Induced subgraph on ``ids`` keeping only edges between different parts."""
    label = {}
    for i, p in enumerate(parts):
        for v in p:
            label[v] = i
    sub, back = g.induced(ids)
    adj = list(sub.adj)
    for i, v in enumerate(back):
        same = 0
        for j, u in enumerate(back):
            if label[u] == label[v]:
                same |= 1 << j
        adj[i] &= ~same
    return Graph._trusted(sub.n, adj), back


def tilde_graph(g: Graph, h: Graph, parts: Sequence[VertexSet]) -> Graph:
    """Drop edges inside parts, complete the non-pattern pairs, keep pattern pairs as in g."""
    adj = [0] * g.n
    for i, pi in enumerate(parts):
        for j, pj in enumerate(parts):
            if i == j:
                continue
            if h.has_edge(i, j):
                for v in pi:
                    adj[v] |= g.adj[v] & pj.mask
            else:
                for v in pi:
                    adj[v] |= pj.mask
    return Graph._trusted(g.n, adj)


def find_h_blowup(
    g: Graph,
    h: Graph,
    gamma,
    strategy: str = "pruning",
    mode: Mode = "auto",
    seed=0,
    max_tries: int = 200,
) -> PipelineResult:
    """A verified ``H[t]``, where ``gamma`` is the labeled density of H (copies >= gamma*N^h)."""
    gam = as_fraction(gamma)
    hn = h.n
    n = g.n
    trace = RunTrace("pattern")
    if hn == 0:
        raise BadParams("pattern must have at least one vertex")
    if h.edge_count() == 0:
        t = n // hn
        ids = list(range(n))
        classes = tuple(VertexSet.of(ids[i * t:(i + 1) * t]) for i in range(hn))
        cert = BlowupCertificate(h, classes, t)
        if not verify_blowup(g, cert):
            raise InvariantViolation("edgeless pattern certificate failed")
        trace.status = "complete"
        return PipelineResult(cert, trace, None, gam, "trivial")
    if gam <= 0:
        raise NotEnoughCliques("gamma must be positive")
    have = labeled_copies(g, h)
    if have == 0 or have < gam * n**hn:
        raise NotEnoughCliques(f"{have} labeled copies < gamma*N^{hn}")
    scaled = gam / hn**hn
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & (2**63 - 1), 7]))
    parts = None
    for _ in range(max_tries):
        labels = rng.integers(hn, size=n)
        cand = tuple(VertexSet.of(np.flatnonzero(labels == i).tolist()) for i in range(hn))
        if any(len(p) == 0 for p in cand):
            continue
        if labeled_copies(g, h, cand) >= scaled * n**hn:
            parts = cand
            break
    if parts is None:
        raise RetriesExhausted("no partition kept enough spanning copies")
    trace.notes.append(f"scaled density {scaled}")
    gt = tilde_graph(g, h, parts)
    if hn == 2:
        x, y = parts
        d = bipartite_density(gt, x, y)
        kc = extract_biclique(gt, x, y, min(HALF, d))
        classes = kc.classes
        t = kc.t
        inner_trace = None
        branch = "biclique"
    else:
        inner = find_clique_blowup(gt, hn, scaled, strategy=strategy, mode=mode, seed=seed, parts=parts)
        classes = inner.certificate.classes
        t = inner.order
        inner_trace = inner.trace
        branch = inner.branch
    if inner_trace is not None:
        trace.children.append(inner_trace)
    if t == 0:
        raise Degenerate("blowup order is zero at this scale", partial=trace)
    for i, cl in enumerate(classes):
        if not cl.issubset(parts[i]):
            raise InvariantViolation("class escaped its part")
    cert = BlowupCertificate(h, tuple(classes), t)
    if not verify_blowup(g, cert):
        raise InvariantViolation("projected certificate does not verify against the input")
    trace.status = "complete"
    return PipelineResult(cert, trace, None, scaled, branch)
