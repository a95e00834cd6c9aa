from fractions import Fraction

import mpmath
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from blowup import energy as en
from blowup import iterate as it
from blowup.errors import BadParams, Degenerate, NoExtensions, NotEnoughCliques, PreconditionFailed
from blowup.generators import gnp
from blowup.graphcore import (
    Graph,
    MixedGraph,
    VertexSet,
    bipartite_density,
    count_cliques,
    labeled_copies,
    min_extension_density,
    triangle_density,
    verify_blowup,
)
from blowup.oracle import find_switcher_bruteforce, max_blowup_bruteforce

from conftest import parts_of, random_mixed, random_multipartite

HALF = Fraction(1, 2)


def complete_mixed(sizes):
    g = Graph.complete_multipartite(sizes)
    p = parts_of(sizes)
    return g, MixedGraph.from_graph(g, p[:-1], p[-1])


class TestPlans:
    def test_basic_worked(self):
        plan = it.plan_basic(2, HALF, HALF, 2**512)
        assert (plan.R, plan.s) == (128, 2)
        assert it.plan_basic(2, HALF, HALF, 2**128).s == 0

    def test_switch_worked(self):
        q = Fraction(1, 4)
        plan = it.plan_switch(q, q, 2**5120)
        assert plan.s == 1
        assert plan.m**3 <= 2**5120 < (plan.m + 1) ** 3
        assert it.plan_switch(q, q, 2**600).m == 2**200

    def test_switcher_orders_worked(self):
        assert it.good_for_switcher_orders(HALF, HALF, 2**2048)[:2] == (2, 170)

    def test_thresholds(self):
        assert it.plan_basic(2, HALF, HALF, 2**200).threshold_ok
        assert not it.plan_basic(2, HALF, HALF, 2**199).threshold_ok
        assert it.plan_switch(HALF, HALF, 2**800).threshold_ok
        assert not it.plan_switch(HALF, HALF, 2**799).threshold_ok

    def test_bad_params(self):
        with pytest.raises(BadParams):
            it.plan_basic(2, Fraction(3, 4), HALF, 100)
        with pytest.raises(BadParams):
            it.plan_switch(HALF, 0, 100)

    @given(
        st.integers(2, 4),
        st.fractions(Fraction(1, 64), HALF),
        st.fractions(Fraction(1, 64), HALF),
        st.integers(1, 4000),
    )
    def test_basic_against_mpmath(self, k, tau0, p, bits):
        n = 2**bits + 1
        plan = it.plan_basic(k, tau0, p, n)
        with mpmath.workdps(60):
            ln = mpmath.log(n, 2)
            lp = mpmath.log(1 / mpmath.mpf(p.numerator) * p.denominator, 2)
            s = mpmath.mpf(tau0.numerator) / tau0.denominator * ln / (2 ** (k + 5) * lp)
            R = ln / (4 * lp)
        assume(abs(s - mpmath.nint(s)) > 1e-6)
        assert plan.s == int(mpmath.floor(s))
        assert plan.R == pytest.approx(float(R), rel=1e-12)

    @given(st.fractions(Fraction(1, 64), HALF), st.fractions(Fraction(1, 64), HALF), st.integers(1, 6000))
    def test_switch_against_mpmath(self, tau0, p0, bits):
        n = 2**bits + 3
        plan = it.plan_switch(tau0, p0, n)
        with mpmath.workdps(60):
            t, q = mpmath.mpf(tau0.numerator) / tau0.denominator, mpmath.mpf(p0.numerator) / p0.denominator
            s = mpmath.sqrt(p0 * t) * mpmath.log(n, 2) / (320 * mpmath.log(1 / q, 2) * mpmath.log(1 / t, 2))
        assume(abs(s - mpmath.nint(s)) > 1e-6)
        assert plan.s == int(mpmath.floor(s))
        assert plan.m**3 <= n < (plan.m + 1) ** 3


class TestOneStep:
    def test_complete(self):
        g, m = complete_mixed([2, 2, 2])
        res = it.one_step(m, 1, 8, mode="exact")
        assert [p.sorted() for p in res.balanced.parts] == [[0, 1], [2, 3]]
        assert all(res.checks.values())
        assert res.balanced.log_energy() == pytest.approx(en.log_energy(m.system, 8))

    def test_unique_best_c(self):
        # C = {4, 5, 6}; vertex 5 sees everything, the others see one vertex each
        edges = [(0, 2), (0, 3), (1, 2), (1, 3), (5, 0), (5, 1), (5, 2), (5, 3), (4, 0), (6, 3)]
        g = Graph.from_edges(7, edges)
        m = MixedGraph.from_graph(g, (VertexSet.of([0, 1]), VertexSet.of([2, 3])), VertexSet.of([4, 5, 6]))
        res = it.one_step(m, Fraction(1, 3), 24, mode="exact")
        assert res.c_star == 5
        assert all(res.checks.values())

    def test_tau_precondition(self):
        g = Graph.from_edges(5, [(0, 1), (0, 2), (1, 2), (0, 3)])
        m = MixedGraph.from_graph(g, (VertexSet.of([0]), VertexSet.of([1])), VertexSet.of([2, 3, 4]))
        with pytest.raises(PreconditionFailed):
            it.one_step(m, 1, 8)
        with pytest.raises(PreconditionFailed):
            it.one_step(m, Fraction(1, 3), 2)

    def test_no_extensions(self):
        g = Graph.from_edges(3, [(0, 1)])
        m = MixedGraph.from_graph(g, (VertexSet.of([0]), VertexSet.of([1])), VertexSet.of([2]))
        with pytest.raises(NoExtensions):
            it.one_step(m, 1, 8, strict=False)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 5), st.floats(0.4, 1.0), st.integers(0, 10**6), st.sampled_from([8.0, 16.0, 32.0]))
    def test_conclusions_under_hypotheses(self, na, nb, nc, p, seed, R):
        g, m = random_mixed([na, nb], nc, p, seed)
        b = en.extract_strictly_balanced(m.system, R)
        if b.system.edge_count() == 0:
            return
        m = m.restrict(b.parts)
        tau = min(min_extension_density(m), Fraction(1))
        assume(tau > 0 and R >= 8 / tau)
        res = it.one_step(m, tau, R, mode="exact")
        assert all(res.checks.values())
        for c_part in res.balanced.parts:
            assert c_part.mask & ~m.neighborhood(res.c_star) == 0


class TestBasicIteration:
    def test_complete(self):
        g, m = complete_mixed([4, 4, 4])
        res = it.basic_iteration(m, HALF, HALF, mode="exact", steps=3)
        assert len(res.c_dagger) == 3 and res.status == "complete"
        for step in res.trace.steps:
            assert step.c_remaining == 4 - step.step
        for c in res.c_dagger:
            assert all(p.mask & ~g.adj[c] == 0 for p in res.parts)

    def test_zero_plan_is_degenerate(self):
        _, m = complete_mixed([4, 4, 4])
        with pytest.raises(Degenerate):
            it.basic_iteration(m, HALF, HALF)

    def test_preconditions(self):
        g, parts = random_multipartite([4, 4, 4], 0.3, 1)
        m = MixedGraph.from_graph(g, parts[:2], parts[2])
        with pytest.raises(PreconditionFailed):
            it.basic_iteration(m, HALF, HALF, steps=1)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(3, 8), st.floats(0.6, 1.0), st.integers(0, 10**6))
    def test_trace_invariants(self, size, p, seed):
        g, m = random_mixed([size, size], size, p, seed)
        tc = min_extension_density(m)
        d = Fraction(m.system.edge_count(), size * size)
        assume(tc > 0 and d > 0)
        tau0, q = min(tc, HALF), min(d, HALF)
        res = it.basic_iteration(m, tau0, q, mode="auto", steps=size)
        removed = []
        for step in res.trace.steps[1:]:
            removed.append(step.c_star)
            assert step.c_remaining == size - step.step
        assert tuple(removed[: len(res.c_dagger)]) == res.c_dagger
        for parts, cd in res.history:
            for c in cd:
                assert all(pp.mask & ~g.adj[c] == 0 for pp in parts)
        if res.status == "partial":
            assert res.trace.failure_step is not None


class TestSwitcher:
    def test_complete(self):
        g = Graph.complete_multipartite([3, 3, 3])
        assert it.is_switcher(g, *parts_of([3, 3, 3]), 3, 1)

    def test_triangle_free(self):
        g = Graph.complete_multipartite([3, 3]).induced(range(6))[0]
        g = Graph.from_edges(9, list(g.edges()))
        assert not it.is_switcher(g, *parts_of([3, 3, 3]), 1, Fraction(1, 10))

    def test_empty_part(self):
        from blowup.errors import EmptyPart

        with pytest.raises(EmptyPart):
            it.is_switcher(Graph.complete(3), VertexSet(), VertexSet.of([1]), VertexSet.of([2]), 1, HALF)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**6), st.integers(1, 4), st.fractions(0, 1), st.integers(0, 4), st.fractions(0, 1))
    def test_monotone(self, seed, m, mu, dm, scale):
        g, parts = random_multipartite([4, 4, 4], 0.7, seed)
        if it.is_switcher(g, *parts, m, mu):
            assert it.is_switcher(g, *parts, max(m - dm, 0), mu * scale)

    def test_switcher_solve_complete(self):
        g = Graph.complete_multipartite([6, 6, 6])
        out = it.switcher_solve(g, *parts_of([6, 6, 6]), HALF, HALF)
        assert out.certificate.t >= 1 and verify_blowup(g, out.certificate)

    def test_switcher_solve_preconditions(self):
        with pytest.raises(PreconditionFailed):
            it.switcher_solve(Graph.empty(9), *parts_of([3, 3, 3]), HALF, HALF)
        # complete A-B pair but a single C vertex: triangle density 1/3 < kappa = 1/2
        a, b, c = parts_of([3, 3, 3])
        edges = [(x, y) for x in a for y in b] + [(6, v) for v in range(6)]
        with pytest.raises(PreconditionFailed):
            it.switcher_solve(Graph.from_edges(9, edges), a, b, c, HALF, Fraction(1, 4))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10**6))
    def test_filtered_graph_bounds(self, seed):
        from blowup.reduce import prune_low_extension_edges

        g, parts = random_multipartite([5, 5, 5], 0.8, seed)
        k3 = triangle_density(g, *parts)
        d = bipartite_density(g, parts[0], parts[1])
        assume(k3 > 0)
        kappa, nu = min(k3, HALF), min(k3 / d, HALF)
        mg = prune_low_extension_edges(MixedGraph.from_graph(g, parts[:2], parts[2]), nu / 2, inclusive=True)
        assert mg.system.edge_count() > 0
        assert min_extension_density(mg) >= nu / 2
        assert Fraction(mg.system.edge_count(), 25) >= kappa / 2
        out = it.switcher_solve(g, *parts, kappa, nu)
        assert verify_blowup(g, out.certificate)


class TestSwitchingStep:
    def test_complete_gives_switcher(self):
        g = Graph.complete_multipartite([8, 8, 8])
        a, b, c = parts_of([8, 8, 8])
        out = it.one_step_switching(g, a, b, c, HALF, 100, 1, mode="exact")
        assert isinstance(out, it.SwitcherFound)
        r = out.report
        assert it.is_switcher(g, r.x, r.y, r.z, r.m, mu_sq=r.mu_sq)

    def test_sparse_vertices_give_switcher(self):
        # |A| = 16, |B| = 2, |C| = 16; c_i sees only a_i in A, and all of B
        a, b, c = parts_of([16, 2, 16])
        edges = [(x, y) for x in a for y in b]
        edges += [(32 - 16 + i + 2, i) for i in range(16)]
        edges += [(z, y) for z in c for y in b]
        g = Graph.from_edges(34, edges)
        out = it.one_step_switching(g, a, b, c, Fraction(1, 16), 800, 1, mode="heuristic", strict=False)
        assert isinstance(out, it.SwitcherFound)
        r = out.report
        assert r.x == a and r.y.issubset(c) and len(r.y) == 16
        assert it.is_switcher(g, r.x, r.y, r.z, r.m, mu_sq=r.mu_sq)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 6), st.floats(0.3, 0.9), st.integers(0, 10**6))
    def test_oracle_agrees_on_switchers(self, size, p, seed):
        g, (a, b, c) = random_multipartite([size, size, size], p, seed)
        mg = MixedGraph.from_graph(g, (a, b), c)
        tc = min_extension_density(mg)
        assume(tc > 0)
        tau = min(tc, HALF)
        try:
            out = it.one_step_switching(g, a, b, c, tau, 50 / float(tau), 1, mode="exact", strict=False)
        except NoExtensions:
            return
        if isinstance(out, it.SwitcherFound):
            r = out.report
            assert find_switcher_bruteforce(g, a, b, c, r.m, mu_sq=r.mu_sq) is not None
        else:
            assert out.checks["complete"] and out.checks["nonempty"]


class TestSwitchIteration:
    def test_complete_switcher(self):
        g = Graph.complete_multipartite([8, 8, 8])
        res = it.switch_iteration(g, *parts_of([8, 8, 8]), HALF, HALF, steps=2)
        assert res.found_switcher
        assert it.is_switcher(g, res.switcher.x, res.switcher.y, res.switcher.z, res.switcher.m, mu_sq=res.switcher.mu_sq)

    def test_zero_plan(self):
        g = Graph.complete_multipartite([8, 8, 8])
        with pytest.raises(Degenerate):
            it.switch_iteration(g, *parts_of([8, 8, 8]), HALF, HALF)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(4, 10), st.floats(0.4, 0.9), st.integers(0, 10**6))
    def test_dichotomy(self, size, p, seed):
        g, (a, b, c) = random_multipartite([size, size, size], p, seed)
        mg = MixedGraph.from_graph(g, (a, b), c)
        tc = min_extension_density(mg)
        d = bipartite_density(g, a, b)
        assume(tc > 0 and d > 0)
        res = it.switch_iteration(g, a, b, c, min(tc, HALF), min(d, HALF), steps=size)
        if res.found_switcher:
            r = res.switcher
            assert res.parts is None
            assert it.is_switcher(g, r.x, r.y, r.z, r.m, mu_sq=r.mu_sq)
        else:
            for cc in res.c_dagger:
                assert all(pp.mask & ~g.adj[cc] == 0 for pp in res.parts)


class TestPipelines:
    def test_k999(self):
        g = Graph.complete_multipartite([9, 9, 9])
        res = it.find_triangle_blowup(g, Fraction(729, 27**3))
        assert res.order >= 1 and verify_blowup(g, res.certificate)

    def test_triangle_free(self):
        with pytest.raises(NotEnoughCliques):
            it.find_triangle_blowup(Graph.cycle(5), Fraction(1, 1000))
        with pytest.raises(NotEnoughCliques):
            it.find_triangle_blowup(Graph.complete_multipartite([6, 6]), Fraction(1, 1000))

    @settings(max_examples=15, deadline=None)
    @given(st.integers(9, 14), st.floats(0.5, 0.95), st.integers(0, 10**6))
    def test_order_at_most_oracle(self, n, p, seed):
        g = gnp(n, p, seed)
        c = count_cliques(g, 3)
        assume(c > 0)
        try:
            res = it.find_triangle_blowup(g, Fraction(c, n**3), seed=seed)
        except Degenerate:
            return
        assert verify_blowup(g, res.certificate)
        assert res.order <= max_blowup_bruteforce(g, Graph.complete(3))[0]

    def test_gnp300(self):
        g = gnp(300, 0.5, 0)
        res = it.find_triangle_blowup(g, Fraction(count_cliques(g, 3), 300**3))
        assert res.order >= 2 and verify_blowup(g, res.certificate)

    def test_k4_complete(self):
        g = Graph.complete_multipartite([8, 8, 8, 8])
        res = it.find_clique_blowup(g, 4, Fraction(8**4, 32**4))
        assert res.order >= 1 and verify_blowup(g, res.certificate)

    def test_k4_free(self):
        with pytest.raises(NotEnoughCliques):
            it.find_clique_blowup(Graph.complete_multipartite([5, 5, 5]), 4, Fraction(1, 10**6))

    def test_recursion_depth(self):
        g = Graph.complete_multipartite([6, 6, 6, 6, 6])
        res = it.find_clique_blowup(g, 5, Fraction(6**5, 30**5))
        assert verify_blowup(g, res.certificate)

        def depth(trace):
            inner = [c for c in trace.children if c.kind.startswith("K") or c.kind == "triangle"]
            return 1 + max((depth(c) for c in inner), default=0)

        # K5 -> K4 -> triangle
        assert depth(res.trace) == 5 - 2

    def test_h_k2(self):
        g = gnp(30, 0.6, 4)
        h = Graph.complete(2)
        res = it.find_h_blowup(g, h, Fraction(labeled_copies(g, h), 900))
        assert res.order >= 1 and verify_blowup(g, res.certificate)

    def test_h_path_and_scaling(self):
        g = gnp(12, 0.8, 2)
        h = Graph.path(3)
        gam = Fraction(labeled_copies(g, h), 12**3)
        res = it.find_h_blowup(g, h, gam)
        assert verify_blowup(g, res.certificate)
        assert res.gamma_used == gam / 27
        assert res.order <= max_blowup_bruteforce(g, h)[0]

    def test_h_edgeless(self):
        g = Graph.empty(7)
        res = it.find_h_blowup(g, Graph.empty(3), 1)
        assert res.order == 2 and verify_blowup(g, res.certificate)

    def test_determinism(self):
        g = gnp(80, 0.5, 3)
        gam = Fraction(count_cliques(g, 3), 80**3)
        a = it.find_triangle_blowup(g, gam, seed=5)
        b = it.find_triangle_blowup(g, gam, seed=5)
        assert a.certificate.to_dict() == b.certificate.to_dict()
        assert a.trace.to_dict() == b.trace.to_dict()
