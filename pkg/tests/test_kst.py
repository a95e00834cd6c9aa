import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blowup.errors import BadParams, DensityTooLow
from blowup.graphcore import Graph, VertexSet, bipartite_density, verify_blowup
from blowup.kst import extract_biclique, find_biclique, kst_order
from blowup.oracle import max_biclique_bruteforce

from conftest import forced_pair, parts_of, random_multipartite


class TestOrder:
    def test_worked_values(self):
        assert kst_order(16, 16, Fraction(1, 2)) == 2
        assert kst_order(2, 2, Fraction(1, 2)) == 0
        assert kst_order(2**40, 2**60, Fraction(1, 4)) == 10

    def test_bad_p(self):
        with pytest.raises(BadParams):
            kst_order(4, 4, Fraction(3, 4))
        with pytest.raises(BadParams):
            kst_order(4, 4, 0)

    @given(st.integers(1, 10**30), st.integers(1, 10**30), st.fractions(Fraction(1, 1000), Fraction(1, 2)))
    def test_against_float_formula(self, a, b, p):
        t = kst_order(a, b, p)
        m = min(a, b)
        # exact characterisation, then agreement with the float formula away from integers
        assert (1 / p) ** (2 * t) <= m < (1 / p) ** (2 * t + 2)
        approx = math.log2(m) / (2 * math.log2(1 / p))
        if abs(approx - round(approx)) > 1e-9:
            assert t == math.floor(approx)


class TestExtract:
    def test_complete_4x4(self):
        g = Graph.complete_multipartite([4, 4])
        x, y = parts_of([4, 4])
        cert = extract_biclique(g, x, y, Fraction(1, 2))
        assert cert.t >= 2 and verify_blowup(g, cert)

    def test_matching(self):
        g = Graph.from_edges(4, [(0, 2), (1, 3)])
        cert = extract_biclique(g, VertexSet.of([0, 1]), VertexSet.of([2, 3]), Fraction(1, 2))
        assert cert.t >= 0 and verify_blowup(g, cert)

    def test_density_too_low(self):
        g = Graph.from_edges(4, [(0, 2)])
        with pytest.raises(DensityTooLow):
            extract_biclique(g, VertexSet.of([0, 1]), VertexSet.of([2, 3]), Fraction(1, 2))

    def test_sparse_pair_small_order(self):
        g = Graph.from_edges(4, [(0, 2)])
        cert = extract_biclique(g, VertexSet.of([0, 1]), VertexSet.of([2, 3]), Fraction(1, 4))
        assert cert.t == 1 and verify_blowup(g, cert)

    def test_random_64(self):
        g, x, y = forced_pair(64, 64, Fraction(1, 2), 3)
        cert = extract_biclique(g, x, y, Fraction(1, 2))
        assert verify_blowup(g, cert)
        assert kst_order(64, 64, Fraction(1, 2)) == 3
        assert cert.t >= 3

    def test_find_biclique_none(self):
        g = Graph.from_edges(4, [(0, 2), (1, 3)])
        assert find_biclique(g, VertexSet.of([0, 1]), VertexSet.of([2, 3]), 2) is None

    @settings(max_examples=40, deadline=None)
    @given(st.integers(16, 64), st.integers(16, 64), st.sampled_from([Fraction(1, 2), Fraction(1, 4), Fraction(1, 8)]), st.integers(0, 10**6))
    def test_guarantee(self, nx, ny, p, seed):
        g, x, y = forced_pair(nx, ny, p, seed)
        assert bipartite_density(g, x, y) >= p
        cert = extract_biclique(g, x, y, p)
        assert verify_blowup(g, cert)
        assert cert.t >= kst_order(nx, ny, p)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 12), st.integers(1, 12), st.floats(0.3, 1.0), st.integers(0, 10**6))
    def test_oracle_bounds_extractor(self, nx, ny, p, seed):
        g, (x, y) = random_multipartite([nx, ny], p, seed)
        d = bipartite_density(g, x, y)
        if d == 0:
            return
        q = min(Fraction(1, 2), d)
        cert = extract_biclique(g, x, y, q)
        best, (bx, by) = max_biclique_bruteforce(g, x, y)
        assert kst_order(nx, ny, q) <= cert.t <= best
        assert len(bx) == len(by) == best
