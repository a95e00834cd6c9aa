"""Shared builders for random small instances."""

from __future__ import annotations

import math

import numpy as np
import pytest

from blowup.graphcore import Graph, MixedGraph, VertexSet


def parts_of(sizes):
    out, start = [], 0
    for s in sizes:
        out.append(VertexSet.of(range(start, start + s)))
        start += s
    return tuple(out)


def random_multipartite(sizes, p, seed, within=0.0):
    """Random graph on consecutive parts; cross pairs with prob p, inside pairs with prob `within`."""
    rng = np.random.default_rng(seed)
    parts = parts_of(sizes)
    n = sum(sizes)
    label = np.concatenate([[i] * s for i, s in enumerate(sizes)]) if n else np.zeros(0, int)
    edges = []
    for u in range(n):
        for v in range(u + 1, n):
            q = within if label[u] == label[v] else p
            if q and rng.random() < q:
                edges.append((u, v))
    return Graph.from_edges(n, edges), parts


def random_mixed(sizes_a, size_c, p, seed):
    """k=len(sizes_a) mixed graph taken from a random multipartite graph."""
    g, parts = random_multipartite(list(sizes_a) + [size_c], p, seed)
    return g, MixedGraph.from_graph(g, parts[:-1], parts[-1])


def forced_pair(nx, ny, p, seed):
    """Random bipartite pair whose density is at least p by construction."""
    rng = np.random.default_rng(seed)
    need = math.ceil(p * nx * ny)
    extra = rng.random()
    total = min(nx * ny, need + int(extra * (nx * ny - need) * 0.5))
    cells = rng.choice(nx * ny, size=total, replace=False)
    edges = [(int(c) // ny, nx + int(c) % ny) for c in cells]
    g = Graph.from_edges(nx + ny, edges)
    x, y = parts_of([nx, ny])
    return g, x, y


_acceptance_lines: list[str] = []


@pytest.fixture
def acceptance_report():
    """Record one PASS/FAIL line per acceptance criterion."""
    return _acceptance_lines.append


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_acceptance_lines, key=lambda s: int(s.split()[2].rstrip(":"))):
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
