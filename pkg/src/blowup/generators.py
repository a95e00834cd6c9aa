"""Seeded random graph generators."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import BadParams
from .graphcore import Graph, VertexSet, as_fraction, bipartite_density


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed) & (2**64 - 1)))


def _prob(name: str, p) -> float:
    try:
        q = float(as_fraction(p))
    except (TypeError, ValueError, ZeroDivisionError):
        raise BadParams(f"{name} is not a number: {p!r}") from None
    if not 0 <= q <= 1:
        raise BadParams(f"{name} must lie in [0, 1], got {p}")
    return q


def _from_upper(n: int, upper: np.ndarray) -> Graph:
    """Graph from a boolean matrix whose strict upper triangle marks the edges."""
    iu, ju = np.nonzero(np.triu(upper, k=1))
    return Graph.from_edges(n, zip(iu.tolist(), ju.tolist()))


def gnp(n: int, p, seed=0) -> Graph:
    """Erdos-Renyi G(n, p)."""
    if n < 0:
        raise BadParams("n must be non-negative")
    q = _prob("p", p)
    rng = _rng(seed)
    return _from_upper(n, rng.random((n, n)) < q)


def multipartite(sizes: Sequence[int], p, seed=0) -> tuple[Graph, tuple[VertexSet, ...]]:
    """Random multipartite graph: each cross-part pair is an edge with probability p."""
    if any(s < 0 for s in sizes):
        raise BadParams("part sizes must be non-negative")
    q = _prob("p", p)
    n = sum(sizes)
    label = np.repeat(np.arange(len(sizes)), sizes)
    cross = label[:, None] != label[None, :]
    rng = _rng(seed)
    g = _from_upper(n, cross & (rng.random((n, n)) < q))
    return g, _parts_of(sizes)


def _parts_of(sizes: Sequence[int]) -> tuple[VertexSet, ...]:
    out, start = [], 0
    for s in sizes:
        out.append(VertexSet.of(range(start, start + s)))
        start += s
    return tuple(out)


def hard_tripartite(n: int, gamma, seed=0) -> tuple[Graph, tuple[VertexSet, ...]]:
    """Tripartite graph on parts of n/3 with pair densities 1/2, sqrt(gamma), sqrt(gamma).

    The densities belong to the pairs (V1, V2), (V1, V3) and (V2, V3) in that
    order, so the triangle density is about gamma / 2.
    """
    if n < 3:
        raise BadParams("hard instances need n >= 3")
    gam = as_fraction(gamma)
    if not 0 < gam <= 1:
        raise BadParams("gamma must lie in (0, 1]")
    r = math.sqrt(gam)
    sizes = [n // 3 + (1 if i < n % 3 else 0) for i in range(3)]
    label = np.repeat(np.arange(3), sizes)
    prob = np.zeros((3, 3))
    prob[0, 1] = prob[1, 0] = 0.5
    prob[0, 2] = prob[2, 0] = r
    prob[1, 2] = prob[2, 1] = r
    rng = _rng(seed)
    mat = rng.random((n, n)) < prob[label[:, None], label[None, :]]
    return _from_upper(n, mat), _parts_of(sizes)


def pair_densities(g: Graph, parts: Sequence[VertexSet]) -> dict[tuple[int, int], Fraction]:
    return {
        (i, j): bipartite_density(g, parts[i], parts[j])
        for i in range(len(parts))
        for j in range(i + 1, len(parts))
    }
