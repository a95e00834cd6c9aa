"""Edge-list and partition file formats.

An edge list starts with a header ``n <count>`` followed by one ``u v`` pair
per line (0-based ids).  Blank lines and lines starting with ``#`` are
ignored.  A partition file has one part per line as space-separated ids.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, TextIO

from .errors import ParseError
from .graphcore import Graph, VertexSet


def _content_lines(lines: Iterable[str]):
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line


def parse_edge_list(text: str) -> Graph:
    rows = _content_lines(text.splitlines())
    try:
        lineno, header = next(rows)
    except StopIteration:
        raise ParseError("missing 'n <count>' header") from None
    fields = header.split()
    if len(fields) != 2 or fields[0] != "n":
        raise ParseError(f"line {lineno}: expected 'n <count>', got {header!r}")
    try:
        n = int(fields[1])
    except ValueError:
        raise ParseError(f"line {lineno}: vertex count is not an integer") from None
    if n < 0:
        raise ParseError(f"line {lineno}: negative vertex count")
    edges = []
    for lineno, line in rows:
        fields = line.split()
        if len(fields) != 2:
            raise ParseError(f"line {lineno}: expected 'u v', got {line!r}")
        try:
            u, v = int(fields[0]), int(fields[1])
        except ValueError:
            raise ParseError(f"line {lineno}: vertex ids must be integers") from None
        if not (0 <= u < n and 0 <= v < n):
            raise ParseError(f"line {lineno}: vertex id out of range [0, {n})")
        if u == v:
            raise ParseError(f"line {lineno}: self-loop at {u}")
        edges.append((u, v))
    return Graph.from_edges(n, edges)


def format_edge_list(g: Graph, comment: str | None = None) -> str:
    out = []
    if comment:
        out.extend(f"# {line}" for line in comment.splitlines())
    out.append(f"n {g.n}")
    out.extend(f"{u} {v}" for u, v in g.edges())
    return "\n".join(out) + "\n"


def read_graph(path: str | Path) -> Graph:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return parse_edge_list(text)


def write_graph(g: Graph, path: str | Path | TextIO, comment: str | None = None) -> None:
    text = format_edge_list(g, comment)
    if hasattr(path, "write"):
        path.write(text)
    else:
        Path(path).write_text(text)


def parse_partition(text: str, n: int | None = None) -> tuple[VertexSet, ...]:
    parts = []
    seen: set[int] = set()
    for lineno, line in _content_lines(text.splitlines()):
        try:
            ids = [int(tok) for tok in line.split()]
        except ValueError:
            raise ParseError(f"line {lineno}: vertex ids must be integers") from None
        for v in ids:
            if v < 0 or (n is not None and v >= n):
                raise ParseError(f"line {lineno}: vertex id {v} out of range")
            if v in seen:
                raise ParseError(f"line {lineno}: vertex {v} appears in two parts")
            seen.add(v)
        parts.append(VertexSet.of(ids))
    return tuple(parts)


def read_partition(path: str | Path, n: int | None = None) -> tuple[VertexSet, ...]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return parse_partition(text, n)


def format_partition(parts: Iterable[VertexSet]) -> str:
    return "".join(" ".join(map(str, p.sorted())) + "\n" for p in parts)
