"""Command-line driver: generate instances, find and verify blowups, run sweeps.

Reports are JSON on stdout (``"schema": 1``); diagnostics go to stderr, with
the level taken from ``BLOWUP_LOG``.  Densities in reports are given both as
labeled-copy density (injective maps of the pattern, over ``N^h``) and as the
unlabeled density that the clique pipelines consume.

Exit codes: 0 verified output, 1 parse or usage error, 2 not enough copies of
the pattern, 3 any other typed failure (degenerate or unverifiable result).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from . import __version__, generators, io, oracle
from .errors import BadParams, BlowupError, NotEnoughCliques, ParseError
from .graphcore import (
    BlowupCertificate,
    Graph,
    as_fraction,
    automorphism_count,
    count_cliques,
    labeled_copies,
    verify_blowup,
)
from .iterate import PipelineResult, RunTrace, find_clique_blowup, find_h_blowup, find_triangle_blowup

log = logging.getLogger("blowup")

SCHEMA = 1
EXIT_OK, EXIT_PARSE, EXIT_FEW, EXIT_OTHER = 0, 1, 2, 3
SWEEP_HEADER = [
    "cell",
    "seed",
    "kind",
    "n",
    "gamma",
    "pipeline",
    "order_t",
    "s",
    "kst_t",
    "steps_completed",
    "advisory_failures",
]


def _setup_logging() -> None:
    level = os.environ.get("BLOWUP_LOG", "WARNING").upper()
    logging.basicConfig(stream=sys.stderr, level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _fraction_arg(text: str) -> Fraction:
    try:
        return as_fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _fraction_list(text: str) -> list[Fraction]:
    return [_fraction_arg(x) for x in text.split(",") if x]


def _clean(obj):
    """JSON-safe copy: fractions as strings, non-finite floats as null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2)


# patterns


class Pattern:
    """What to look for: a triangle, a clique, or an arbitrary graph H."""

    def __init__(self, spec: str):
        self.spec = spec
        if spec == "k3":
            self.kind, self.graph = "clique", Graph.complete(3)
        elif spec.startswith("kclique:"):
            try:
                h = int(spec.split(":", 1)[1])
            except ValueError:
                raise ParseError(f"bad clique order in {spec!r}") from None
            if h < 2:
                raise ParseError("clique order must be at least 2")
            self.kind, self.graph = "clique", Graph.complete(h)
        else:
            self.kind, self.graph = "graph", io.read_graph(spec)

    @property
    def h(self) -> int:
        return self.graph.n

    def densities(self, g: Graph) -> dict[str, Fraction]:
        """Labeled and unlabeled copy densities of the pattern in g."""
        n = g.n or 1
        if self.kind == "clique":
            unlabeled = count_cliques(g, self.h)
            labeled = unlabeled * math.factorial(self.h)
        else:
            labeled = labeled_copies(g, self.graph)
            unlabeled = labeled // automorphism_count(self.graph)
        return {
            "labeled": Fraction(labeled, n**self.h),
            "unlabeled": Fraction(unlabeled, n**self.h),
            "labeled_copies": labeled,
            "unlabeled_copies": unlabeled,
        }

    def run(self, g: Graph, gamma_labeled: Fraction, strategy: str, mode: str, seed: int) -> PipelineResult:
        if self.kind == "clique" and self.h >= 3:
            unl = gamma_labeled / math.factorial(self.h)
            if self.h == 3:
                return find_triangle_blowup(g, unl, strategy=strategy, mode=mode, seed=seed)
            return find_clique_blowup(g, self.h, unl, strategy=strategy, mode=mode, seed=seed)
        return find_h_blowup(g, self.graph, gamma_labeled, strategy=strategy, mode=mode, seed=seed)


def _advisory_count(trace: dict) -> int:
    return len(trace.get("advisory", [])) + sum(_advisory_count(c) for c in trace.get("children", []))


def _iteration_steps(trace: dict) -> int:
    """Completed iteration steps in the outermost iteration of a trace tree."""
    if trace.get("kind") in ("basic", "switch"):
        return max(len(trace.get("steps", [])) - 1, 0)
    for child in trace.get("children", []):
        if child.get("kind") in ("basic", "switch"):
            return _iteration_steps(child)
    return 0


def _trace_summary(trace: RunTrace) -> dict:
    d = trace.to_dict()
    return {
        "kind": d["kind"],
        "status": d["status"],
        "steps_completed": _iteration_steps(d),
        "advisory_failures": _advisory_count(d),
        "advisory": d["advisory"],
        "notes": d["notes"],
        "children": [
            {
                "kind": c["kind"],
                "status": c["status"],
                "R": c["R"],
                "plan": c["plan"],
                "advisory": c["advisory"],
                "steps": [
                    {key: s[key] for key in ("step", "c_star", "sizes", "c_remaining", "density", "log_energy", "certified")}
                    for s in c["steps"]
                ],
            }
            for c in d["children"]
        ],
    }


def find_report(
    g: Graph,
    pattern: Pattern,
    *,
    gamma: Fraction | None = None,
    seed: int = 0,
    strategy: str = "pruning",
    mode: str = "auto",
    source: dict | None = None,
) -> tuple[dict, int, RunTrace | None]:
    """Run the pipeline and build the report; returns (report, exit code, full trace)."""
    start = time.perf_counter()
    dens = pattern.densities(g)
    gamma_labeled = dens["labeled"] if gamma is None else gamma
    report = {
        "schema": SCHEMA,
        "tool_version": __version__,
        "input": source or {},
        "pattern": {"spec": pattern.spec, "n": pattern.h, "edges": [list(e) for e in pattern.graph.edges()]},
        "graph": {"n": g.n, "edges": g.edge_count()},
        "gamma": {
            "labeled": gamma_labeled,
            "unlabeled": gamma_labeled / automorphism_count(pattern.graph),
            "measured_labeled": dens["labeled"],
            "measured_unlabeled": dens["unlabeled"],
            "source": "measured" if gamma is None else "given",
        },
        "seed": seed,
        "strategy": strategy,
        "mode": mode,
    }
    trace = None
    try:
        res = pattern.run(g, gamma_labeled, strategy, mode, seed)
    except NotEnoughCliques as exc:
        report.update(status="failed", error={"type": type(exc).__name__, "message": str(exc)})
        code = EXIT_FEW
    except BlowupError as exc:
        report.update(status="failed", error={"type": type(exc).__name__, "message": str(exc)})
        code = EXIT_OTHER
    else:
        trace = res.trace
        ok = verify_blowup(g, res.certificate)
        report.update(
            status="verified" if ok else "unverified",
            pipeline=res.trace.kind,
            branch=res.branch,
            order=res.order,
            s=res.s,
            kst_t=res.kst_t,
            gamma_pipeline=res.gamma_used,
            reduction=res.reduction,
            certificate=res.certificate.to_dict(),
            trace=_trace_summary(res.trace),
        )
        code = EXIT_OK if ok else EXIT_OTHER
    report["wall_time"] = round(time.perf_counter() - start, 6)
    return report, code, trace


def verify_report(g: Graph, report: dict) -> tuple[bool, str]:
    """Check a report's certificate against g; an empty certificate passes with a warning."""
    cert_d = report.get("certificate")
    if cert_d is None:
        return False, "report carries no certificate"
    try:
        cert = BlowupCertificate.from_dict(cert_d)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed certificate: {exc}") from exc
    if any(max(c, default=-1) >= g.n for c in cert_d["classes"]):
        return False, "certificate names vertices outside the graph"
    if not verify_blowup(g, cert):
        return False, "certificate does not verify"
    if cert.t == 0:
        return True, "empty certificate (t = 0) holds vacuously"
    return True, f"verified {pattern_name(cert.pattern)}[{cert.t}]"


def pattern_name(h: Graph) -> str:
    if h.edge_count() == h.n * (h.n - 1) // 2:
        return f"K{h.n}"
    return f"H({h.n} vertices, {h.edge_count()} edges)"


# subcommands


def _load_graph(path: str) -> Graph:
    return io.read_graph(path)


def cmd_gen(args) -> int:
    try:
        parts = None
        if args.kind == "gnp":
            if args.n is None or args.p is None:
                raise BadParams("gnp needs --n and --p")
            g = generators.gnp(args.n, args.p, args.seed)
            desc = f"gnp n={args.n} p={args.p} seed={args.seed}"
        elif args.kind == "multipartite":
            if not args.sizes or args.p is None:
                raise BadParams("multipartite needs --sizes and --p")
            g, parts = generators.multipartite(args.sizes, args.p, args.seed)
            desc = f"multipartite sizes={','.join(map(str, args.sizes))} p={args.p} seed={args.seed}"
        else:
            if args.n is None or args.gamma is None:
                raise BadParams("hard needs --n and --gamma")
            g, parts = generators.hard_tripartite(args.n, args.gamma, args.seed)
            desc = f"hard n={args.n} gamma={args.gamma} seed={args.seed}"
    except BadParams as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER
    comment = desc
    if parts is not None:
        comment += "\nparts " + " | ".join(" ".join(map(str, p.sorted())) for p in parts)
    if args.out in (None, "-"):
        io.write_graph(g, sys.stdout, comment)
    else:
        io.write_graph(g, args.out, comment)
        if args.parts_out and parts is not None:
            Path(args.parts_out).write_text(io.format_partition(parts))
    return EXIT_OK


def cmd_find(args) -> int:
    g = _load_graph(args.graph)
    pattern = Pattern(args.pattern)
    report, code, trace = find_report(
        g,
        pattern,
        gamma=args.gamma,
        seed=args.seed,
        strategy=args.strategy,
        mode=args.mode,
        source={"path": os.path.basename(args.graph)},
    )
    if args.trace and trace is not None:
        Path(args.trace).write_text(dumps(trace.to_dict()) + "\n")
    out = dumps(report) + "\n"
    if args.out:
        Path(args.out).write_text(out)
    else:
        sys.stdout.write(out)
    if code != EXIT_OK:
        log.warning("find finished with status %s", report.get("status"))
    return code


def cmd_verify(args) -> int:
    g = _load_graph(args.graph)
    try:
        report = json.loads(Path(args.report).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read report: {exc}") from exc
    ok, msg = verify_report(g, report)
    if ok and "vacuous" in msg:
        log.warning(msg)
    print(json.dumps({"verified": ok, "message": msg}, sort_keys=True))
    return EXIT_OK if ok else EXIT_OTHER


def _sweep_cell(job) -> list:
    cell, seed, kind, n, param, pattern_spec, strategy, mode = job
    if kind == "gnp":
        g = generators.gnp(n, param, seed)
    elif kind == "hard":
        g, _ = generators.hard_tripartite(n, param, seed)
    else:
        k = 3
        g, _ = generators.multipartite([n // k + (1 if i < n % k else 0) for i in range(k)], param, seed)
    pattern = Pattern(pattern_spec)
    report, _, _ = find_report(g, pattern, seed=seed, strategy=strategy, mode=mode)
    gamma = report["gamma"]["measured_labeled"]
    if report["status"] == "verified":
        tr = report["trace"]
        return [cell, seed, kind, n, f"{float(gamma):.6g}", report["pipeline"], report["order"], report["s"] if report["s"] is not None else "", report["kst_t"] if report["kst_t"] is not None else "", tr["steps_completed"], tr["advisory_failures"]]
    return [cell, seed, kind, n, f"{float(gamma):.6g}", report["error"]["type"] if "error" in report else "unverified", 0, "", "", 0, 0]


def sweep_rows(kind: str, ns: Sequence[int], params: Sequence, seeds: Sequence[int], pattern: str = "k3", strategy: str = "pruning", mode: str = "auto", jobs: int = 1) -> list[list]:
    """One row per (cell, seed); cells enumerate ``ns x params`` in order."""
    if not ns or not params or not seeds:
        raise BadParams("sweep grid and seed list must be nonempty")
    if kind not in ("gnp", "multipartite", "hard"):
        raise BadParams(f"unknown generator kind {kind!r}")
    cells = [(n, q) for n in ns for q in params]
    work = [(ci, s, kind, n, q, pattern, strategy, mode) for ci, (n, q) in enumerate(cells) for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_sweep_cell, work))
    else:
        rows = [_sweep_cell(w) for w in work]
    rows.sort(key=lambda r: (r[0], r[1]))
    return rows


def cmd_sweep(args) -> int:
    params = args.gamma_list if args.kind == "hard" else args.p_list
    try:
        rows = sweep_rows(args.kind, args.n_list, params or [], list(range(args.seed, args.seed + args.seeds)), args.pattern, args.strategy, args.mode, args.jobs)
    except BadParams as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER
    handle = sys.stdout if args.out in (None, "-") else open(args.out, "w", newline="")
    try:
        w = csv.writer(handle, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        w.writerows(rows)
    finally:
        if handle is not sys.stdout:
            handle.close()
    return EXIT_OK


def cmd_oracle(args) -> int:
    g = _load_graph(args.graph)
    pattern = Pattern(args.pattern)
    try:
        t, classes = oracle.max_blowup_bruteforce(g, pattern.graph)
    except BlowupError as exc:
        print(dumps({"status": "failed", "error": {"type": type(exc).__name__, "message": str(exc)}}))
        return EXIT_OTHER
    cert = BlowupCertificate(pattern.graph, classes, t)
    print(dumps({"schema": SCHEMA, "status": "exact", "order": t, "certificate": cert.to_dict()}))
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the parse-error code, keeping 2 for missing copies."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARSE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="blowup", description="Find and certify blowups H[t] in dense graphs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def pipeline_flags(p):
        p.add_argument("--pattern", default="k3", help="k3, kclique:<h>, or an edge-list file for H")
        p.add_argument("--strategy", choices=["pruning", "regularity"], default="pruning")
        p.add_argument("--mode", choices=["exact", "heuristic", "auto"], default="auto")
        p.add_argument("--seed", type=int, default=0)

    g = sub.add_parser("gen", help="write a random instance as an edge list")
    g.add_argument("kind", choices=["gnp", "multipartite", "hard"])
    g.add_argument("--n", type=int, help="vertex count (gnp, hard)")
    g.add_argument("--p", type=_fraction_arg, help="edge probability, e.g. 0.5 or 1/2 (gnp, multipartite)")
    g.add_argument("--sizes", type=_int_list, help="comma-separated part sizes (multipartite)")
    g.add_argument("--gamma", type=_fraction_arg, help="target triangle parameter (hard)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", help="output path (default stdout)")
    g.add_argument("--parts-out", help="also write the generator's partition here")
    g.set_defaults(func=cmd_gen)

    f = sub.add_parser("find", help="find a verified blowup and print a JSON report")
    f.add_argument("graph")
    pipeline_flags(f)
    f.add_argument("--gamma", type=_fraction_arg, help="labeled copy density to assume (default: measured)")
    f.add_argument("--trace", help="write the full run trace as JSON here")
    f.add_argument("--out", help="write the report here instead of stdout")
    f.set_defaults(func=cmd_find)

    v = sub.add_parser("verify", help="check a report's certificate against a graph")
    v.add_argument("graph")
    v.add_argument("report")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sweep", help="run the pipeline over a generator grid and write CSV")
    s.add_argument("kind", choices=["gnp", "multipartite", "hard"])
    s.add_argument("--n", dest="n_list", type=_int_list, required=True, help="comma-separated vertex counts")
    s.add_argument("--p", dest="p_list", type=_fraction_list, help="comma-separated edge probabilities")
    s.add_argument("--gamma", dest="gamma_list", type=_fraction_list, help="comma-separated gammas (hard)")
    s.add_argument("--seeds", type=int, default=1, help="number of seeds per cell, starting at --seed")
    s.add_argument("--jobs", type=int, default=1, help="worker processes")
    s.add_argument("--out", help="CSV path (default stdout)")
    pipeline_flags(s)
    s.set_defaults(func=cmd_sweep)

    o = sub.add_parser("oracle", help="exact maximum blowup order by exhaustive search")
    o.add_argument("graph")
    o.add_argument("--pattern", default="k3", help="k3, kclique:<h>, or an edge-list file for H")
    o.set_defaults(func=cmd_oracle)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except BlowupError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
