import csv
import io as stdio
import json
import math

import pytest

from blowup import cli, generators, io
from blowup.errors import BadParams, ParseError
from blowup.graphcore import Graph, bipartite_density


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestIO:
    def test_roundtrip(self):
        g = Graph.from_edges(5, [(0, 1), (3, 4), (1, 4)])
        assert io.parse_edge_list(io.format_edge_list(g, "hello")).adj == g.adj

    def test_comments_and_blank_lines(self):
        g = io.parse_edge_list("# c\n\nn 3\n# more\n0 1\n\n1 2\n")
        assert g.edge_count() == 2

    @pytest.mark.parametrize(
        "text",
        ["", "0 1\n", "n x\n", "n 2\n0 5\n", "n 2\n0\n", "n 2\n1 1\n", "n 2\na b\n", "n -1\n"],
    )
    def test_errors(self, text):
        with pytest.raises(ParseError):
            io.parse_edge_list(text)

    def test_partition(self):
        parts = io.parse_partition("0 1 2\n# x\n3 4\n", n=5)
        assert [p.sorted() for p in parts] == [[0, 1, 2], [3, 4]]
        assert io.parse_partition(io.format_partition(parts)) == parts
        with pytest.raises(ParseError):
            io.parse_partition("0 1\n1 2\n")
        with pytest.raises(ParseError):
            io.parse_partition("0 9\n", n=5)


class TestGenerators:
    def test_gnp_extremes(self):
        assert generators.gnp(100, 0, 1).edge_count() == 0
        assert generators.gnp(100, 1, 1).edge_count() == math.comb(100, 2)

    def test_bad_p(self):
        with pytest.raises(BadParams):
            generators.gnp(10, 1.5)

    def test_deterministic(self):
        assert generators.gnp(50, 0.3, 7).adj == generators.gnp(50, 0.3, 7).adj

    def test_multipartite_has_no_inner_edges(self):
        g, parts = generators.multipartite([5, 6, 7], 1, 3)
        assert g.edge_count() == 5 * 6 + 5 * 7 + 6 * 7
        for p in parts:
            assert all(g.adj[v] & p.mask == 0 for v in p)

    def test_hard_densities(self):
        g, (v1, v2, v3) = generators.hard_tripartite(300, "1/16", 11)
        for (x, y), target in (((v1, v2), 0.5), ((v1, v3), 0.25), ((v2, v3), 0.25)):
            size = len(x) * len(y)
            sigma = math.sqrt(target * (1 - target) / size)
            assert abs(float(bipartite_density(g, x, y)) - target) <= 3 * sigma
        assert all(g.adj[v] & v1.mask == 0 for v in v1)


def write(path, g):
    io.write_graph(g, path)
    return str(path)


class TestFind:
    def test_complete_tripartite(self, workdir, capsys):
        path = write(workdir / "k.txt", Graph.complete_multipartite([6, 6, 6]))
        code, out, _ = run(["find", path, "--pattern", "k3"], capsys)
        rep = json.loads(out)
        assert code == 0 and rep["status"] == "verified" and rep["order"] >= 1
        assert rep["schema"] == 1
        assert rep["gamma"]["labeled"] == "2/9" and rep["gamma"]["unlabeled"] == "1/27"

    def test_triangle_free(self, workdir, capsys):
        path = write(workdir / "c.txt", Graph.cycle(6))
        code, out, _ = run(["find", path], capsys)
        assert code == 2 and json.loads(out)["error"]["type"] == "NotEnoughCliques"

    def test_parse_error(self, workdir, capsys):
        (workdir / "bad.txt").write_text("n 3\n0 7\n")
        code, _, err = run(["find", str(workdir / "bad.txt")], capsys)
        assert code == 1 and "parse error" in err

    def test_usage_error_is_exit_1(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["find"])
        assert exc.value.code == 1

    def test_determinism(self, workdir, capsys):
        g = generators.gnp(60, 0.5, 2)
        path = write(workdir / "g.txt", g)
        outs = []
        for _ in range(2):
            code, out, _ = run(["find", path, "--seed", "4"], capsys)
            rep = json.loads(out)
            rep.pop("wall_time")
            outs.append(json.dumps(rep, sort_keys=True))
        assert outs[0] == outs[1]

    def test_kclique_and_pattern_file(self, workdir, capsys):
        path = write(workdir / "k.txt", Graph.complete_multipartite([5, 5, 5, 5]))
        code, out, _ = run(["find", path, "--pattern", "kclique:4"], capsys)
        assert code == 0 and json.loads(out)["order"] >= 1
        hpath = write(workdir / "p3.txt", Graph.path(3))
        code, out, _ = run(["find", path, "--pattern", hpath], capsys)
        assert code == 0 and json.loads(out)["status"] == "verified"

    def test_trace_file(self, workdir, capsys):
        path = write(workdir / "k.txt", Graph.complete_multipartite([6, 6, 6]))
        code, _, _ = run(["find", path, "--trace", str(workdir / "t.json")], capsys)
        trace = json.loads((workdir / "t.json").read_text())
        assert code == 0 and trace["kind"] == "triangle"


class TestVerify:
    def make(self, workdir, capsys):
        g = Graph.complete_multipartite([6, 6, 6])
        path = write(workdir / "k.txt", g)
        code, out, _ = run(["find", path], capsys)
        (workdir / "r.json").write_text(out)
        return g, path, json.loads(out)

    def test_accepts_own_report(self, workdir, capsys):
        _, path, _ = self.make(workdir, capsys)
        code, out, _ = run(["verify", path, str(workdir / "r.json")], capsys)
        assert code == 0 and json.loads(out)["verified"]

    def test_tampered_host(self, workdir, capsys):
        g, path, rep = self.make(workdir, capsys)
        cls = rep["certificate"]["classes"]
        g2 = g.remove_edges([(cls[0][0], cls[1][0])])
        path2 = write(workdir / "k2.txt", g2)
        code, _, _ = run(["verify", path2, str(workdir / "r.json")], capsys)
        assert code != 0

    def test_empty_certificate(self, workdir, capsys, caplog):
        g = Graph.complete(4)
        path = write(workdir / "k.txt", g)
        rep = {"certificate": {"pattern_n": 3, "pattern_edges": [[0, 1], [0, 2], [1, 2]], "t": 0, "classes": [[], [], []]}}
        (workdir / "e.json").write_text(json.dumps(rep))
        code, out, _ = run(["verify", path, str(workdir / "e.json")], capsys)
        assert code == 0 and "vacuous" in out
        assert any("vacuous" in r.getMessage() and r.levelname == "WARNING" for r in caplog.records)

    def test_bad_report(self, workdir, capsys):
        path = write(workdir / "k.txt", Graph.complete(4))
        (workdir / "bad.json").write_text("{not json")
        code, _, _ = run(["verify", path, str(workdir / "bad.json")], capsys)
        assert code == 1


class TestGenSweepOracle:
    def test_gen_files(self, workdir, capsys):
        code, _, _ = run(["gen", "gnp", "--n", "100", "--p", "1", "--out", "g.txt"], capsys)
        assert code == 0 and io.read_graph("g.txt").edge_count() == 4950
        code, _, _ = run(["gen", "hard", "--n", "30", "--gamma", "1/16", "--out", "h.txt", "--parts-out", "h.parts"], capsys)
        assert code == 0 and len(io.read_partition("h.parts")) == 3
        code, _, _ = run(["gen", "gnp", "--n", "10", "--p", "2"], capsys)
        assert code == 3

    def test_sweep_header_and_rows(self, workdir, capsys):
        code, out, _ = run(["sweep", "gnp", "--n", "40", "--p", "1/2", "--seeds", "1"], capsys)
        rows = list(csv.reader(stdio.StringIO(out)))
        assert code == 0
        assert rows[0] == cli.SWEEP_HEADER
        assert rows[0] == "cell,seed,kind,n,gamma,pipeline,order_t,s,kst_t,steps_completed,advisory_failures".split(",")
        assert len(rows) == 2

    def test_sweep_parallel_matches_serial(self):
        a = cli.sweep_rows("gnp", [30, 40], ["1/2"], [0, 1], jobs=1)
        b = cli.sweep_rows("gnp", [30, 40], ["1/2"], [0, 1], jobs=2)
        assert a == b
        assert [(r[0], r[1]) for r in a] == [(0, 0), (0, 1), (1, 0), (1, 1)]

    def test_sweep_empty_grid(self):
        with pytest.raises(BadParams):
            cli.sweep_rows("gnp", [], ["1/2"], [0])

    def test_oracle(self, workdir, capsys):
        path = write(workdir / "k.txt", Graph.complete_multipartite([3, 3, 3]))
        code, out, _ = run(["oracle", path], capsys)
        assert code == 0 and json.loads(out)["order"] == 3
