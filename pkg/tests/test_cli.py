import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from hiref import cli
from hiref.errors import UsageError
from hiref.io import write_points

GOLDEN = Path(__file__).parent / "golden"


def run(argv, capsys=None):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr() if capsys else None
    return code, out


def read_pairs(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], [(int(a), int(b)) for a, b in rows[1:]]


class TestSchedule:
    def test_synthetic_shape(self, capsys):
        code, out = run(["schedule", "--n", 1024, "--depth", 2, "--max-rank", 16,
                         "--max-base", 1024], capsys)
        assert code == 0
        data = json.loads(out.out)
        assert data["ranks"] == [2] and data["base"] == 512
        assert data["lrot_calls"] == 1

    def test_infeasible_exit_code(self, capsys):
        code, out = run(["schedule", "--n", 97, "--depth", 2, "--max-rank", 16,
                         "--max-base", 16], capsys)
        assert code == 3 and "infeasible" in out.err

    def test_trim(self, capsys):
        code, out = run(["schedule", "--n", 97, "--depth", 2, "--max-rank", 16,
                         "--max-base", 16, "--trim"], capsys)
        assert code == 0 and json.loads(out.out)["trimmed"] >= 1

    def test_argument_error(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["schedule", "--n", "x"])
        assert exc.value.code == 2


class TestAlign:
    def test_identity_on_separable_points(self, tmp_path):
        pts = [[0.0, 0.0], [0.1, 0.0], [10.0, 0.0], [10.1, 0.0]]
        src, tgt = tmp_path / "s.csv", tmp_path / "t.csv"
        write_points(src, pts)
        write_points(tgt, pts)
        out, metrics = tmp_path / "pairs.csv", tmp_path / "m.json"
        code, _ = run(["align", "--source", src, "--target", tgt, "--cost", "euclidean",
                       "--depth", 1, "--max-rank", 2, "--max-base", 2, "--out", out,
                       "--metrics", metrics])
        assert code == 0
        header, pairs = read_pairs(out)
        assert header == ["source_index", "target_index"]
        assert pairs == [(0, 0), (1, 1), (2, 2), (3, 3)]
        m = json.loads(metrics.read_text())
        assert set(m) == {"n", "schedule", "per_level", "final_cost", "trimmed"}
        assert m["final_cost"] == 0.0 and m["schedule"] == [2, 2]
        assert out.read_bytes().count(b"\r") == 0

    def test_gen_align_deterministic(self, tmp_path):
        src, tgt = tmp_path / "s.otpt", tmp_path / "t.otpt"
        assert run(["gen", "--dataset", "halfmoon_scurve", "--n", 300, "--seed", 4,
                    "--out-source", src, "--out-target", tgt])[0] == 0
        outputs = []
        for k in range(2):
            out = tmp_path / f"pairs{k}.csv"
            code, _ = run(["align", "--source", src, "--target", tgt, "--depth", 2,
                           "--max-rank", 8, "--max-base", 64, "--seed", 1, "--out", out,
                           "--trim"])
            assert code == 0
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]
        _, pairs = read_pairs(tmp_path / "pairs0.csv")
        # 300 = 2^2 * 3 * 5^2 fits the caps, so nothing is trimmed
        assert sorted(a for a, _ in pairs) == list(range(300))
        assert sorted(b for _, b in pairs) == list(range(300))

    def test_trimmed_pairs_are_injective(self, tmp_path):
        rng = np.random.default_rng(0)
        src, tgt = tmp_path / "s.csv", tmp_path / "t.csv"
        write_points(src, rng.random((101, 2)))
        write_points(tgt, rng.random((101, 2)))
        out, metrics = tmp_path / "pairs.csv", tmp_path / "m.json"
        code, _ = run(["align", "--source", src, "--target", tgt, "--depth", 2,
                       "--max-rank", 8, "--max-base", 16, "--out", out, "--metrics", metrics,
                       "--trim"])
        assert code == 0
        _, pairs = read_pairs(out)
        trimmed = json.loads(metrics.read_text())["trimmed"]
        assert len(pairs) == 101 - trimmed and trimmed >= 1
        assert len({a for a, _ in pairs}) == len({b for _, b in pairs}) == len(pairs)

    def test_size_mismatch(self, tmp_path, capsys):
        src, tgt = tmp_path / "s.csv", tmp_path / "t.csv"
        write_points(src, np.zeros((4, 2)))
        write_points(tgt, np.zeros((3, 2)))
        code, out = run(["align", "--source", src, "--target", tgt, "--out",
                         tmp_path / "p.csv"], capsys)
        assert code == 2 and "error" in out.err

    def test_missing_file(self, tmp_path, capsys):
        code, _ = run(["align", "--source", tmp_path / "nope.csv", "--target",
                       tmp_path / "nope.csv", "--out", tmp_path / "p.csv"], capsys)
        assert code == 2


class TestBench:
    def test_header_golden(self, tmp_path):
        out = tmp_path / "b.csv"
        code, _ = run(["bench", "--methods", "exact", "--sizes", 16, "--out", out])
        assert code == 0
        first = out.read_bytes().split(b"\n")[0] + b"\n"
        assert first == (GOLDEN / "bench_header.csv").read_bytes()

    def test_rows(self, tmp_path):
        out = tmp_path / "b.csv"
        code, _ = run(["bench", "--dataset", "maf_moons_rings", "--methods",
                       "hiref,sinkhorn,exact,minibatch:16", "--sizes", 64, "--seeds", "0,1",
                       "--costs", "euclidean,sqeuclidean", "--max-base", 16, "--out", out])
        assert code == 0
        with open(out, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 4 * 2 * 2
        for row in rows:
            assert float(row["cost"]) >= 0 and int(row["n"]) == 64
        exact = {(r["seed"], r["cost_tag"]): float(r["cost"]) for r in rows
                 if r["method"] == "exact"}
        for r in rows:
            assert float(r["cost"]) >= exact[(r["seed"], r["cost_tag"])] - 1e-9
            if r["method"] in ("hiref", "exact"):
                assert int(r["nonzeros"]) == 64
                assert math.isclose(float(r["entropy_shannon"]), math.log(64), abs_tol=1e-9)
            if r["method"] == "minibatch:16":
                assert int(r["nonzeros"]) > 64

    def test_skips_large_sizes(self, tmp_path, capsys):
        code, out = run(["bench", "--methods", "exact,sinkhorn", "--sizes", 64,
                         "--sinkhorn-limit", 32], capsys)
        assert code == 0
        lines = out.out.strip().split("\n")
        assert len(lines) == 2 and lines[1].startswith("exact,")

    def test_unknown_method(self, capsys):
        code, out = run(["bench", "--methods", "magic"], capsys)
        assert code == 2 and "unknown method" in out.err
        with pytest.raises(UsageError):
            cli.parse_methods("minibatch:x")

    def test_threads_env(self, monkeypatch):
        monkeypatch.setenv("OT_THREADS", "3")
        assert cli._threads(None) == 3
        assert cli._threads(2) == 2
        monkeypatch.setenv("OT_THREADS", "many")
        with pytest.raises(Exception):
            cli._threads(None)
