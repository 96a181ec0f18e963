import csv
import math
import shutil
from pathlib import Path

import pytest

from subcb.cli import CSV_HEADER, main

REPO = Path(__file__).parent.parent
MINIMAL = REPO / "configs" / "minimal.yaml"


def run(argv, capsys=None):
    code = main([str(a) for a in argv])
    return code


@pytest.fixture
def minimal(tmp_path):
    dst = tmp_path / "minimal.yaml"
    shutil.copy(MINIMAL, dst)
    return dst


class TestRun:
    def test_smoke(self, minimal, tmp_path):
        assert run(["run", minimal, "--output", tmp_path / "out"]) == 0
        rows = (tmp_path / "out" / "minimal_seed0.csv").read_text().splitlines()
        assert rows[0] == CSV_HEADER
        assert len(rows) == 101
        last = next(csv.DictReader([rows[0], rows[-1]]))
        assert math.isfinite(float(last["cum_regret_half"]))
        assert float(last["cum_regret_half"]) <= 0.0  # truth in class, c = 1/2
        assert (tmp_path / "out" / "minimal_summary.csv").exists()

    def test_sets_serialized_sorted(self, minimal, tmp_path):
        run(["run", minimal, "--output", tmp_path])
        for row in csv.DictReader(open(tmp_path / "minimal_seed0.csv")):
            ids = [int(a) for a in row["chosen"].split("-")]
            assert ids == sorted(ids) and len(ids) == 2

    def test_deterministic(self, minimal, tmp_path):
        run(["run", minimal, "--output", tmp_path / "a"])
        run(["run", minimal, "--output", tmp_path / "b"])
        a = (tmp_path / "a" / "minimal_seed0.csv").read_bytes()
        assert a == (tmp_path / "b" / "minimal_seed0.csv").read_bytes()

    def test_workers_do_not_change_output(self, tmp_path):
        cfg = tmp_path / "two.yaml"
        cfg.write_text(MINIMAL.read_text().replace("seeds: [0]", "seeds: [3, 4]"))
        run(["run", cfg, "--output", tmp_path / "a", "--workers", "1"])
        run(["run", cfg, "--output", tmp_path / "b", "--workers", "2"])
        for s in (3, 4):
            name = f"minimal_seed{s}.csv"
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_summary_checkpoints(self, minimal, tmp_path):
        run(["run", minimal, "--output", tmp_path])
        rows = list(csv.DictReader(open(tmp_path / "minimal_summary.csv")))
        assert [(r["regret"], r["t"]) for r in rows] == [
            ("half", "10"), ("half", "50"), ("half", "100"),
            ("1me", "10"), ("1me", "50"), ("1me", "100")]

    def test_bad_config_exit(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("horizon: 10\nground_size: 3\nrank: 5\nmodel: {kind: modular, weights: [1, 1, 1]}\n")
        assert run(["run", bad]) == 2
        assert "line 3" in capsys.readouterr().err

    @pytest.mark.parametrize("algorithm", ["epsgreedy", "uniform-baseline",
                                           "oracle-truth-baseline"])
    def test_other_algorithms(self, tmp_path, algorithm):
        cfg = tmp_path / "alg.yaml"
        cfg.write_text(MINIMAL.read_text() + f"algorithm: {algorithm}\n")
        assert run(["run", cfg, "--output", tmp_path]) == 0
        rows = (tmp_path / "minimal_seed0.csv").read_text().splitlines()
        assert len(rows) == 101

    def test_greedy_fallback_warns(self, tmp_path, caplog):
        cfg = tmp_path / "big.yaml"
        cfg.write_text(MINIMAL.read_text() + "budget: 2\n")
        with caplog.at_level("WARNING", logger="subcb"):
            assert run(["run", cfg, "--output", tmp_path]) == 0
        assert "lazy greedy" in caplog.text
        row = next(csv.DictReader(open(tmp_path / "minimal_seed0.csv")))
        assert row["benchmark_method"] == "greedy-(1-1/e)"


class TestOtherCommands:
    def test_weights(self, capsys):
        assert run(["weights", "--kmax", "3"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "s,t,w,tau,tau_bound_ok"
        w11 = float(lines[1].split(",")[2])
        assert w11 == pytest.approx(1.0, abs=1e-12)
        assert all(l.endswith("true") for l in lines[1:])

    def test_weights_to_file(self, tmp_path):
        assert run(["weights", "--kmax", "2", "--convention", "literal",
                    "--out", tmp_path / "w.csv"]) == 0
        rows = list(csv.DictReader(open(tmp_path / "w.csv")))
        assert float(rows[1]["w"]) == pytest.approx((3 - math.e) / (math.e - 1), abs=1e-10)

    def test_verify_single_battery(self, capsys):
        assert run(["verify", "--battery", "weights"]) == 0
        assert capsys.readouterr().out.startswith("PASS")

    def test_verify_unknown(self):
        assert run(["verify", "--battery", "nope"]) == 2

    def test_bench_oracle(self, tmp_path, capsys):
        cfg = tmp_path / "b.yaml"
        cfg.write_text(MINIMAL.read_text() + "bench: {horizons: [50, 200]}\n")
        assert run(["bench-oracle", cfg, "--output", tmp_path]) == 0
        rows = list(csv.DictReader(open(tmp_path / "minimal_oracle_bench.csv")))
        assert [int(r["n"]) for r in rows] == [50, 200]
        assert "median ratio" in capsys.readouterr().out
