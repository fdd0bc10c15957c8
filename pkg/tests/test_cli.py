import csv
import json
import math
import struct
import subprocess
import sys

import numpy as np
import pytest

from trajsim.cli import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """gen -> preprocess -> gt -> train, shared by the read-only checks."""
    d = tmp_path_factory.mktemp("cli")
    assert run("gen", "--count", 40, "--len-min", 5, "--len-max", 25, "--seed", 1, "--out", d / "raw.csv") == 0
    assert run("preprocess", "--in", d / "raw.csv", "--out", d / "data.csv", "--min-len", 8,
               "--max-len", 25, "--normalize") == 0
    assert run("gt", "--in", d / "data.csv", "--measure", "dtw", "--alpha", "auto", "--out", d / "dtw.gtm") == 0
    assert run("train", "--data", d / "data.csv", "--gt", d / "dtw.gtm", "--d", 16, "--heads", 4,
               "--max-len", 25, "--pairs", 3, "--epochs", 2, "--seed", 5, "--quiet",
               "--out-ckpt", d / "model.ckpt") == 0
    return d


def n_lines(path):
    return len(path.read_text().splitlines())


class TestGen:
    def test_identical_reruns(self, tmp_path):
        for name in ("a.csv", "b.csv"):
            assert run("gen", "--count", 50, "--seed", 1, "--out", tmp_path / name) == EXIT_OK
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert n_lines(tmp_path / "a.csv") == 50

    def test_manifest(self, tmp_path):
        out = tmp_path / "g.jsonl"
        assert run("gen", "--count", 3, "--seed", 9, "--out", out, "--format", "jsonl") == 0
        man = json.loads((tmp_path / "g.jsonl.manifest.json").read_text())
        assert man["command"] == "gen" and man["seeds"] == {"seed": 9}
        assert man["outputs"] == [str(out)] and man["started"] <= man["finished"]

    def test_missing_out(self, capsys):
        assert run("gen", "--count", 5, "--seed", 1) == EXIT_USAGE

    def test_zero_count(self, tmp_path):
        assert run("gen", "--count", 0, "--seed", 1, "--out", tmp_path / "x.csv") == EXIT_USAGE

    def test_no_command(self):
        assert run() == EXIT_USAGE


class TestPreprocess:
    def test_counts(self, workspace, capsys):
        out = workspace / "pp.csv"
        assert run("preprocess", "--in", workspace / "raw.csv", "--out", out, "--min-len", 10, "--max-len", 20) == 0
        lengths = [len(line.split(";")) - 1 for line in (workspace / "raw.csv").read_text().splitlines()]
        kept = sum(10 <= n <= 20 for n in lengths)
        assert f"retained {kept} of 40" in capsys.readouterr().out
        assert n_lines(out) == kept

    def test_empty_result(self, workspace, capsys):
        out = workspace / "none.csv"
        assert run("preprocess", "--in", workspace / "raw.csv", "--out", out, "--min-len", 100, "--max-len", 200) == 0
        assert "warning" in capsys.readouterr().err
        assert out.read_text() == ""

    def test_bad_bbox(self, workspace):
        assert run("preprocess", "--in", workspace / "raw.csv", "--out", workspace / "b.csv",
                   "--bbox", "1,0,0,1") == EXIT_USAGE

    def test_parse_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("0;1.0,2.0\n1;abc,2.0\n")
        assert run("preprocess", "--in", bad, "--out", tmp_path / "o.csv") == EXIT_DATA
        assert "bad.csv:2:" in capsys.readouterr().err


class TestGroundTruth:
    def test_auto_alpha_in_header(self, workspace):
        for measure, alpha in (("dtw", 16.0), ("hausdorff", 8.0), ("frechet", 8.0)):
            out = workspace / f"{measure}.auto.gtm"
            assert run("gt", "--in", workspace / "data.csv", "--measure", measure, "--out", out) == 0
            assert struct.unpack_from("<d", out.read_bytes(), 12)[0] == alpha

    def test_workers_byte_identical(self, workspace):
        paths = []
        for w in (1, 8):
            out = workspace / f"w{w}.gtm"
            assert run("gt", "--in", workspace / "data.csv", "--measure", "frechet", "--workers", w, "--out", out) == 0
            paths.append(out)
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_unknown_measure(self, workspace):
        assert run("gt", "--in", workspace / "data.csv", "--measure", "lcss", "--out", workspace / "x.gtm") == EXIT_USAGE

    def test_size_cap(self, workspace, capsys):
        assert run("gt", "--in", workspace / "data.csv", "--measure", "dtw", "--max-n", 5,
                   "--out", workspace / "x.gtm") == EXIT_USAGE
        assert "refusing" in capsys.readouterr().err

    def test_missing_input(self, tmp_path):
        assert run("gt", "--in", tmp_path / "nope.csv", "--measure", "dtw", "--out", tmp_path / "x.gtm") == EXIT_DATA


class TestTrainEval:
    def test_outputs(self, workspace):
        hist = (workspace / "model.ckpt.history.csv").read_text().splitlines()
        assert hist[0] == "epoch,train_loss,val_hr10" and len(hist) == 3
        split = json.loads((workspace / "model.ckpt.split.json").read_text())
        assert {"train_ids", "val_ids", "test_ids"} <= split.keys()

    def test_same_seed_same_checkpoint(self, workspace):
        assert run("train", "--data", workspace / "data.csv", "--gt", workspace / "dtw.gtm", "--d", 16,
                   "--heads", 4, "--max-len", 25, "--pairs", 3, "--epochs", 2, "--seed", 5, "--quiet",
                   "--out-ckpt", workspace / "again.ckpt") == 0
        assert (workspace / "again.ckpt").read_bytes() == (workspace / "model.ckpt").read_bytes()
        assert ((workspace / "again.ckpt.history.csv").read_bytes()
                == (workspace / "model.ckpt.history.csv").read_bytes())

    def test_tailored_resolves_from_matrix(self, workspace):
        from trajsim.encoder import load_checkpoint

        cfg = load_checkpoint(workspace / "model.ckpt").config
        assert cfg.measure == "dtw" and cfg.resolved_sim == "cosine"

    def test_max_len_too_small(self, workspace):
        assert run("train", "--data", workspace / "data.csv", "--gt", workspace / "dtw.gtm", "--d", 16,
                   "--heads", 4, "--max-len", 10, "--epochs", 1, "--out-ckpt", workspace / "x.ckpt") == EXIT_DATA

    def test_numeric_failure(self, workspace, capsys):
        assert run("train", "--data", workspace / "data.csv", "--gt", workspace / "dtw.gtm", "--d", 16,
                   "--heads", 4, "--max-len", 25, "--pairs", 3, "--epochs", 1, "--lr", "1e308", "--quiet",
                   "--out-ckpt", workspace / "nan.ckpt") == EXIT_NUMERIC
        assert "(step 1)" in capsys.readouterr().err

    def test_eval_report(self, workspace):
        outs = []
        for name in ("r1.json", "r2.json"):
            assert run("eval", "--ckpt", workspace / "model.ckpt", "--data", workspace / "data.csv",
                       "--gt", workspace / "dtw.gtm", "--k", "1,5,10", "--t", 5, "--inv-k", "5,10",
                       "--out-report", workspace / name) == 0
            outs.append((workspace / name).read_bytes())
        assert outs[0] == outs[1]
        rep = json.loads(outs[0])
        assert set(rep["hr"]) == {"HR@1", "HR@5", "HR@10"} and set(rep["recall"]) == {"R5@10"}
        assert set(rep["inversions"]) == {"INV@5", "INV@10"}
        assert rep["sim_fn"] == "cosine" and rep["approx_mse"] >= 0 and rep["avg_dim_std"] >= 0

    def test_eval_k_too_large(self, workspace):
        assert run("eval", "--ckpt", workspace / "model.ckpt", "--data", workspace / "data.csv",
                   "--gt", workspace / "dtw.gtm", "--out-report", workspace / "big.json") == EXIT_USAGE

    def test_eval_mismatch(self, workspace):
        gtm = workspace / "mismatch.gtm"
        assert run("gt", "--in", workspace / "data.csv", "--measure", "hausdorff", "--out", gtm) == 0
        assert run("eval", "--ckpt", workspace / "model.ckpt", "--data", workspace / "data.csv",
                   "--gt", gtm, "--k", "1", "--inv-k", "2", "--out-report", workspace / "m.json") == EXIT_DATA


class TestBench:
    def test_csv(self, workspace):
        out = workspace / "bench.csv"
        assert run("bench", "--data", workspace / "data.csv", "--methods", "brute,nonlearning,learned",
                   "--sizes", "10,20", "--k", 3, "--queries", 2, "--ckpt", workspace / "model.ckpt",
                   "--out", out) == 0
        rows = list(csv.reader(out.open()))
        assert rows[0] == ["method", "n", "k", "mean_ms", "std_ms"] and len(rows) == 7
        assert {r[0] for r in rows[1:]} == {"brute_exact", "non_learning", "learned"}

    def test_learned_without_checkpoint(self, workspace):
        assert run("bench", "--data", workspace / "data.csv", "--methods", "learned", "--sizes", "10",
                   "--out", workspace / "b.csv") == EXIT_USAGE

    def test_size_beyond_dataset(self, workspace):
        assert run("bench", "--data", workspace / "data.csv", "--methods", "brute", "--sizes", "1k",
                   "--out", workspace / "b.csv") == EXIT_USAGE


class TestAnalyze:
    def test_ratio(self, workspace):
        out = workspace / "ratio.csv"
        assert run("analyze", "--mode", "ratio", "--d-min", 2, "--d-max", 8, "--out", out) == 0
        rows = {int(r["d"]): float(r["log10_R"]) for r in csv.DictReader(out.open())}
        assert rows[3] == pytest.approx(math.log10(math.pi / 6), abs=1e-12)
        assert rows[3] == pytest.approx(-0.2810, abs=1e-4)

    def test_histogram(self, workspace):
        out = workspace / "hist.csv"
        assert run("analyze", "--mode", "histogram", "--gt", workspace / "dtw.gtm", "--bins", 10, "--out", out) == 0
        rows = list(csv.DictReader(out.open()))
        n = json.loads((workspace / "model.ckpt.split.json").read_text())
        total = sum(len(v) for k, v in n.items() if k.endswith("_ids"))
        assert len(rows) == 10 and sum(int(r["count"]) for r in rows) == total * (total - 1) // 2

    def test_attention(self, workspace):
        out = workspace / "att.csv"
        assert run("analyze", "--mode", "attention", "--ckpt", workspace / "model.ckpt",
                   "--data", workspace / "data.csv", "--id", 3, "--out", out) == 0
        w = np.array([float(r["weight"]) for r in csv.DictReader(out.open())])
        assert abs(w.sum() - 1) <= 1e-9 and (w >= 0).all()

    def test_concentration(self, workspace, capsys):
        out = workspace / "conc.csv"
        assert run("analyze", "--mode", "concentration", "--ckpt", workspace / "model.ckpt",
                   "--data", workspace / "data.csv", "--out", out) == 0
        assert n_lines(out) == 17 and "avg_std=" in capsys.readouterr().out

    @pytest.mark.parametrize("mode", ["histogram", "attention", "concentration"])
    def test_missing_inputs(self, workspace, mode):
        assert run("analyze", "--mode", mode, "--out", workspace / "x.csv") == EXIT_USAGE


def test_console_script_help():
    proc = subprocess.run([sys.executable, "-m", "trajsim.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "gen" in proc.stdout and "bench" in proc.stdout
