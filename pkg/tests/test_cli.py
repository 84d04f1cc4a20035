import json
import os
import subprocess
import sys

import numpy as np
import pytest

from loopeval import tensorio
from loopeval.audio_io import write_wav

from conftest import sine


def run_cli(*args, env_extra=None, cwd=None):
    env = dict(os.environ)
    env.update(env_extra or {})
    return subprocess.run(
        [sys.executable, "-m", "loopeval.cli", *map(str, args)],
        capture_output=True,
        text=True,
        env=env,
        cwd=cwd,
    )


def tree_bytes(root):
    return {
        p.relative_to(root).as_posix(): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


@pytest.fixture(scope="module")
def small_sets(tmp_path_factory):
    """Synthesized + prepared high/collapsed sets shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli_sets")
    r = run_cli("synth", "--out", root / "high_wav", "--count", "24", "--diversity", "high", "--seed", "5")
    assert r.returncode == 0, r.stderr
    r = run_cli("synth", "--out", root / "col_wav", "--count", "12", "--diversity", "collapsed", "--seed", "5")
    assert r.returncode == 0, r.stderr
    for name in ("high", "col"):
        r = run_cli(
            "prepare", "--input", root / f"{name}_wav", "--out", root / f"{name}_mel",
            "--grid-bpm", "120",
        )
        assert r.returncode == 0, r.stderr
    return root


class TestPrepareCommand:
    def test_missing_input_is_usage_error(self):
        r = run_cli("prepare", "--out", "/tmp/na")
        assert r.returncode == 2
        assert "usage" in (r.stderr + r.stdout).lower()

    def test_valid_corpus(self, tmp_path):
        src = tmp_path / "src"
        src.mkdir()
        write_wav(sine(440.0, 4.0), src / "a.wav")
        r = run_cli("prepare", "--input", src, "--out", tmp_path / "out", "--grid-bpm", "120")
        assert r.returncode == 0
        assert (tmp_path / "out" / "manifest.json").exists()
        assert "prepared 2 bars" in r.stdout

    def test_all_bars_dropped_exits_1(self, tmp_path):
        src = tmp_path / "src"
        src.mkdir()
        write_wav(sine(440.0, 21.0), src / "slow.wav")
        ann = tmp_path / "ann.csv"
        ann.write_text("path,downbeat_seconds\nslow.wav,0.0\nslow.wav,20.0\n")
        r = run_cli("prepare", "--input", src, "--out", tmp_path / "out", "--annotations", ann)
        assert r.returncode == 1
        assert "tempo-range" in r.stderr

    def test_unreadable_annotation_exits_1(self, tmp_path):
        src = tmp_path / "src"
        src.mkdir()
        write_wav(sine(440.0, 4.0), src / "a.wav")
        r = run_cli("prepare", "--input", src, "--out", tmp_path / "out",
                    "--annotations", tmp_path / "missing.csv")
        assert r.returncode == 1


class TestSynthCommand:
    def test_determinism_across_runs(self, tmp_path):
        for d in ("a", "b"):
            r = run_cli("synth", "--out", tmp_path / d, "--count", "10",
                        "--diversity", "collapsed", "--seed", "7")
            assert r.returncode == 0
        assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")


class TestEmbedCommand:
    def test_embeds_prepared_dir(self, small_sets, tmp_path):
        out = tmp_path / "emb.lten"
        r = run_cli("embed", "--input", small_sets / "high_mel", "--out", out)
        assert r.returncode == 0, r.stderr
        arr = tensorio.read_lten(out)
        assert arr.shape == (24, 160)


class TestTrainClassifierCommand:
    def test_separable_fixture_accuracy(self, tmp_path):
        rng = np.random.default_rng(0)
        a = rng.normal(scale=0.1, size=(20, 2)) + [5.0, 0.0]
        b = rng.normal(scale=0.1, size=(20, 2)) + [-5.0, 0.0]
        x = np.concatenate([a, b]).astype(np.float32)
        tensorio.write_lten(tmp_path / "x.lten", x)
        (tmp_path / "y.csv").write_text("label\n" + "\n".join(["0"] * 20 + ["1"] * 20) + "\n")
        r = run_cli(
            "train-classifier", "--features", tmp_path / "x.lten", "--labels", tmp_path / "y.csv",
            "--out", tmp_path / "model.json", "--epochs", "200", "--l2", "0",
        )
        assert r.returncode == 0, r.stderr
        assert "training accuracy: 1.0" in r.stdout
        assert (tmp_path / "model.json").exists()


class TestEvalCommand:
    def test_same_set_zeros(self, small_sets, tmp_path):
        report = tmp_path / "rep.json"
        r = run_cli(
            "eval", "--real", small_sets / "high_mel", "--fake", small_sets / "high_mel",
            "--metrics", "fad,ndb,jsd", "--k", "5", "--seed", "3", "--report", report,
        )
        assert r.returncode == 0, r.stderr
        doc = json.loads(report.read_text())
        assert doc["fad"] == 0.0
        assert doc["ndb"] == 0
        assert doc["jsd"] == 0.0
        assert doc["parameters"]["k"] == 5
        assert doc["toolkit_version"]

    def test_collapsed_scores_worse_than_same_set(self, small_sets, tmp_path):
        report = tmp_path / "rep2.json"
        r = run_cli(
            "eval", "--real", small_sets / "high_mel", "--fake", small_sets / "col_mel",
            "--metrics", "fad,ndb,jsd", "--k", "5", "--seed", "3", "--report", report,
        )
        assert r.returncode == 0, r.stderr
        doc = json.loads(report.read_text())
        assert doc["ndb_over_k"] > 0.0
        assert doc["jsd"] > 0.0
        assert doc["fad"] > 0.0

    def test_is_requires_posterior_source(self, small_sets):
        r = run_cli("eval", "--fake", small_sets / "high_mel", "--metrics", "is")
        assert r.returncode == 2
        assert "posterior source" in r.stderr

    def test_is_from_posterior_file(self, tmp_path):
        rng = np.random.default_rng(1)
        raw = rng.dirichlet(np.ones(4), size=30).astype(np.float32)
        tensorio.write_lten(tmp_path / "p.lten", raw)
        report = tmp_path / "is.json"
        r = run_cli(
            "eval", "--metrics", "is", "--posteriors", tmp_path / "p.lten",
            "--splits", "3", "--seed", "2", "--report", report,
        )
        assert r.returncode == 0, r.stderr
        doc = json.loads(report.read_text())
        assert 1.0 <= doc["is_mean"] <= 4.0
        assert doc["parameters"]["splits"] == 3
        assert len(doc["parameters"]["is_split_scores"]) == 3

    def test_external_embeddings_override(self, tmp_path):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(40, 8)).astype(np.float32)
        tensorio.write_lten(tmp_path / "a.lten", a)
        tensorio.write_lten(tmp_path / "b.lten", a)  # identical
        report = tmp_path / "fad.json"
        r = run_cli(
            "eval", "--metrics", "fad",
            "--embeddings", f"{tmp_path}/a.lten,{tmp_path}/b.lten", "--report", report,
        )
        assert r.returncode == 0, r.stderr
        assert json.loads(report.read_text())["fad"] == 0.0

    def test_lten_matrix_sets(self, tmp_path):
        rng = np.random.default_rng(3)
        real = rng.normal(size=(60, 6)).astype(np.float32)
        tensorio.write_lten(tmp_path / "real.lten", real)
        tensorio.write_lten(tmp_path / "fake.lten", real)
        report = tmp_path / "m.json"
        r = run_cli(
            "eval", "--real", tmp_path / "real.lten", "--fake", tmp_path / "fake.lten",
            "--metrics", "fad,ndb,jsd", "--k", "4", "--report", report,
        )
        assert r.returncode == 0, r.stderr
        doc = json.loads(report.read_text())
        assert doc["fad"] == 0.0 and doc["ndb"] == 0 and doc["jsd"] == 0.0

    def test_unknown_metric_rejected(self, small_sets):
        r = run_cli("eval", "--real", small_sets / "high_mel", "--fake",
                    small_sets / "high_mel", "--metrics", "fid")
        assert r.returncode == 2

    def test_report_reproducible_with_pinned_epoch(self, small_sets, tmp_path):
        env = {"SOURCE_DATE_EPOCH": "1700000000"}
        report = tmp_path / "rep.json"
        reports = []
        for _ in range(2):
            r = run_cli(
                "eval", "--real", small_sets / "high_mel", "--fake", small_sets / "col_mel",
                "--metrics", "fad,ndb,jsd", "--k", "5", "--seed", "3",
                "--report", report, env_extra=env,
            )
            assert r.returncode == 0, r.stderr
            reports.append(report.read_bytes())
        assert reports[0] == reports[1]


class TestReportReproducibility:
    def test_recorded_command_regenerates_identical_numbers(self, tmp_path):
        rng = np.random.default_rng(9)
        real = rng.normal(size=(80, 7)).astype(np.float32)
        fake = (rng.normal(size=(50, 7)) + 0.3).astype(np.float32)
        tensorio.write_lten(tmp_path / "real.lten", real)
        tensorio.write_lten(tmp_path / "fake.lten", fake)
        report = tmp_path / "rep.json"
        r = run_cli(
            "eval", "--real", tmp_path / "real.lten", "--fake", tmp_path / "fake.lten",
            "--metrics", "fad,ndb,jsd", "--k", "6", "--seed", "4", "--report", report,
        )
        assert r.returncode == 0, r.stderr
        first = json.loads(report.read_text())
        # replay exactly the command line recorded inside the report
        r = run_cli(*first["command"])
        assert r.returncode == 0, r.stderr
        second = json.loads(report.read_text())
        for key in ("fad", "ndb", "ndb_over_k", "jsd"):
            assert first[key] == second[key]


class TestJsdCommand:
    def test_jsd_subcommand(self, tmp_path):
        tensorio.write_lten(tmp_path / "p.lten", np.array([1.0, 0.0], dtype=np.float32))
        tensorio.write_lten(tmp_path / "q.lten", np.array([0.0, 1.0], dtype=np.float32))
        report = tmp_path / "j.json"
        r = run_cli("jsd", "--p", tmp_path / "p.lten", "--q", tmp_path / "q.lten",
                    "--report", report)
        assert r.returncode == 0, r.stderr
        assert json.loads(report.read_text())["jsd"] == 1.0
