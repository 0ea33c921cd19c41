import csv
import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from sphereflow.cli import main
from sphereflow.io import read_maps

from helpers import write_config


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A tiny config plus generated dataset shared by the command tests."""
    root = tmp_path_factory.mktemp("cli")
    cfg = write_config(root, [np.ones(5), 3 * np.ones(5)], task={"sigma_n": 0.5})
    assert main(["gen", "--config", str(cfg), "--out", str(root / "data")]) == 0
    return root, cfg


def read_json(path):
    return json.loads(path.read_text())


class TestCommands:
    def test_gen(self, workspace):
        root, _ = workspace
        d = root / "data"
        assert {p.name for p in d.iterdir()} == {"train.smap", "test.smap", "test_rotated.smap",
                                                 "labels.csv", "dataset.json"}
        assert read_maps(d / "train.smap").data.shape == (8, 1, 192)
        meta = read_json(d / "dataset.json")
        assert meta["maps"] == {"train": 8, "test": 4, "test_rotated": 4}

    @pytest.mark.parametrize("kind", ["psd", "hist"])
    def test_baseline(self, workspace, tmp_path, kind):
        root, cfg = workspace
        assert main(["baseline", kind, "--data", str(root / "data"), "--config", str(cfg),
                     "--out", str(tmp_path)]) == 0
        r = read_json(tmp_path / f"baseline_{kind}.json")
        assert r["features"] == kind and "SVM" in r["note"]
        for k in ("train_accuracy", "test_accuracy", "test_rotated_accuracy"):
            assert 0 <= r[k] <= 1

    def test_train_and_eval(self, workspace, tmp_path):
        root, cfg = workspace
        assert main(["train", "--data", str(root / "data"), "--config", str(cfg),
                     "--out", str(tmp_path)]) == 0
        m = read_json(tmp_path / "train_metrics.json")
        assert set(m) >= {"variant", "seed", "n_params", "n_train", "n_val", "history",
                          "test_accuracy", "test_rotated_accuracy"}
        assert [h["epoch"] for h in m["history"]] == [1, 2]
        assert set(m["history"][0]) >= {"train_loss", "train_accuracy"}
        assert (tmp_path / "model.sphf").read_bytes()[:4] == b"SPHF"
        assert main(["eval", "--data", str(root / "data"), "--config", str(cfg),
                     "--checkpoint", str(tmp_path / "model.sphf"), "--out", str(tmp_path)]) == 0
        e = read_json(tmp_path / "eval_metrics.json")
        assert e["test_accuracy"] == m["test_accuracy"]
        assert e["test_rotated_accuracy"] == m["test_rotated_accuracy"]

    def test_eigenvalues(self, tmp_path):
        assert main(["analyze", "eigenvalues", "--nside", "4", "--out", str(tmp_path)]) == 0
        rows = list(csv.reader(open(tmp_path / "eigenvalues.csv")))
        lam = np.array([float(r[1]) for r in rows[1:]])
        assert rows[0] == ["index", "lambda"] and len(lam) == 192
        assert np.all(np.diff(lam) >= 0) and abs(lam[0]) < 1e-9
        assert read_json(tmp_path / "eigenvalues.json")["ell_max"] >= 8

    def test_alignment(self, tmp_path):
        assert main(["analyze", "alignment", "--nside", "4", "--lmax", "15",
                     "--out", str(tmp_path)]) == 0
        rows = list(csv.reader(open(tmp_path / "alignment.csv")))
        m = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
        assert m.shape == (16, 16)
        assert np.all(m.sum(axis=0) <= 1 + 1e-6)
        s = read_json(tmp_path / "alignment.json")
        assert s["size"] == 16 and s["requested_ell_max"] == 15

    def test_equivariance(self, tmp_path):
        assert main(["analyze", "equivariance", "--nside", "4", "--trials", "3",
                     "--angles", "0.3", "1.2", "--out", str(tmp_path)]) == 0
        s = read_json(tmp_path / "equivariance.json")
        assert s["angles"] == [0.3, 1.2] and len(s["errors"]) == 2
        assert len(open(tmp_path / "equivariance.csv").read().splitlines()) == 3

    def test_circle(self, tmp_path):
        assert main(["analyze", "circle", "--n", "8", "--out", str(tmp_path)]) == 0
        r = read_json(tmp_path / "circle.json")
        assert r["passed"] and r["eigenvalues_ok"] and r["subspaces_ok"] and r["shift_ok"]


class TestExitCodes:
    def test_missing_config(self, tmp_path):
        assert main(["gen", "--config", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path)]) == 2

    def test_unknown_key_fails_before_output(self, tmp_path):
        cfg = write_config(tmp_path, [np.ones(3), np.ones(3)], surprise=True)
        assert main(["gen", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
        assert not (tmp_path / "o" / "train.smap").exists()

    def test_bad_json(self, tmp_path):
        (tmp_path / "c.json").write_text("{not json")
        assert main(["gen", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path)]) == 2

    @pytest.mark.parametrize("argv", [
        ["analyze", "eigenvalues", "--nside", "3"],
        ["analyze", "circle", "--n", "2"],
        ["analyze", "equivariance", "--nside", "2", "--lmax", "9"],
        ["frobnicate"],
        ["gen"],
        ["gen", "--config", "x.json", "--seed", "-1"],
    ])
    def test_usage(self, tmp_path, argv, capsys):
        assert main(argv + ["--out", str(tmp_path)]) == 2

    def test_missing_dataset(self, workspace, tmp_path):
        _, cfg = workspace
        assert main(["train", "--data", str(tmp_path), "--config", str(cfg),
                     "--out", str(tmp_path)]) == 2

    def test_runtime_failure(self, workspace, tmp_path):
        root, cfg = workspace
        bad = tmp_path / "model.sphf"
        bad.write_bytes(b"garbage")
        assert main(["eval", "--data", str(root / "data"), "--config", str(cfg),
                     "--checkpoint", str(bad), "--out", str(tmp_path)]) == 1

    @pytest.mark.parametrize("value,code", [("2", 0), ("zero", 2), ("0", 2)])
    def test_thread_env(self, tmp_path, monkeypatch, value, code):
        monkeypatch.setenv("SPHEREFLOW_THREADS", value)
        assert main(["analyze", "circle", "--n", "5", "--out", str(tmp_path)]) == code


def test_console_script(tmp_path):
    exe = shutil.which("sphereflow")
    cmd = [exe] if exe else [sys.executable, "-m", "sphereflow.cli"]
    ok = subprocess.run(cmd + ["analyze", "circle", "--n", "6", "--out", str(tmp_path)])
    assert ok.returncode == 0
    bad = subprocess.run(cmd + ["analyze", "circle", "--n", "1", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert bad.returncode == 2 and "invalid input" in bad.stderr


def test_seed_override_changes_data(workspace, tmp_path):
    _, cfg = workspace
    for s in ("1", "2"):
        assert main(["gen", "--config", str(cfg), "--seed", s, "--out", str(tmp_path / s)]) == 0
    assert (tmp_path / "1" / "train.smap").read_bytes() != (tmp_path / "2" / "train.smap").read_bytes()
    assert read_json(tmp_path / "1" / "dataset.json")["seed"] == 1
