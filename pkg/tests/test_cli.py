import json
import subprocess
import sys

import numpy as np
import pytest

from echolab.cli import SEED_ENV, main, resolve_seed
from echolab.pipeline.dataset import load_dataset
from echolab.pipeline.pgm import read_pgm
from conftest import TINY_MODEL


class TestSeed:
    def test_precedence(self):
        assert resolve_seed(3, {SEED_ENV: "7"}) == 3
        assert resolve_seed(None, {SEED_ENV: "7"}) == 7
        assert resolve_seed(None, {}) is None
        with pytest.raises(ValueError):
            resolve_seed(None, {SEED_ENV: "x"})


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = {"sim": {"N": 128}, "model": {"params": TINY_MODEL},
           "train": {"steps": 2, "batch_size": 2, "val_every": 0, "val_fraction": 0.2, "max_mask_len": 10}}
    (root / "cfg.json").write_text(json.dumps(cfg))
    assert main(["gen", "--config", str(root / "cfg.json"), "--count", "6", "--out", str(root / "data")]) == 0
    assert main(["train", "--config", str(root / "cfg.json"), "--dataset", str(root / "data"),
                 "--out", str(root / "run")]) == 0
    return root


class TestCommands:
    def test_gen_family_and_seed_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv(SEED_ENV, "11")
        assert main(["gen", "--family", "L", "--count", "2", "--out", str(tmp_path / "a")]) == 0
        ds = load_dataset(tmp_path / "a")
        assert ds.families == ["L", "L"] and ds.seed == 11
        assert main(["gen", "--family", "L", "--count", "2", "--seed", "12", "--out", str(tmp_path / "b")]) == 0
        assert load_dataset(tmp_path / "b").seed == 12

    def test_eval_prints_report(self, workdir, capsys):
        assert main(["eval", "--checkpoint", str(workdir / "run" / "model.echk"),
                     "--dataset", str(workdir / "data")]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["count"] == 6 and 0 <= report["iou_2d"] <= 1

    def test_render_and_saliency(self, workdir, capsys):
        ck, data = str(workdir / "run" / "model.echk"), str(workdir / "data")
        assert main(["render", "--dataset", data, "--index", "1", "--out", str(workdir / "gt.pgm")]) == 0
        np.testing.assert_array_equal(read_pgm(workdir / "gt.pgm") // 255, load_dataset(data).floorplans[1])
        assert main(["render", "--dataset", data, "--checkpoint", ck, "--out", str(workdir / "cmp.pgm")]) == 0
        assert read_pgm(workdir / "cmp.pgm").shape == (32, 65)
        assert main(["saliency", "--checkpoint", ck, "--dataset", data, "--out", str(workdir / "s.pgm")]) == 0
        out = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert 0 <= out["peak_sample"] < 128
        assert read_pgm(workdir / "s.pgm").shape == (7 * 8, 128)

    def test_runtime_error_exit_code(self, tmp_path, capsys):
        assert main(["eval", "--checkpoint", str(tmp_path / "none"), "--dataset", str(tmp_path)]) == 1
        assert capsys.readouterr().err.startswith("echolab: error:")

    def test_usage_error_exit_code(self):
        proc = subprocess.run([sys.executable, "-m", "echolab", "frobnicate"], capture_output=True, text=True)
        assert proc.returncode == 2
        proc = subprocess.run([sys.executable, "-m", "echolab", "gen", "--family", "oval", "--out", "x"],
                              capture_output=True, text=True)
        assert proc.returncode == 2
