import os
import subprocess
import sys

import numpy as np
import pytest

from capbm.cli import ConfigError, main, read_config, resolve
from capbm.data import ComplexDataset, load_dataset, read_ppm, render_grid, save_dataset, write_band_partition
from capbm.formats import load_params
from capbm.learning import TrainLog


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def run(*argv):
    return main(list(argv))


@pytest.fixture
def bars_file(workdir):
    assert run("gen-bars", "--n", "120", "--seed", "5", "--out", "bars.cpxd") == 0
    return "bars.cpxd"


def test_gen_bars(workdir, capsys):
    assert run("gen-bars", "--n", "10", "--seed", "1", "--out", "a.cpxd") == 0
    assert "mean_on_fraction" in capsys.readouterr().out
    ds = load_dataset("a.cpxd")
    assert ds.n_samples == 10 and ds.n_units == 576
    assert run("gen-bars", "--n", "10", "--seed", "1", "--out", "b.cpxd") == 0
    assert (workdir / "a.cpxd").read_bytes() == (workdir / "b.cpxd").read_bytes()
    assert os.path.exists("a.cpxd.config")


def test_gen_bars_rejects_zero(workdir, capsys):
    assert run("gen-bars", "--n", "0", "--out", "x.cpxd") != 0
    assert "error" in capsys.readouterr().err
    assert not os.path.exists("x.cpxd")


def test_train_outputs_and_sidecar_replay(bars_file):
    assert run("train", "--data", bars_file, "--hidden", "8", "--epochs", "2", "--batch-size", "20", "--out", "m.capm") == 0
    params = load_params("m.capm")
    assert (params.n_visible, params.n_hidden) == (576, 8)
    log = TrainLog.read("m.capm.log.jsonl")
    assert [r["epoch"] for r in log.records] == sorted(r["epoch"] for r in log.records)
    cfg = read_config("m.capm.config")
    assert cfg["hidden"] == 8 and cfg["batch_size"] == 20 and cfg["weight_decay"] == 0.0
    assert run("train", "--config", "m.capm.config", "--out", "again.capm") == 0
    assert open("m.capm", "rb").read() == open("again.capm", "rb").read()
    assert open("m.capm.log.jsonl").read() == open("again.capm.log.jsonl").read()


def test_train_zero_epochs_equals_init(bars_file):
    assert run("train", "--data", bars_file, "--hidden", "4", "--epochs", "0", "--out", "init.capm") == 0
    assert run("train", "--data", bars_file, "--hidden", "4", "--epochs", "0", "--out", "init2.capm", "--seed", "0") == 0
    assert run("train", "--data", bars_file, "--init", "init.capm", "--hidden", "4", "--epochs", "0", "--out", "same.capm") == 0
    assert open("init.capm", "rb").read() == open("same.capm", "rb").read()
    assert not np.any(load_params("init.capm").J)


def test_train_no_amp_coupling_and_pcd(bars_file):
    assert run("train", "--data", bars_file, "--hidden", "4", "--epochs", "1", "--no-amp-coupling", "--out", "nj.capm") == 0
    assert not np.any(load_params("nj.capm").J)
    assert run("train", "--data", bars_file, "--hidden", "4", "--epochs", "1", "--algo", "pcd", "--chains", "30", "--out", "p.capm") == 0
    cfg = read_config("p.capm.config")
    assert cfg["weight_decay"] == 1e-4 and cfg["n_persistent_chains"] == 30


def test_flag_beats_config_beats_default(workdir):
    (workdir / "c.cfg").write_text("hidden = 7\nepochs=3\n# comment\n")
    cfg = resolve({"hidden": 200, "epochs": 10, "seed": 0}, "c.cfg", {"epochs": 5, "seed": None})
    assert cfg == {"hidden": 7, "epochs": 5, "seed": 0}


def test_config_conflicts(bars_file, workdir, capsys):
    (workdir / "bad.cfg").write_text("hiden=3\n")
    assert run("train", "--data", bars_file, "--config", "bad.cfg", "--out", "x.capm") != 0
    (workdir / "dup.cfg").write_text("hidden=3\nhidden=4\n")
    with pytest.raises(ConfigError):
        read_config("dup.cfg")
    assert run("train", "--data", bars_file, "--chains", "5", "--out", "x.capm") != 0
    assert run("train", "--data", bars_file, "--batch-size", "500", "--out", "x.capm") != 0
    assert not os.path.exists("x.capm")


def test_dimension_mismatch(bars_file, workdir):
    assert run("gen-bars", "--n", "3", "--out", "small.cpxd") == 0
    assert run("train", "--data", bars_file, "--hidden", "4", "--epochs", "0", "--out", "m.capm") == 0
    save_dataset(ComplexDataset(np.ones((2, 10), complex)), "ten.cpxd")
    assert run("reconstruct", "--model", "m.capm", "--data", "ten.cpxd") != 0
    assert run("train", "--data", "ten.cpxd", "--init", "m.capm", "--hidden", "4", "--out", "y.capm") != 0


def test_reconstruct_renders_checkpoints(bars_file, capsys):
    assert run("train", "--data", bars_file, "--hidden", "6", "--epochs", "1", "--out", "m.capm") == 0
    assert run("reconstruct", "--model", "m.capm", "--data", bars_file, "--steps", "20", "--n", "3", "--render-dir", "r0") == 0
    out = capsys.readouterr().out
    assert "step 1:" in out and "step 20:" in out and "step 100" not in out
    assert sorted(os.listdir("r0")) == ["grid.ppm", "reconstruct.config", "step_001.ppm", "step_005.ppm", "step_020.ppm"]
    grid = read_ppm("r0/grid.ppm")
    assert grid.shape == (3 * 25 + 1, 4 * 25 + 1, 3)


def test_reconstruct_zero_steps_is_input(bars_file):
    assert run("train", "--data", bars_file, "--hidden", "4", "--epochs", "0", "--out", "m.capm") == 0
    assert run("reconstruct", "--model", "m.capm", "--data", bars_file, "--steps", "0", "--n", "2", "--render-dir", "z") == 0
    render_grid([list(load_dataset(bars_file).samples[:2])], (24, 24), "ref.ppm")
    assert open("z/step_000.ppm", "rb").read() == open("ref.ppm", "rb").read()


def test_global_phase_keeps_amplitude_channel(bars_file):
    assert run("train", "--data", bars_file, "--hidden", "4", "--epochs", "1", "--out", "m.capm") == 0
    for name, phase in (("g0", "0"), ("gpi", "3.141592653589793")):
        assert run("reconstruct", "--model", "m.capm", "--data", bars_file, "--steps", "5",
                   "--global-phase", phase, "--render-dir", name) == 0
    a = read_ppm("g0/step_005.ppm").astype(int)
    b = read_ppm("gpi/step_005.ppm").astype(int)
    assert np.array_equal(a.max(axis=-1), b.max(axis=-1))


def test_sample_command(bars_file, capsys):
    assert run("train", "--data", bars_file, "--hidden", "4", "--epochs", "1", "--out", "m.capm") == 0
    assert run("sample", "--model", "m.capm", "--steps", "5", "--n", "2", "--render-dir", "s", "--seed", "3") == 0
    first = open("s/step_005.ppm", "rb").read()
    assert run("sample", "--model", "m.capm", "--steps", "5", "--n", "2", "--render-dir", "s2", "--seed", "3") == 0
    assert open("s2/step_005.ppm", "rb").read() == first


def test_normalize_command(workdir):
    rng = np.random.default_rng(0)
    save_dataset(ComplexDataset(rng.normal(size=(5, 390)) + 1j * rng.normal(size=(5, 390))), "cwt.cpxd")
    write_band_partition([(0, 294), (294, 390)], "bands.txt")
    assert run("normalize", "--data", "cwt.cpxd", "--bands", "bands.txt", "--out", "norm.cpxd") == 0
    mod = np.abs(load_dataset("norm.cpxd").samples)
    assert np.all((mod == 0) | (np.abs(mod - 1) < 1e-12))


def test_check_quick_exit_code(capsys):
    assert run("check", "--level", "quick") == 0
    out = capsys.readouterr().out
    assert "[PASS]" in out and "[FAIL]" not in out and "measured" in out


def test_module_entry_point(workdir):
    out = subprocess.run([sys.executable, "-m", "capbm", "gen-bars", "--n", "2", "--out", "e.cpxd"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and "n_samples=2" in out.stdout
