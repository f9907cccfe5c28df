import json
import subprocess
import sys

import numpy as np
import pytest

from monoscat import cli, io
from monoscat.forward import ConvergenceError, DirectionGrid
from monoscat.operators import FarFieldMatrix


def _scene(path, shapes, k=2.0, R=1.2):
    path.write_text(json.dumps({"k": k, "R": R, "shapes": shapes}))
    return str(path)


@pytest.fixture
def disc_scene(tmp_path):
    return _scene(tmp_path / "disc.json",
                  [{"kind": "disc", "center": [0, 0], "radius": 1.0, "q": 1.0}])


def run(*args):
    return cli.main([str(a) for a in args])


def test_simulate_mie_spectrum_reconstruct(tmp_path, disc_scene):
    out = tmp_path / "run"
    assert run("simulate", "--scene", disc_scene, "--n-dirs", 16, "--grid", 48, "--out", out) == 0
    F = io.read_matrix(out / "farfield.csv")
    assert F.values.shape == (16, 16)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["outputs"]["farfield.csv"] == io.sha256_file(out / "farfield.csv")
    assert manifest["config"]["n_dirs"] == 16 and "simulate" in manifest["timings"]

    assert run("mie", "--scene", disc_scene, "--n-dirs", 16, "--out", out) == 0
    M = io.read_matrix(out / "farfield_mie.csv")
    assert np.linalg.norm(M.values - F.values) < 2e-2 * np.linalg.norm(M.values)

    assert run("spectrum", "--matrix", out / "farfield.csv", "--delta-rel", 1e-10, "--out", out) == 0
    summary = json.loads((out / "spectrum_summary.json").read_text())
    assert summary["max_circle_residual"] < 1e-2

    assert run("reconstruct", "--matrix", out / "farfield.csv", "--roi", 2, "--pixels", 8,
               "--alpha", "0.01,0.1,1", "--delta-rel", 1e-10, "--out", out) == 0
    rec = json.loads((out / "summary.json").read_text())
    assert len(rec["maps"]) == 3
    assert all(m["baseline"] == summary["negative"] for m in rec["maps"])
    for i in range(3):
        assert (out / f"indicator_{i}.pgm").read_text().startswith("P2\n8 8\n")


def test_negative_alpha_list_gives_three_maps(tmp_path):
    out = tmp_path / "neg"
    F = FarFieldMatrix(np.zeros((8, 8)), 1.0, DirectionGrid(8))
    io.write_matrix(tmp_path / "F.csv", F)
    assert run("reconstruct", "--matrix", tmp_path / "F.csv", "--sign", "-1", "--pixels", 4,
               "--alpha=-0.001,-0.01,-0.1", "--out", out) == 0
    rec = json.loads((out / "summary.json").read_text())
    assert [m["alpha"] for m in rec["maps"]] == [-0.001, -0.01, -0.1]
    # zero data with sign -1 and negative alpha: each pixel matrix has one negative eigenvalue
    assert all(m["min"] == m["max"] == 1 for m in rec["maps"])


def test_zero_matrix_spectrum_and_map(tmp_path):
    F = FarFieldMatrix(np.zeros((8, 8)), 1.0, DirectionGrid(8))
    io.write_matrix(tmp_path / "Z.csv", F)
    assert run("spectrum", "--matrix", tmp_path / "Z.csv", "--out", tmp_path) == 0
    s = json.loads((tmp_path / "spectrum_summary.json").read_text())
    assert s["discarded"] == 8 and "note" in s
    assert run("reconstruct", "--matrix", tmp_path / "Z.csv", "--pixels", 3, "--alpha", "0.1",
               "--out", tmp_path) == 0
    assert np.all(io.read_pgm(tmp_path / "indicator_0.pgm") == 1)


def test_empty_scene_simulates_zero_matrix(tmp_path):
    scene = _scene(tmp_path / "e.json", [])
    assert run("simulate", "--scene", scene, "--n-dirs", 8, "--out", tmp_path) == 0
    assert not io.read_matrix(tmp_path / "farfield.csv").values.any()


def test_mie_zero_contrast_and_non_disc(tmp_path):
    z = _scene(tmp_path / "z.json", [{"kind": "disc", "center": [0, 0], "radius": 1.0, "q": 0.0}])
    assert run("mie", "--scene", z, "--n-dirs", 8, "--out", tmp_path) == 0
    assert not io.read_matrix(tmp_path / "farfield_mie.csv").values.any()
    off = _scene(tmp_path / "o.json", [{"kind": "disc", "center": [0.1, 0], "radius": 1.0, "q": 1}])
    assert run("mie", "--scene", off, "--out", tmp_path) == 2


def test_mie_file_is_circulant(tmp_path, disc_scene):
    assert run("mie", "--scene", disc_scene, "--n-dirs", 12, "--out", tmp_path) == 0
    V = io.read_matrix(tmp_path / "farfield_mie.csv").values
    assert np.allclose(np.roll(np.roll(V, 1, 0), 1, 1), V, rtol=0, atol=1e-13)


def test_noise_is_seeded_and_deterministic(tmp_path, disc_scene):
    sums = []
    for name, seed in (("a", 1), ("b", 1), ("c", 2)):
        assert run("simulate", "--scene", disc_scene, "--n-dirs", 8, "--grid", 32, "--noise", 0.05,
                   "--seed", seed, "--out", tmp_path / name) == 0
        sums.append(io.sha256_file(tmp_path / name / "farfield.csv"))
    assert sums[0] == sums[1] != sums[2]


def test_shrink_and_localize(tmp_path, disc_scene):
    assert run("simulate", "--scene", disc_scene, "--n-dirs", 16, "--grid", 32, "--out", tmp_path) == 0
    assert run("shrink", "--matrix", tmp_path / "farfield.csv", "--roi", 2, "--pixels", 6,
               "--out", tmp_path) == 0
    lines = (tmp_path / "shrink_mask.csv").read_text().splitlines()
    assert lines[0] == "j,row,col,z_x,z_y,inside" and len(lines) == 37
    assert run("localize", "--scene", disc_scene, "--probe", "2.5,0,0.5", "--n-dirs", 32,
               "--eps", "1e-2,1e-5,1e-8", "--out", tmp_path) == 0
    rows = (tmp_path / "localization.csv").read_text().splitlines()[1:]
    ratios = [float(r.split(",")[1]) for r in rows]
    assert ratios == sorted(ratios) and ratios[-1] > 10 * ratios[0]


@pytest.mark.parametrize("args", [
    ["simulate", "--scene", "missing.json"],
    ["simulate", "--n-dirs", "7", "--scene", "{scene}"],
    ["simulate", "--noise", "1.0", "--scene", "{scene}"],
    ["simulate", "--noise", "-0.1", "--scene", "{scene}"],
    ["simulate", "--k", "-2", "--scene", "{scene}"],
    ["simulate", "--delta", "1e-3", "--delta-rel", "1e-3", "--scene", "{scene}"],
    ["simulate"],
    ["reconstruct", "--sign", "2", "--scene", "{scene}"],
    ["reconstruct", "--alpha", "a,b", "--scene", "{scene}"],
    ["localize", "--scene", "{scene}"],
    ["nonsense"],
    [],
])
def test_config_errors_exit_2(tmp_path, disc_scene, args):
    args = [a.replace("{scene}", disc_scene) for a in args]
    assert cli.main(args + ["--out", str(tmp_path)] if args else args) == 2


def test_malformed_matrix_exit_2(tmp_path, capsys):
    (tmp_path / "bad.csv").write_text("2,1.0\n0,0,1,0\n0,1,oops,0\n")
    assert run("spectrum", "--matrix", tmp_path / "bad.csv", "--out", tmp_path) == 2
    assert "bad.csv:3" in capsys.readouterr().err


def test_bad_thread_env_exit_2(tmp_path, disc_scene, monkeypatch):
    monkeypatch.setenv("MONOSCAT_THREADS", "lots")
    assert run("simulate", "--scene", disc_scene, "--out", tmp_path) == 2


def test_numerical_failure_exit_3(tmp_path, disc_scene, monkeypatch):
    def boom(*a, **kw):
        raise ConvergenceError("GMRES stalled", residual=0.5)
    monkeypatch.setattr(cli, "assemble_far_field_matrix", boom)
    assert run("simulate", "--scene", disc_scene, "--out", tmp_path) == 3


def test_console_entry_point(tmp_path, disc_scene):
    res = subprocess.run([sys.executable, "-m", "monoscat", "simulate", "--scene", disc_scene,
                          "--n-dirs", "8", "--grid", "16", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    res = subprocess.run([sys.executable, "-m", "monoscat", "simulate", "--n-dirs", "3",
                          "--scene", disc_scene], capture_output=True, text=True)
    assert res.returncode == 2
