"""Acceptance criteria 1-10, each at its stated tolerance.

Every test records one PASS/FAIL line; the lines are printed together at the
end of the module (visible without ``-s``). Run alone with
``pytest tests/test_acceptance.py``.
"""

import hashlib
import math
import os
import subprocess
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

from monoscat import io
from monoscat.forward import DirectionGrid, SolverConfig, mie_far_field
from monoscat.monotonicity import (count_signed_eigs, disc_samples, indicator_map,
                                   localize_density, monotonicity_gap)
from monoscat.operators import (FarFieldMatrix, SamplingWarning, assemble_far_field_matrix,
                                check_energy_identity, circle_residuals,
                                far_field_matrix_from_contrast)
from monoscat.scene import (Disc, Scene, distance_to_shapes, load_scene, make_pixel_grid,
                            rasterize, region_mask)

ROOT = Path(__file__).resolve().parent.parent
SCENES = ROOT / "scenes"
RESULTS = {}
DESCRIPTIONS = {
    1: "oracle equivalence (Mie vs simulated, M=256, refinement)",
    2: "eigenvalue circle residual < 1e-3",
    3: "energy identity residual < 1e-6 |g|^2 for 20 densities",
    4: "monotonicity direction of the gap matrix",
    5: "indicator takes two values, low value = baseline",
    6: "support localization (positive and negative scenes)",
    7: "significant-eigenvalue counts within 40% of 25/36/61",
    8: "localized wave functions",
    9: "rank-one interlacing over 1000 random pairs",
    10: "bit-identical outputs for MONOSCAT_THREADS in {1, 8}",
}


def record(n, ok, detail):
    RESULTS[n] = (bool(ok), detail)
    assert ok, f"criterion {n}: {detail}"


@pytest.fixture(scope="module", autouse=True)
def report(request):
    yield
    tr = request.config.pluginmanager.get_plugin("terminalreporter")
    lines = ["", "acceptance summary"]
    for n in sorted(DESCRIPTIONS):
        if n in RESULTS:
            ok, detail = RESULTS[n]
            lines.append(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {DESCRIPTIONS[n]}  [{detail}]")
        else:
            lines.append(f"criterion {n:2d}: FAIL  {DESCRIPTIONS[n]}  [not run or errored]")
    for line in lines:
        if tr is not None:
            tr.write_line(line)
        else:  # pragma: no cover
            print(line)


def _emit(tmp_dir, name, F):
    """Persist an output so runs can be compared by checksum."""
    return io.write_matrix(Path(tmp_dir) / name, F)


# -- shared simulations ------------------------------------------------------

DIRS64 = DirectionGrid(64)


def _disc_matrix(m):
    q = rasterize(load_scene(SCENES / "mie_disc.json"), 1.0, m)
    t0 = time.perf_counter()
    F = far_field_matrix_from_contrast(q, 2.0, DIRS64, SolverConfig())
    return F, time.perf_counter() - t0


@pytest.fixture(scope="module")
def mie_matrix():
    return FarFieldMatrix(DIRS64.weight * mie_far_field(1.0, 1.0, 2.0, DIRS64), 2.0, DIRS64)


@pytest.fixture(scope="module")
def disc256():
    return _disc_matrix(256)


def _positive_scene(k):
    sc = load_scene(SCENES / "kite_ellipse_positive.json")
    return Scene(sc.shapes, k, sc.R)


@pytest.fixture(scope="module")
def positive_k2():
    t0 = time.perf_counter()
    F = assemble_far_field_matrix(_positive_scene(2.0), DIRS64)
    return F, time.perf_counter() - t0


@pytest.fixture(scope="module")
def positive_map(positive_k2):
    F, t_forward = positive_k2
    t0 = time.perf_counter()
    im = indicator_map(F, make_pixel_grid(5.0, 100), 0.1)
    return im, t_forward + time.perf_counter() - t0


# -- criteria ----------------------------------------------------------------

def test_criterion_01_oracle_equivalence(disc256, mie_matrix, tmp_path):
    F256, t256 = disc256
    F512, _ = _disc_matrix(512)
    ref = np.linalg.norm(mie_matrix.values)
    e256 = np.linalg.norm(F256.values - mie_matrix.values) / ref
    e512 = np.linalg.norm(F512.values - mie_matrix.values) / ref
    _emit(tmp_path, "disc256.csv", F256)
    ok = e256 < 1e-2 and e512 < e256 and t256 < 120
    record(1, ok, f"err M=256 {e256:.2e}, M=512 {e512:.2e}, runtime {t256:.0f}s")


def test_criterion_02_eigenvalue_circle(disc256):
    _, res = circle_residuals(disc256[0])
    record(2, res.max() < 1e-3, f"max relative residual {res.max():.2e}")


def test_criterion_03_energy_identity(disc256):
    F = disc256[0]
    sc = load_scene(SCENES / "mie_disc.json")
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(20):
        g = rng.standard_normal(64) + 1j * rng.standard_normal(64)
        worst = max(worst, check_energy_identity(F, sc, g) / np.vdot(g, g).real)
    record(3, worst < 1e-6, f"max residual / |g|^2 = {worst:.2e}")


def test_criterion_04_monotonicity_direction():
    mats = []
    for q in (1.0, 2.0):
        qf = rasterize(Scene([Disc(radius=1.0, q=q)], 2.0, 1.0), 1.0, 128)
        mats.append(far_field_matrix_from_contrast(qf, 2.0, DIRS64))
    up = count_signed_eigs(monotonicity_gap(mats[0], mats[1]), delta_rel=1e-10)
    down = count_signed_eigs(monotonicity_gap(mats[1], mats[0]), delta_rel=1e-10)
    ok = (up.n_negative <= 3 and up.n_positive >= 10
          and down.n_positive <= 3 and down.n_negative >= 10)
    record(4, ok, f"q1<=q2 (neg,pos)=({up.n_negative},{up.n_positive}); "
                  f"swapped ({down.n_negative},{down.n_positive})")


def test_criterion_05_two_value_indicator(positive_map):
    im, elapsed = positive_map
    vals = np.unique(im.values)
    ok = len(vals) == 2 and vals[1] - vals[0] == 1 and vals[0] == im.baseline and elapsed < 300
    record(5, ok, f"values {vals.tolist()}, baseline {im.baseline}, runtime {elapsed:.0f}s")


def _localization_fractions(im, shapes, k):
    pix = im.grid
    lo, hi = im.lower_upper()
    inside = region_mask(shapes, pix.centers)
    far = distance_to_shapes(shapes, pix.centers) > 2 * math.pi / k
    flat = im.values.ravel()
    return np.mean(flat[inside] == lo), np.mean(flat[far] == hi), inside.sum(), far.sum()


def test_criterion_06_support_localization(positive_map):
    im, _ = positive_map
    pos = _localization_fractions(im, _positive_scene(2.0).shapes, 2.0)
    neg_scene = load_scene(SCENES / "kite_nut_ellipse_negative.json")
    dirs = DirectionGrid(128)
    F = assemble_far_field_matrix(neg_scene, dirs)
    im_neg = indicator_map(F, make_pixel_grid(10.0, 100), -0.01, sign=-1)
    neg = _localization_fractions(im_neg, neg_scene.shapes, neg_scene.k)
    ok = all(f >= 0.9 for f in (pos[0], pos[1], neg[0], neg[1])) and pos[2] and pos[3] \
        and neg[2] and neg[3]
    record(6, ok, f"positive inside-low {pos[0]:.3f} far-high {pos[1]:.3f}; "
                  f"negative inside-low {neg[0]:.3f} far-high {neg[1]:.3f}")


def test_criterion_07_significant_counts(positive_k2):
    targets = {1.0: 25, 2.0: 36, 5.0: 61}
    pixels = make_pixel_grid(5.0, 100)
    means = {}
    for k, target in targets.items():
        if k == 2.0:
            F = positive_k2[0]
        else:
            # k = 5 uses a coarser solver grid (about 12 cells per interior wavelength)
            res = 128 if k == 5.0 else None
            F = assemble_far_field_matrix(_positive_scene(k), DIRS64, resolution=res)
        means[k] = float(indicator_map(F, pixels, 0.1).significant.mean())
    ok = all(abs(means[k] - t) <= 0.4 * t for k, t in targets.items())
    record(7, ok, ", ".join(f"k={k:g}: {means[k]:.1f} (target {t})" for k, t in targets.items()))


def test_criterion_08_localized_wave_functions():
    t0 = time.perf_counter()
    eps = [1e-2, 1e-4, 1e-6, 1e-8]
    D, wD = disc_samples((0.0, 0.0), 1.0, 400)
    out_B, wB = disc_samples((2.5, 0.0), 0.5)
    in_B, wI = disc_samples((0.2, 0.1), 0.4)
    outside = localize_density(out_B, D, DIRS64, 2.0, eps, wB, wD)
    inside = localize_density(in_B, D, DIRS64, 2.0, eps, wI, wD)
    elapsed = time.perf_counter() - t0
    growth = outside.ratios[-1] / outside.ratios[0]
    spread = inside.ratios.max() / inside.ratios.min()
    ok = (growth >= 10 and spread < 10 and outside.monotone and inside.monotone and elapsed < 60)
    record(8, ok, f"B outside D grows x{growth:.1e}; B inside D varies x{spread:.2f}; "
                  f"{elapsed:.1f}s")


def test_criterion_09_rank_one_interlacing():
    rng = np.random.default_rng(9)
    violations = pairs = 0
    while pairs < 1000:
        n = int(rng.integers(2, 33)) * 2
        k = float(rng.uniform(0.5, 6.0))
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        F = FarFieldMatrix(a * 10.0 ** rng.uniform(-3, 1), k, DirectionGrid(n))
        alpha = float(rng.choice([-1, 1]) * 10.0 ** rng.uniform(-3, 1))
        pixels = make_pixel_grid(float(rng.uniform(0.5, 8.0)), 5)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            im = indicator_map(F, pixels, alpha, sign=int(np.sign(alpha)))
        violations += int(np.sum(np.abs(im.values - im.baseline) > 1))
        pairs += pixels.J
    record(9, violations == 0, f"{pairs} pairs, {violations} violations")


def _cli_run(out, threads, scenes):
    env = dict(os.environ, MONOSCAT_THREADS=str(threads))
    cmds = [
        ["simulate", "--scene", scenes["disc"], "--grid", "128"],
        ["mie", "--scene", scenes["disc"]],
        ["spectrum", "--matrix", str(out / "farfield.csv"), "--delta-rel", "1e-10"],
        ["reconstruct", "--scene", scenes["pos"], "--roi", "5", "--pixels", "40",
         "--alpha", "0.01,0.1,1"],
        ["shrink", "--matrix", str(out / "farfield.csv"), "--roi", "1.5", "--pixels", "8"],
        ["localize", "--scene", scenes["disc"], "--probe", "2.5,0,0.5"],
    ]
    for c in cmds:
        sub = out / c[0]
        res = subprocess.run([sys.executable, "-m", "monoscat", *c, "--out", str(sub)], env=env,
                             capture_output=True, text=True)
        assert res.returncode == 0, res.stderr
        if c[0] == "simulate":
            (out / "farfield.csv").write_bytes((sub / "farfield.csv").read_bytes())
    sums = {}
    for p in sorted(out.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            sums[str(p.relative_to(out))] = hashlib.sha256(p.read_bytes()).hexdigest()
    return sums


def test_criterion_10_determinism(tmp_path, positive_k2, disc256):
    scenes = {"disc": str(SCENES / "mie_disc.json"), "pos": str(SCENES / "kite_ellipse_positive.json")}
    a = _cli_run(tmp_path / "t1", 1, scenes)
    b = _cli_run(tmp_path / "t8", 8, scenes)
    same_files = a == b and len(a) > 10
    # in-process: indicator map of criterion 5 and the M=256 disc solve, 1 vs 8 threads
    F = positive_k2[0]
    pixels = make_pixel_grid(5.0, 100)
    m1 = indicator_map(F, pixels, 0.1, threads=1)
    m8 = indicator_map(F, pixels, 0.1, threads=8)
    same_map = np.array_equal(m1.values, m8.values) and np.array_equal(m1.significant, m8.significant)
    q = rasterize(load_scene(SCENES / "mie_disc.json"), 1.0, 256)
    F8 = far_field_matrix_from_contrast(q, 2.0, DIRS64, threads=8)
    same_solve = np.array_equal(F8.values, disc256[0].values)
    record(10, same_files and same_map and same_solve,
           f"{len(a)} CLI outputs identical={same_files}; indicator map identical={same_map}; "
           f"far field identical={same_solve}")
