"""``monoscat`` command line: simulate far fields and run monotonicity reconstructions.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, io, kernels
from .forward import ConvergenceError, DirectionGrid, mie_far_field
from .monotonicity import (DEFAULT_DELTA, count_signed_eigs, disc_samples, indicator_map,
                           localize_density, shrink_reconstruct)
from .operators import FarFieldMatrix, assemble_far_field_matrix, circle_residuals
from .scene import Disc, Scene, load_scene, make_pixel_grid

log = logging.getLogger("monoscat")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
COMMANDS = ("simulate", "reconstruct", "spectrum", "shrink", "localize", "mie")


class ConfigError(ValueError):
    pass


def _csv_floats(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated reals, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _sign(text):
    if text not in ("+1", "1", "-1"):
        raise argparse.ArgumentTypeError("sign must be +1 or -1")
    return int(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="monoscat", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"monoscat {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--scene", type=Path, help="scene JSON file")
        s.add_argument("--matrix", type=Path, help="far field matrix CSV (instead of --scene)")
        s.add_argument("--k", type=float, help="wavenumber (overrides the scene)")
        s.add_argument("--n-dirs", type=int, default=64, help="number of directions N (even)")
        s.add_argument("--grid", type=int, help="solver cells per axis M")
        s.add_argument("--roi", type=float, help="half-width of the pixel region")
        s.add_argument("--pixels", type=int, help="pixels per axis")
        s.add_argument("--alpha", type=_csv_floats, help="comma-separated alpha values")
        s.add_argument("--sign", type=_sign, default=1, help="+1 or -1")
        s.add_argument("--delta", type=float, help=f"absolute threshold (default {DEFAULT_DELTA})")
        s.add_argument("--delta-rel", type=float, help="threshold relative to the matrix norm")
        s.add_argument("--noise", type=float, default=0.0, help="relative noise level in [0, 1)")
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--out", type=Path, default=Path("."), help="output directory")
        s.add_argument("-v", "--verbose", action="store_true")
        if name == "shrink":
            s.add_argument("--beta", type=float, default=0.5)
            s.add_argument("--budget", type=int, default=0)
        if name == "localize":
            s.add_argument("--probe", type=_csv_floats, required=True,
                           help="probe disc B as x,y,radius")
            s.add_argument("--eps", type=_csv_floats, default=[1e-2, 1e-4, 1e-6, 1e-8])
    return p


def _validate(a):
    if a.n_dirs < 2 or a.n_dirs % 2:
        raise ConfigError(f"--n-dirs must be even and >= 2, got {a.n_dirs}")
    if not 0 <= a.noise < 1:
        raise ConfigError(f"--noise must lie in [0, 1), got {a.noise}")
    if a.k is not None and not a.k > 0:
        raise ConfigError("--k must be positive")
    if a.grid is not None and a.grid < 2:
        raise ConfigError("--grid must be at least 2")
    if a.pixels is not None and a.pixels < 1:
        raise ConfigError("--pixels must be positive")
    if a.roi is not None and not a.roi > 0:
        raise ConfigError("--roi must be positive")
    if a.delta is not None and a.delta_rel is not None:
        raise ConfigError("pass --delta or --delta-rel, not both")
    kernels.thread_count()


def _scene(a) -> Scene:
    if a.scene is None:
        raise ConfigError(f"{a.command} needs --scene")
    sc = load_scene(a.scene)
    return Scene(sc.shapes, a.k, sc.R) if a.k is not None else sc


def _matrix(a, manifest) -> FarFieldMatrix:
    """Read ``--matrix`` or simulate from ``--scene``."""
    if a.matrix is not None:
        with manifest.stage("read"):
            F = io.read_matrix(a.matrix)
        if a.k is not None and not math.isclose(a.k, F.k):
            raise ConfigError(f"--k {a.k} disagrees with the matrix file (k={F.k})")
        if F.N % 2:
            raise ConfigError(f"matrix dimension N={F.N} must be even")
        return F
    sc = _scene(a)
    with manifest.stage("simulate"):
        F = assemble_far_field_matrix(sc, DirectionGrid(a.n_dirs), resolution=a.grid)
    return _noisy(F, a)


def _noisy(F, a):
    if a.noise == 0:
        return F
    return FarFieldMatrix(io.add_multiplicative_noise(F.values, a.noise, a.seed), F.k, F.grid,
                          F.contrast)


def _thresholds(a):
    return {"delta": a.delta, "delta_rel": a.delta_rel}


def cmd_simulate(a, manifest):
    if a.matrix is not None:
        raise ConfigError("simulate takes --scene, not --matrix")
    F = _matrix(a, manifest)
    manifest.record(io.write_matrix(a.out / "farfield.csv", F))


def cmd_mie(a, manifest):
    sc = _scene(a)
    if len(sc.shapes) != 1 or not isinstance(sc.shapes[0], Disc) or any(sc.shapes[0].center):
        raise ConfigError("mie needs a scene with a single disc centred at the origin")
    d = sc.shapes[0]
    grid = DirectionGrid(a.n_dirs)
    with manifest.stage("mie"):
        F = FarFieldMatrix(grid.weight * mie_far_field(d.radius, d.q, sc.k, grid), sc.k, grid)
    manifest.record(io.write_matrix(a.out / "farfield_mie.csv", _noisy(F, a)))


def cmd_spectrum(a, manifest):
    F = _matrix(a, manifest)
    with manifest.stage("spectrum"):
        lam, res = circle_residuals(F)
        order = np.lexsort((lam.imag, lam.real))
        lam, res = lam[order], res[order]
        rep = count_signed_eigs(F.real_part(), **_thresholds(a))
    manifest.record(io.write_spectrum(a.out / "spectrum.csv", lam, res))
    manifest.record(io.write_spectrum(a.out / "spectrum_real_part.csv", rep.eigenvalues))
    summary = {
        "N": F.N, "k": F.k, "delta": rep.delta,
        "negative": rep.n_negative, "positive": rep.n_positive, "discarded": rep.n_discarded,
        "max_circle_residual": float(res.max()),
    }
    if not np.any(F.values):
        summary["note"] = "zero matrix: all eigenvalues vanish and lie on the circle trivially"
    manifest.record(io.write_json(a.out / "spectrum_summary.json", summary))
    print(json.dumps(summary))


def _pixels(a, default_roi, default_pixels):
    return make_pixel_grid(a.roi if a.roi is not None else default_roi,
                           a.pixels if a.pixels is not None else default_pixels)


def _default_roi(a):
    if a.scene is not None:
        return 1.25 * load_scene(a.scene).R
    return 5.0


def cmd_reconstruct(a, manifest):
    F = _matrix(a, manifest)
    pixels = _pixels(a, _default_roi(a), 100)
    alphas = a.alpha if a.alpha is not None else [a.sign * v for v in (0.01, 0.1, 1.0)]
    summary = {"N": F.N, "k": F.k, "sign": a.sign, "maps": []}
    for i, alpha in enumerate(alphas):
        with manifest.stage(f"indicator_{i}"):
            im = indicator_map(F, pixels, alpha, a.sign, **_thresholds(a))
        stem = f"indicator_{i}"
        manifest.record(io.write_indicator_csv(a.out / f"{stem}.csv", im))
        manifest.record(io.write_pgm(a.out / f"{stem}.pgm", im))
        lo, hi = im.lower_upper()
        summary["maps"].append({"alpha": alpha, "file": stem, "baseline": im.baseline,
                                "delta": im.delta, "min": lo, "max": hi,
                                "mean_significant": float(im.significant.mean())})
    manifest.record(io.write_json(a.out / "summary.json", summary))


def cmd_shrink(a, manifest):
    F = _matrix(a, manifest)
    pixels = _pixels(a, _default_roi(a), 20)
    alpha = a.alpha[0] if a.alpha else 0.0
    with manifest.stage("shrink"):
        mask = shrink_reconstruct(F, pixels.R, pixels.pixels_per_axis, alpha, a.beta,
                                  budget=a.budget, **_thresholds(a))
    rows, cols = pixels.rows_cols()
    flat = mask.ravel()
    lines = ["j,row,col,z_x,z_y,inside"]
    for j in range(pixels.J):
        z = pixels.centers[j]
        lines.append(f"{j},{rows[j]},{cols[j]},{io._fmt(z[0])},{io._fmt(z[1])},{int(flat[j])}")
    manifest.record(io.atomic_write_text(a.out / "shrink_mask.csv", "\n".join(lines) + "\n"))
    manifest.record(io.atomic_write_text(a.out / "shrink_mask.pgm", io.format_pgm(mask.astype(int))))
    print(json.dumps({"kept": int(mask.sum()), "total": pixels.J}))


def _shape_samples(shape, n_min=200):
    """Grid points inside ``shape`` with equal area weights."""
    if isinstance(shape, Disc):
        return disc_samples(shape.center, shape.radius, n_min)
    (x0, x1), (y0, y1) = shape.box_extent()
    m = 16
    while True:
        xs = x0 + (np.arange(m) + 0.5) * (x1 - x0) / m
        ys = y0 + (np.arange(m) + 0.5) * (y1 - y0) / m
        X, Y = np.meshgrid(xs, ys)
        pts = np.column_stack([X.ravel(), Y.ravel()])
        inside = np.asarray(shape.contains(pts), dtype=bool)
        if inside.sum() >= n_min:
            return pts[inside], (x1 - x0) * (y1 - y0) / m ** 2
        m *= 2


def cmd_localize(a, manifest):
    sc = _scene(a)
    if len(a.probe) != 3 or not a.probe[2] > 0:
        raise ConfigError("--probe must be x,y,radius with radius > 0")
    grid = DirectionGrid(a.n_dirs)
    B, wB = disc_samples(a.probe[:2], a.probe[2])
    D_parts = [_shape_samples(s) for s in sc.shapes]
    D = np.concatenate([p for p, _ in D_parts]) if D_parts else np.zeros((0, 2))
    wD = np.concatenate([np.full(len(p), w) for p, w in D_parts]) if D_parts else 1.0
    with manifest.stage("localize"):
        res = localize_density(B, D, grid, sc.k, a.eps, wB, wD)
    lines = ["eps,ratio,eigenvalue"]
    lines += [f"{io._fmt(e)},{io._fmt(r)},{io._fmt(l)}"
              for e, r, l in zip(res.eps, res.ratios, res.eigenvalues)]
    manifest.record(io.atomic_write_text(a.out / "localization.csv", "\n".join(lines) + "\n"))
    dens = ["eps_index,l,re,im"]
    for i, g in enumerate(res.densities):
        dens += [f"{i},{l},{io._fmt(z.real)},{io._fmt(z.imag)}" for l, z in enumerate(g)]
    manifest.record(io.atomic_write_text(a.out / "densities.csv", "\n".join(dens) + "\n"))
    print(json.dumps({"ratios": res.ratios.tolist(), "monotone": res.monotone}))


HANDLERS = {"simulate": cmd_simulate, "mie": cmd_mie, "spectrum": cmd_spectrum,
            "reconstruct": cmd_reconstruct, "shrink": cmd_shrink, "localize": cmd_localize}


def _config_echo(a):
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(a).items())}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    manifest = io.RunManifest(a.command, _config_echo(a))
    try:
        _validate(a)
        a.out.mkdir(parents=True, exist_ok=True)
        with manifest.stage("total"):
            HANDLERS[a.command](a, manifest)
        manifest.write(a.out)
    except (ConvergenceError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"monoscat: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, KeyError, TypeError, OSError) as exc:
        print(f"monoscat: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
