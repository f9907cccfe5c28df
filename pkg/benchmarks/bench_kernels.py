"""Compare the compiled and NumPy kernel backends.

Usage: ``python3 benchmarks/bench_kernels.py [--pixels 2000] [--n-dirs 64] [--repeat 3]``

Both backends are timed on identical inputs and their outputs are checked for
equality before any timing is reported.
"""

import argparse
import time

import numpy as np

from monoscat import kernels
from monoscat.forward import DirectionGrid
from monoscat.scene import Kite


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--pixels", type=int, default=2000)
    p.add_argument("--n-dirs", type=int, default=64)
    p.add_argument("--points", type=int, default=20000)
    p.add_argument("--repeat", type=int, default=3)
    a = p.parse_args(argv)
    if kernels.BACKEND != "compiled":
        raise SystemExit("compiled extension not available; build with `pip install -e .`")

    rng = np.random.default_rng(0)
    n = a.n_dirs
    m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    base = (m + m.conj().T) / 2
    kd = 2.0 * DirectionGrid(n).directions
    centers = rng.uniform(-5, 5, (a.pixels, 2))
    curve = Kite(scale=1.5).boundary()
    pts = rng.uniform(-3, 3, (a.points, 2))

    cases = {
        f"pixel_eig_counts ({a.pixels} pixels, N={n})":
            lambda b: kernels.pixel_eig_counts(base, 0.1, kd, centers, 1e-12, backend=b, threads=1),
        f"winding_numbers ({a.points} points, {len(curve)} vertices)":
            lambda b: kernels.winding_numbers(curve, pts, backend=b),
    }
    print(f"{'kernel':<48} {'python [s]':>11} {'compiled [s]':>13} {'speed-up':>9}")
    for name, fn in cases.items():
        tp, outp = best_of(lambda: fn("python"), a.repeat)
        tc, outc = best_of(lambda: fn("compiled"), a.repeat)
        outp = outp if isinstance(outp, tuple) else (outp,)
        outc = outc if isinstance(outc, tuple) else (outc,)
        if not all(np.array_equal(x, y) for x, y in zip(outp, outc)):
            raise SystemExit(f"{name}: backends disagree")
        print(f"{name:<48} {tp:>11.3f} {tc:>13.3f} {tp / tc:>8.1f}x")


if __name__ == "__main__":
    main()
