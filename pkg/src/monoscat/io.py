"""Text file formats: far field matrices, fields, spectra, indicator maps, manifests.

Every float is written with 17 significant digits so a write/read cycle
reproduces the binary value exactly. All writers go through a temporary file
in the target directory followed by an atomic rename.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .forward import DirectionGrid, TotalField
from .operators import FarFieldMatrix


class FileFormatError(ValueError):
    """Malformed input file; the message carries ``path:line``."""


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


# -- far field matrices ------------------------------------------------------

def format_matrix(values, k: float) -> str:
    values = np.asarray(values, dtype=complex)
    n = values.shape[0]
    lines = [f"{n},{_fmt(k)}"]
    for l in range(n):
        for m in range(n):
            z = values[l, m]
            lines.append(f"{l},{m},{_fmt(z.real)},{_fmt(z.imag)}")
    return "\n".join(lines) + "\n"


def write_matrix(path, F: FarFieldMatrix) -> Path:
    """Header ``N,k`` followed by one ``l,m,re,im`` row per entry (0-based)."""
    return atomic_write_text(path, format_matrix(F.values, F.k))


def read_matrix(path) -> FarFieldMatrix:
    path = Path(path)
    with open(path) as fh:
        lines = fh.read().splitlines()

    def fail(lineno, msg):
        raise FileFormatError(f"{path}:{lineno}: {msg}")

    if not lines:
        fail(1, "empty file, expected header 'N,k'")
    head = lines[0].split(",")
    try:
        n, k = int(head[0]), float(head[1])
        if len(head) != 2:
            raise ValueError
    except (ValueError, IndexError):
        fail(1, f"bad header {lines[0]!r}, expected 'N,k'")
    if n < 1 or not k > 0:
        fail(1, f"header needs N >= 1 and k > 0, got N={n}, k={k}")
    values = np.full((n, n), np.nan, dtype=complex)
    rows = [(i + 2, s) for i, s in enumerate(lines[1:]) if s.strip()]
    if len(rows) != n * n:
        fail(len(lines), f"expected {n * n} entries, found {len(rows)}")
    for lineno, s in rows:
        parts = s.split(",")
        if len(parts) != 4:
            fail(lineno, f"expected 'l,m,re,im', got {s!r}")
        try:
            l, m = int(parts[0]), int(parts[1])
            re, im = float(parts[2]), float(parts[3])
        except ValueError:
            fail(lineno, f"unparseable entry {s!r}")
        if not (0 <= l < n and 0 <= m < n):
            fail(lineno, f"index ({l},{m}) outside a {n}x{n} matrix")
        if not np.isnan(values[l, m].real):
            fail(lineno, f"duplicate entry ({l},{m})")
        if not (np.isfinite(re) and np.isfinite(im)):
            fail(lineno, "non-finite value")
        values[l, m] = complex(re, im)
    return FarFieldMatrix(values, k, DirectionGrid(n))


# -- other tables ------------------------------------------------------------

def write_total_field(path, u: TotalField) -> Path:
    m = u.values.shape[0]
    lines = ["row,col,re,im"]
    for r in range(m):
        for c in range(m):
            z = u.values[r, c]
            lines.append(f"{r},{c},{_fmt(z.real)},{_fmt(z.imag)}")
    return atomic_write_text(path, "\n".join(lines) + "\n")


def write_spectrum(path, eigenvalues, residuals=None) -> Path:
    """``index,re,im,circle_residual``; residual column left empty when not given."""
    lam = np.asarray(eigenvalues, dtype=complex)
    lines = ["index,re,im,circle_residual"]
    for i, z in enumerate(lam):
        r = "" if residuals is None else _fmt(residuals[i])
        lines.append(f"{i},{_fmt(z.real)},{_fmt(z.imag)},{r}")
    return atomic_write_text(path, "\n".join(lines) + "\n")


def write_indicator_csv(path, imap) -> Path:
    pix = imap.grid
    rows, cols = pix.rows_cols()
    flat = imap.values.ravel()
    lines = ["j,row,col,z_x,z_y,I"]
    for j in range(pix.J):
        z = pix.centers[j]
        lines.append(f"{j},{rows[j]},{cols[j]},{_fmt(z[0])},{_fmt(z[1])},{int(flat[j])}")
    return atomic_write_text(path, "\n".join(lines) + "\n")


def format_pgm(values) -> str:
    """Plain (P2) greymap with the maximum count as max value; image row 0 is the top."""
    v = np.asarray(values, dtype=np.int64)
    if v.ndim != 2 or v.min(initial=0) < 0:
        raise ValueError("PGM needs a 2D array of non-negative counts")
    top_down = v[::-1]
    maxval = max(int(v.max()), 1)
    lines = ["P2", f"{v.shape[1]} {v.shape[0]}", str(maxval)]
    lines += [" ".join(str(int(x)) for x in row) for row in top_down]
    return "\n".join(lines) + "\n"


def write_pgm(path, imap) -> Path:
    return atomic_write_text(path, format_pgm(imap.values))


def read_pgm(path) -> np.ndarray:
    """Inverse of :func:`write_pgm`; returns counts in ``[row, col]`` layout."""
    tokens = Path(path).read_text().split()
    if not tokens or tokens[0] != "P2":
        raise FileFormatError(f"{path}:1: not a plain PGM (P2) file")
    w, h, _ = int(tokens[1]), int(tokens[2]), int(tokens[3])
    data = np.array([int(t) for t in tokens[4:]], dtype=np.int64)
    if data.size != w * h:
        raise FileFormatError(f"{path}: expected {w * h} pixel values, found {data.size}")
    return data.reshape(h, w)[::-1]


def write_json(path, obj) -> Path:
    return atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


# -- noise -------------------------------------------------------------------

def add_multiplicative_noise(values, level: float, seed: int) -> np.ndarray:
    """``F * (1 + level * xi)`` with ``xi`` standard complex Gaussian per entry."""
    if not 0 <= level < 1:
        raise ValueError("noise level must lie in [0, 1)")
    values = np.asarray(values, dtype=complex)
    if level == 0:
        return values.copy()
    rng = np.random.default_rng(seed)
    xi = (rng.standard_normal(values.shape) + 1j * rng.standard_normal(values.shape)) / np.sqrt(2)
    return values * (1 + level * xi)


# -- run manifest ------------------------------------------------------------

@dataclass
class RunManifest:
    """Config echo, timings per stage and checksums of every output file."""

    command: str
    config: dict
    version: str = __version__
    timings: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)

    @contextmanager
    def stage(self, name):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = time.perf_counter() - t0

    def record(self, path):
        path = Path(path)
        self.outputs[path.name] = sha256_file(path)
        return path

    def write(self, out_dir) -> Path:
        return write_json(Path(out_dir) / "manifest.json", asdict(self))
