"""Pure NumPy implementations of the hot kernels (fallback for ``_kernels``)."""

import numpy as np

_PIXEL_CHUNK = 128
_POINT_CHUNK = 4096


def winding_numbers(curve, points):
    """Winding number of the closed polygon ``curve`` around each point."""
    curve = np.ascontiguousarray(curve, dtype=float)
    points = np.ascontiguousarray(points, dtype=float)
    x0, y0 = curve[:, 0], curve[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    out = np.zeros(len(points), dtype=np.int64)
    for start in range(0, len(points), _POINT_CHUNK):
        px = points[start:start + _POINT_CHUNK, 0][:, None]
        py = points[start:start + _POINT_CHUNK, 1][:, None]
        cross = (x1 - x0) * (py - y0) - (px - x0) * (y1 - y0)
        up = (y0 <= py) & (y1 > py) & (cross > 0)
        down = (y0 > py) & (y1 <= py) & (cross < 0)
        out[start:start + _POINT_CHUNK] = up.sum(axis=1) - down.sum(axis=1)
    return out


def pixel_eig_counts(base, coef, kdirs, centers, delta):
    """Signed eigenvalue counts of ``base - coef * v_j v_j^*`` for every pixel.

    ``v_j[l] = exp(-i kdirs[l] . centers[j])``. Returns ``(n_neg, n_pos)`` with
    eigenvalues below ``-delta`` / above ``+delta``.
    """
    base = np.asarray(base, dtype=complex)
    J = len(centers)
    n_neg = np.zeros(J, dtype=np.int64)
    n_pos = np.zeros(J, dtype=np.int64)
    for start in range(0, J, _PIXEL_CHUNK):
        z = centers[start:start + _PIXEL_CHUNK]
        v = np.exp(-1j * (z @ kdirs.T))
        stack = base[None, :, :] - coef * (v[:, :, None] * v.conj()[:, None, :])
        lam = np.linalg.eigvalsh(stack, UPLO="L")
        n_neg[start:start + len(z)] = np.count_nonzero(lam < -delta, axis=1)
        n_pos[start:start + len(z)] = np.count_nonzero(lam > delta, axis=1)
    return n_neg, n_pos
