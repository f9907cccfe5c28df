"""Discrete far field, scattering and Born operators on a direction grid.

Matrices act on densities sampled at the grid directions; the quadrature
weight ``2 pi / N`` is folded into every matrix, so the continuous pairing
``int g conj(A g) ds`` becomes ``(2 pi / N) * sum(g * conj(A @ g))``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .forward import (DirectionGrid, Herglotz, PlaneWave, SolverConfig, far_field_constant,
                      far_field_many, solve_many, solve_total_field)
from .scene import ContrastField, PixelGrid, Scene, rasterize

log = logging.getLogger(__name__)

__all__ = [
    "DirectionGrid", "FarFieldMatrix", "ScatteringMatrix", "BornPixelOperator",
    "SamplingWarning", "assemble_far_field_matrix", "far_field_matrix_from_contrast",
    "scattering_matrix", "assemble_born_pixel", "born_region_matrix", "herglotz_energy",
    "check_energy_identity", "circle_parameters", "circle_residuals", "default_resolution",
]


class SamplingWarning(UserWarning):
    """Direction grid too coarse for the scatterer size (N < 2kR)."""


@dataclass(frozen=True)
class FarFieldMatrix:
    values: np.ndarray
    k: float
    grid: DirectionGrid
    contrast: ContrastField | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.N, self.grid.N):
            raise ValueError(f"far field matrix must be {self.grid.N}x{self.grid.N}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("far field matrix has non-finite entries")
        object.__setattr__(self, "values", v)

    @property
    def N(self):
        return self.grid.N

    def real_part(self) -> np.ndarray:
        """Self-adjoint part ``(F + F^*) / 2``."""
        return hermitian_part(self.values)


@dataclass(frozen=True)
class ScatteringMatrix:
    values: np.ndarray
    k: float

    def unitarity_residual(self) -> float:
        n = self.values.shape[0]
        return float(np.linalg.norm(self.values.conj().T @ self.values - np.eye(n), 2))


@dataclass(frozen=True)
class BornPixelOperator:
    center: tuple
    area: float
    values: np.ndarray


def hermitian_part(a) -> np.ndarray:
    a = np.asarray(a)
    return 0.5 * (a + a.conj().T)


def default_resolution(scene: Scene, box_halfwidth: float, points_per_wavelength: float = 20.0,
                       minimum: int = 64) -> int:
    """Cells per axis so the wavelength inside the densest medium is resolved."""
    n_max = math.sqrt(1.0 + max(scene.q_max, 0.0))
    wavelength = 2 * math.pi / (scene.k * n_max)
    m = math.ceil(2 * box_halfwidth * points_per_wavelength / wavelength)
    m = max(minimum, m)
    return m + (m % 2)


def _sampling_check(N, k, R):
    if N < 2 * k * R:
        warnings.warn(f"N={N} directions is below 2kR={2 * k * R:.1f}; far field under-resolved",
                      SamplingWarning, stacklevel=3)


def far_field_matrix_from_contrast(q: ContrastField, k: float, dirs: DirectionGrid,
                                   cfg: SolverConfig | None = None, threads=None) -> FarFieldMatrix:
    """``(2 pi / N) [u_inf(xhat_l; theta_m)]`` from one plane-wave solve per column."""
    if not np.any(q.values):
        return FarFieldMatrix(np.zeros((dirs.N, dirs.N), dtype=complex), k, dirs, q)
    incidents = [PlaneWave((float(t[0]), float(t[1]))) for t in dirs.directions]
    fields = solve_many(q, incidents, k, cfg, threads=threads)
    cols = far_field_many(q, fields, dirs)
    log.info("assembled %dx%d far field matrix (max GMRES iterations %d)", dirs.N, dirs.N,
             max(u.iterations for u in fields))
    return FarFieldMatrix(dirs.weight * cols, k, dirs, q)


def assemble_far_field_matrix(scene: Scene, dirs: DirectionGrid, cfg: SolverConfig | None = None,
                              box_halfwidth: float | None = None, resolution: int | None = None,
                              threads=None) -> FarFieldMatrix:
    """Simulate the far field matrix of ``scene`` on the grid ``dirs``."""
    _sampling_check(dirs.N, scene.k, scene.R)
    b = scene.R if box_halfwidth is None else box_halfwidth
    m = default_resolution(scene, b) if resolution is None else resolution
    q = rasterize(scene, b, m)
    return far_field_matrix_from_contrast(q, scene.k, dirs, cfg, threads)


def scattering_matrix(F: FarFieldMatrix) -> ScatteringMatrix:
    if not F.k > 0:
        raise ValueError("wavenumber must be positive")
    c2 = abs(far_field_constant(F.k)) ** 2
    return ScatteringMatrix(np.eye(F.N) + 2j * F.k * c2 * F.values, F.k)


def circle_parameters(k: float):
    """Centre and radius of the circle carrying the far field operator's eigenvalues."""
    r = 1.0 / (2 * k * abs(far_field_constant(k)) ** 2)
    return 1j * r, r


def circle_residuals(F: FarFieldMatrix):
    """Eigenvalues of ``F`` and their relative distances to the circle."""
    lam = np.linalg.eigvals(F.values)
    center, radius = circle_parameters(F.k)
    return lam, np.abs(np.abs(lam - center) - radius) / radius


def _pixel_vector(z, dirs, k):
    return np.exp(-1j * k * (dirs.directions @ np.asarray(z, dtype=float)))


def assemble_born_pixel(z, area: float, dirs: DirectionGrid, k: float,
                        exact: bool = False) -> BornPixelOperator:
    """Born operator of a square pixel with centre ``z`` and the given area.

    The default uses the constant-phase (midpoint) approximation, which is the
    rank-one matrix ``(2 pi / N) k^2 |P| v v^*`` with ``v_l = exp(-i k z.theta_l)``.
    ``exact=True`` integrates the phase over the square pixel instead.
    """
    if not area > 0:
        raise ValueError("pixel area must be positive")
    v = _pixel_vector(z, dirs, k)
    w = dirs.weight * k * k * area
    mat = w * np.outer(v, v.conj())
    if exact:
        side = math.sqrt(area)
        theta = dirs.directions
        diff = theta[None, :, :] - theta[:, None, :]          # theta_m - theta_l
        arg = 0.5 * k * side * diff
        mat = mat * np.sinc(arg[..., 0] / np.pi) * np.sinc(arg[..., 1] / np.pi)
    # mirror the upper triangle so the result is Hermitian to the last bit
    upper = np.triu(mat, 1)
    mat = upper + upper.conj().T + np.diag(np.diag(mat).real)
    return BornPixelOperator(tuple(float(c) for c in z), float(area), mat)


def born_region_matrix(pixels: PixelGrid, mask, dirs: DirectionGrid, k: float,
                       exact: bool = True) -> np.ndarray:
    """Sum of pixel Born matrices over the pixels selected by ``mask``."""
    mask = np.asarray(mask, dtype=bool).ravel()
    total = np.zeros((dirs.N, dirs.N), dtype=complex)
    for z in pixels.centers[mask]:
        total += assemble_born_pixel(z, pixels.pixel_area, dirs, k, exact=exact).values
    return total


def herglotz_energy(T, g, dirs: DirectionGrid | None = None) -> float:
    """Quadrature of ``int g conj(T g) ds``; equals ``k^2 int_P |u_g|^2`` for a Born matrix."""
    mat = T.values if hasattr(T, "values") else np.asarray(T)
    g = np.asarray(g, dtype=complex).ravel()
    if mat.shape != (len(g), len(g)):
        raise ValueError("density length does not match the operator")
    weight = 2 * np.pi / len(g) if dirs is None else dirs.weight
    val = weight * np.vdot(g, mat @ g)
    scale = weight * np.linalg.norm(mat, 2) * np.vdot(g, g).real
    if abs(val.imag) > 1e-12 * max(scale, 1e-300):
        raise ValueError("operator is not Hermitian: imaginary energy")
    return float(val.real)


def check_energy_identity(F: FarFieldMatrix, source, g, cfg: SolverConfig | None = None) -> float:
    """``|int g conj(F g) - k^2 int q u_g conj(u_{q,g})|`` with independent solves.

    ``source`` is the :class:`ContrastField` the matrix was built from, or a
    :class:`Scene` (rasterized on the grid recorded in ``F``). The right side
    uses a fresh Herglotz-incident solve rather than the matrix columns.
    """
    g = np.asarray(g, dtype=complex).ravel()
    if isinstance(source, Scene):
        if F.contrast is None:
            raise ValueError("matrix carries no grid; pass the ContrastField instead")
        q = rasterize(source, F.contrast.box_halfwidth, F.contrast.resolution)
    else:
        q = source
    lhs = F.grid.weight * np.sum(g * np.conj(F.values @ g))
    inc = Herglotz(g, F.grid)
    u = solve_total_field(q, inc, F.k, cfg)
    u_inc = inc.evaluate(q.centers(), F.k)
    rhs = F.k ** 2 * q.cell_area * np.sum(q.values * u_inc * np.conj(u.values))
    return float(abs(lhs - rhs))
