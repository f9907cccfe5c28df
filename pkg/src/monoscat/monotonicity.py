"""Eigenvalue-counting monotonicity tests and reconstructions.

``A <=_fin B`` is certified on a finite grid by counting the eigenvalues of
``B - A`` below ``-delta`` and comparing the count with an explicit budget.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import kernels
from .forward import DirectionGrid
from .operators import (FarFieldMatrix, assemble_born_pixel, born_region_matrix, hermitian_part,
                        scattering_matrix)
from .scene import PixelGrid, make_pixel_grid

log = logging.getLogger(__name__)

DEFAULT_DELTA = 1e-14
DEFAULT_DELTA_REL = 1e-10


@dataclass(frozen=True)
class EigCountReport:
    n_negative: int
    n_positive: int
    n_discarded: int
    delta: float
    eigenvalues: np.ndarray

    @property
    def N(self):
        return self.n_negative + self.n_positive + self.n_discarded


def _as_hermitian(H):
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("expected a square matrix")
    scale = np.linalg.norm(H)
    if np.linalg.norm(H - H.conj().T) > 1e-12 * max(scale, 1e-300):
        raise ValueError("matrix is not Hermitian to within 1e-12 relative")
    return hermitian_part(H)


def resolve_delta(H, delta=None, delta_rel=None) -> float:
    """Absolute threshold: ``delta`` if given, else ``delta_rel * ||H||_2``."""
    if delta is not None and delta_rel is not None:
        raise ValueError("pass either an absolute or a relative threshold, not both")
    if delta_rel is not None:
        return float(delta_rel) * float(np.linalg.norm(H, 2))
    return DEFAULT_DELTA if delta is None else float(delta)


def count_signed_eigs(H, delta: float | None = None, delta_rel: float | None = None) -> EigCountReport:
    """Full eigen-decomposition of a Hermitian matrix with the +-delta counting rule."""
    Hs = _as_hermitian(H)
    d = resolve_delta(Hs, delta, delta_rel)
    try:
        lam = np.linalg.eigvalsh(Hs)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"eigensolver failed: {exc}") from exc
    neg = int(np.count_nonzero(lam < -d))
    pos = int(np.count_nonzero(lam > d))
    return EigCountReport(neg, pos, len(lam) - neg - pos, d, np.sort(lam))


def monotonicity_gap(F1: FarFieldMatrix, F2: FarFieldMatrix) -> np.ndarray:
    """``Re(S_1^* (F_2 - F_1))`` with ``S_1`` the scattering matrix of ``F1``."""
    if F1.values.shape != F2.values.shape:
        raise ValueError(f"dimension mismatch: {F1.values.shape} vs {F2.values.shape}")
    if not math.isclose(F1.k, F2.k):
        raise ValueError("far field matrices use different wavenumbers")
    S1 = scattering_matrix(F1).values
    return hermitian_part(S1.conj().T @ (F2.values - F1.values))


@dataclass(frozen=True)
class LeqFinResult:
    holds: bool
    report: EigCountReport

    def __bool__(self):
        return self.holds


def leqfin_test(A, B, delta: float | None = None, budget: int = 0,
                delta_rel: float | None = None) -> LeqFinResult:
    """Does ``B - A`` have at most ``budget`` eigenvalues below ``-delta``?"""
    A, B = np.asarray(A), np.asarray(B)
    if A.shape != B.shape:
        raise ValueError("operands must have the same shape")
    rep = count_signed_eigs(B - A, delta, delta_rel)
    return LeqFinResult(rep.n_negative <= budget, rep)


@dataclass(frozen=True)
class IndicatorMap:
    grid: PixelGrid
    values: np.ndarray          # (J1, J1) in [row, col] layout
    alpha: float
    sign: int
    delta: float
    baseline: int
    significant: np.ndarray | None = None   # per-pixel count of |lambda| > delta

    def lower_upper(self):
        v = np.unique(self.values)
        return int(v.min()), int(v.max())


def indicator_map(F: FarFieldMatrix, pixels: PixelGrid, alpha: float, sign: int = 1,
                  delta: float | None = None, delta_rel: float | None = None,
                  backend=None, threads=None) -> IndicatorMap:
    """Per-pixel count of eigenvalues below ``-delta`` of ``sign (Re F - alpha T_P)``."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if alpha * sign <= 0:
        warnings.warn(f"alpha={alpha} has the wrong sign for sign={sign}; the test is not "
                      "covered by the sign-definite characterizations", stacklevel=2)
    base = sign * F.real_part()
    d = resolve_delta(base, delta, delta_rel)
    baseline = count_signed_eigs(base, d).n_negative
    w = F.grid.weight * F.k ** 2 * pixels.pixel_area
    kdirs = F.k * F.grid.directions
    n_neg, n_pos = kernels.pixel_eig_counts(base, sign * alpha * w, kdirs, pixels.centers, d,
                                            backend=backend, threads=threads)
    shape = (pixels.pixels_per_axis, pixels.pixels_per_axis)
    return IndicatorMap(pixels, n_neg.reshape(shape), float(alpha), int(sign), d, baseline,
                        (n_neg + n_pos).reshape(shape))


@dataclass(frozen=True)
class TwoSidedResult:
    inside: bool
    lower: LeqFinResult      # alpha T_B <=_fin Re F
    upper: LeqFinResult      # Re F <=_fin beta T_B


def twosided_test(F: FarFieldMatrix, pixels: PixelGrid, region, alpha: float, beta: float,
                  delta: float | None = None, budget: int = 0, T_region=None,
                  delta_rel: float | None = None) -> TwoSidedResult:
    """Check ``alpha T_B <=_fin Re F <=_fin beta T_B`` for the pixel region ``B``.

    ``region`` is a boolean mask over the pixels. ``T_B`` is the sum of the
    exactly integrated pixel Born matrices unless ``T_region`` is supplied.
    Without an explicit threshold the relative one (``DEFAULT_DELTA_REL``) is
    used, since summing many pixel matrices leaves rounding noise well above
    an absolute ``1e-14``.
    """
    if alpha > 0 or beta < 0:
        raise ValueError("two-sided test needs alpha <= 0 <= beta")
    mask = np.asarray(region, dtype=bool).ravel()
    if mask.size != pixels.J:
        raise ValueError("region mask does not match the pixel grid")
    T = born_region_matrix(pixels, mask, F.grid, F.k) if T_region is None else T_region
    if delta is None and delta_rel is None:
        delta_rel = DEFAULT_DELTA_REL
    ReF = F.real_part()
    lower = leqfin_test(alpha * T, ReF, delta, budget, delta_rel)
    upper = leqfin_test(ReF, beta * T, delta, budget, delta_rel)
    return TwoSidedResult(lower.holds and upper.holds, lower, upper)


def shrink_reconstruct(F: FarFieldMatrix, R: float, pixels_per_axis: int, alpha: float,
                       beta: float, delta: float | None = None, budget: int = 0,
                       delta_rel: float | None = None) -> np.ndarray:
    """Greedy shrinking of ``[-R, R]^2`` while the two-sided test still holds.

    Pixels are visited in row-major order, repeatedly, until no pixel can be
    removed. Returns the surviving boolean mask in ``[row, col]`` layout.
    """
    pixels = make_pixel_grid(R, pixels_per_axis)
    mats = np.stack([assemble_born_pixel(z, pixels.pixel_area, F.grid, F.k, exact=True).values
                     for z in pixels.centers])
    mask = np.ones(pixels.J, dtype=bool)
    T = mats.sum(axis=0)
    if not twosided_test(F, pixels, mask, alpha, beta, delta, budget, T, delta_rel).inside:
        raise ValueError("sampling region too small or budget too strict: "
                         "the full probing region fails the two-sided test")
    changed = True
    sweeps = 0
    while changed:
        changed = False
        sweeps += 1
        for j in range(pixels.J):
            if not mask[j]:
                continue
            mask[j] = False
            # exact zero once the region is empty, not accumulated rounding
            trial = T - mats[j] if mask.any() else np.zeros_like(T)
            if twosided_test(F, pixels, mask, alpha, beta, delta, budget, trial, delta_rel).inside:
                T = trial
                changed = True
            else:
                mask[j] = True
    log.info("shrink converged after %d sweeps, %d pixels kept", sweeps, int(mask.sum()))
    return mask.reshape(pixels_per_axis, pixels_per_axis)


@dataclass(frozen=True)
class LocalizationResult:
    densities: list
    ratios: np.ndarray
    eps: np.ndarray
    eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.ratios) >= -1e-9 * np.abs(self.ratios[:-1])))


def herglotz_sampling_matrix(points, weights, dirs: DirectionGrid, k: float) -> np.ndarray:
    """Rows ``sqrt(w_i) (2 pi / N) exp(i k x_i . theta_m)``: g -> weighted field samples."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    w = np.broadcast_to(np.asarray(weights, dtype=float), (len(pts),))
    return np.sqrt(w)[:, None] * dirs.weight * np.exp(1j * k * (pts @ dirs.directions.T))


def disc_samples(center, radius, n_min=200):
    """Uniform grid points inside a disc with equal quadrature weights."""
    m = 4
    while True:
        c = (np.arange(m) + 0.5) / m * 2 - 1
        X, Y = np.meshgrid(c, c)
        keep = X ** 2 + Y ** 2 < 1
        if keep.sum() >= n_min:
            break
        m += 2
    pts = radius * np.column_stack([X[keep], Y[keep]]) + np.asarray(center, dtype=float)
    return pts, math.pi * radius ** 2 / keep.sum()


def localize_density(B_points, D_points, dirs: DirectionGrid, k: float, eps_schedule,
                     B_weights=1.0, D_weights=1.0) -> LocalizationResult:
    """Densities concentrating Herglotz energy on ``B`` while suppressing it on ``D``.

    For each ``eps`` the top generalized eigenvector of
    ``L_B^* L_B g = lambda (L_D^* L_D + eps I) g`` is returned (unit norm), with
    the energy ratio ``||L_B g||^2 / ||L_D g||^2``. With no ``D`` points the
    ratio reported is ``lambda`` itself.
    """
    eps = np.asarray(eps_schedule, dtype=float)
    if eps.ndim != 1 or eps.size == 0 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise ValueError("eps_schedule must be strictly decreasing positive values")
    if len(np.atleast_2d(B_points)) == 0:
        raise ValueError("B needs at least one sample point")
    LB = herglotz_sampling_matrix(B_points, B_weights, dirs, k)
    D_points = np.asarray(D_points, dtype=float).reshape(-1, 2)
    LD = herglotz_sampling_matrix(D_points, D_weights, dirs, k) if len(D_points) else None
    GB = hermitian_part(LB.conj().T @ LB)
    GD = hermitian_part(LD.conj().T @ LD) if LD is not None else np.zeros_like(GB)
    dens, ratios, lams = [], [], []
    for e in eps:
        try:
            lam, vec = scipy.linalg.eigh(GB, GD + e * np.eye(dirs.N),
                                         subset_by_index=[dirs.N - 1, dirs.N - 1])
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise np.linalg.LinAlgError(f"generalized eigenproblem failed at eps={e}: {exc}") from exc
        g = vec[:, 0] / np.linalg.norm(vec[:, 0])
        eB = np.linalg.norm(LB @ g) ** 2
        if LD is None:
            ratio = float(lam[0])
        else:
            ratio = float(eB / np.linalg.norm(LD @ g) ** 2)
        dens.append(g)
        ratios.append(ratio)
        lams.append(float(lam[0]))
    return LocalizationResult(dens, np.array(ratios), eps, np.array(lams))
