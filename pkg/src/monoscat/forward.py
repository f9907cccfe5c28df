"""Direct scattering: Lippmann-Schwinger volume solver, far fields, Mie oracle.

The total field solves ``u = u_inc + k^2 V_q u`` with ``V_q u = int Phi(. - y)
q(y) u(y) dy`` and ``Phi(x) = (i/4) H_0^(1)(k|x|)``. On the uniform cell-centred
grid of a :class:`~monoscat.scene.ContrastField` the convolution is a midpoint
rule applied with a zero-padded FFT; the singular self-cell weight is the exact
integral of ``Phi`` over a disc with the cell's area.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.fft
from scipy.sparse.linalg import LinearOperator, gmres
from threadpoolctl import threadpool_limits

from . import special
from .kernels import thread_count
from .scene import ContrastField

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    """Iterative solve or series evaluation did not reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class GridMismatchError(ValueError):
    pass


def far_field_constant(k: float, d: int = 2) -> complex:
    """Constant ``C_d`` of the far-field expansion (d = 2 or 3)."""
    if d == 2:
        return np.exp(1j * np.pi / 4) / np.sqrt(8 * np.pi * k)
    if d == 3:
        return 1.0 / (4 * np.pi)
    raise ValueError("dimension must be 2 or 3")


@dataclass(frozen=True)
class DirectionGrid:
    """``N`` equidistant unit directions ``(cos phi_n, sin phi_n)``, ``phi_n = 2 pi n / N``."""

    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"direction grid needs N >= 2, got {self.N}")

    @property
    def angles(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.N) / self.N

    @property
    def directions(self) -> np.ndarray:
        a = self.angles
        return np.column_stack([np.cos(a), np.sin(a)])

    @property
    def weight(self) -> float:
        return 2.0 * np.pi / self.N

    def opposite_index(self) -> np.ndarray:
        """Index of ``-theta_n`` for every n (requires even N)."""
        if self.N % 2:
            raise ValueError("opposite directions are on the grid only for even N")
        return (np.arange(self.N) + self.N // 2) % self.N


@dataclass(frozen=True)
class PlaneWave:
    direction: tuple

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        if d.shape != (2,) or abs(np.hypot(*d) - 1.0) > 1e-12:
            raise ValueError("plane-wave direction must be a unit vector in R^2")
        object.__setattr__(self, "direction", (float(d[0]), float(d[1])))

    @classmethod
    def from_angle(cls, angle):
        return cls((math.cos(angle), math.sin(angle)))

    def evaluate(self, points, k):
        p = np.asarray(points, dtype=float)
        return np.exp(1j * k * (p[..., 0] * self.direction[0] + p[..., 1] * self.direction[1]))


@dataclass(frozen=True)
class Herglotz:
    """Herglotz wave function with density sampled on a direction grid."""

    density: np.ndarray
    grid: DirectionGrid

    def __post_init__(self):
        g = np.array(self.density, dtype=complex).ravel()
        if len(g) != self.grid.N:
            raise ValueError(f"density has {len(g)} values for a grid of {self.grid.N} directions")
        g.setflags(write=False)
        object.__setattr__(self, "density", g)

    def evaluate(self, points, k):
        return evaluate_herglotz(self.density, self.grid, k, points)


def evaluate_herglotz(g, dirs: DirectionGrid, k: float, points) -> np.ndarray:
    """``(2 pi / N) sum_m exp(i k x . theta_m) g_m`` at every point ``x``."""
    g = np.asarray(g, dtype=complex).ravel()
    if len(g) != dirs.N:
        raise ValueError(f"density has {len(g)} values for a grid of {dirs.N} directions")
    p = np.asarray(points, dtype=float)
    flat = p.reshape(-1, 2)
    out = np.empty(len(flat), dtype=complex)
    theta = dirs.directions
    for start in range(0, len(flat), 8192):
        phase = flat[start:start + 8192] @ theta.T
        out[start:start + 8192] = np.exp(1j * k * phase) @ g
    return (dirs.weight * out).reshape(p.shape[:-1])


@dataclass(frozen=True)
class SolverConfig:
    gmres_tolerance: float = 1e-10
    max_iterations: int = 500
    points_per_wavelength_min: float = 10.0
    restart: int = 50

    def __post_init__(self):
        if not self.gmres_tolerance > 0:
            raise ValueError("gmres_tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class TotalField:
    box_halfwidth: float
    values: np.ndarray
    incident: object
    k: float
    iterations: int = 0
    residual: float = 0.0

    @property
    def resolution(self):
        return self.values.shape[0]


def self_cell_weight(k: float, h: float) -> complex:
    """``k^2`` times the integral of ``Phi`` over the disc of area ``h^2``."""
    rho = h / math.sqrt(math.pi)
    return 0.5j * math.pi * k * rho * complex(special.hankel1(1, k * rho)) - 1.0


def _kernel_spectrum(k, h, m):
    """FFT of the circulant embedding of the weighted Green's function."""
    idx = np.arange(m + 1)
    X, Y = np.meshgrid(idx * h, idx * h)
    r = np.hypot(X, Y)
    quarter = np.empty_like(r, dtype=complex)
    nz = r > 0
    quarter[nz] = (0.25j * k * k * h * h) * special.hankel1(0, k * r[nz])
    quarter[0, 0] = self_cell_weight(k, h)
    # offsets 0..m-1 then -m..-1 along each axis; |-m| is unused padding
    order = np.concatenate([np.arange(m), np.arange(m, 0, -1)])
    full = quarter[np.ix_(order, order)]
    return scipy.fft.fft2(full, workers=1)


class LippmannSchwinger:
    """Discrete operator ``u -> u - k^2 V_q u`` on a contrast grid."""

    def __init__(self, contrast: ContrastField, k: float):
        if not k > 0:
            raise ValueError(f"wavenumber must be positive, got {k}")
        self.contrast = contrast
        self.k = float(k)
        self.m = contrast.resolution
        self.h = contrast.spacing
        self.q = contrast.values
        self._kernel_hat = _kernel_spectrum(self.k, self.h, self.m)

    def convolve(self, field):
        """``k^2 V`` applied to a grid function (no contrast factor)."""
        m = self.m
        padded = scipy.fft.fft2(field, s=(2 * m, 2 * m), workers=1)
        return scipy.fft.ifft2(padded * self._kernel_hat, workers=1)[:m, :m]

    def matvec(self, u):
        u = u.reshape(self.m, self.m)
        return (u - self.convolve(self.q * u)).ravel()

    def as_linear_operator(self):
        n = self.m * self.m
        return LinearOperator((n, n), matvec=self.matvec, dtype=complex)


def _check_resolution(contrast, k, cfg):
    wavelength = 2 * math.pi / k
    ppw = wavelength / contrast.spacing
    if ppw < cfg.points_per_wavelength_min:
        raise ValueError(
            f"grid has {ppw:.1f} points per wavelength, below the minimum "
            f"{cfg.points_per_wavelength_min}; increase the resolution")


def _gmres(op, rhs, cfg):
    cycles = max(1, math.ceil(cfg.max_iterations / cfg.restart))
    count = [0]

    def cb(_):
        count[0] += 1

    sol, info = gmres(op.as_linear_operator(), rhs, x0=rhs.copy(), rtol=cfg.gmres_tolerance,
                      atol=0.0, restart=cfg.restart, maxiter=cycles,
                      callback=cb, callback_type="pr_norm")
    residual = float(np.linalg.norm(op.matvec(sol) - rhs) / np.linalg.norm(rhs))
    if info != 0 and residual > cfg.gmres_tolerance:
        raise ConvergenceError(
            f"GMRES did not converge in {cfg.max_iterations} iterations "
            f"(relative residual {residual:.3e})", residual)
    return sol, count[0], residual


def solve_total_field(q: ContrastField, inc, k: float, cfg: SolverConfig | None = None,
                      operator: LippmannSchwinger | None = None) -> TotalField:
    """Total field on the grid of ``q`` for a plane-wave or Herglotz incident field."""
    cfg = cfg or SolverConfig()
    if not k > 0:
        raise ValueError(f"wavenumber must be positive, got {k}")
    _check_resolution(q, k, cfg)
    u_inc = inc.evaluate(q.centers(), k)
    if not np.any(q.values):
        return TotalField(q.box_halfwidth, u_inc, inc, float(k))
    op = operator or LippmannSchwinger(q, k)
    sol, iters, res = _gmres(op, u_inc.ravel(), cfg)
    return TotalField(q.box_halfwidth, sol.reshape(u_inc.shape), inc, float(k), iters, res)


def solve_many(q: ContrastField, incidents, k: float, cfg: SolverConfig | None = None,
               threads: int | None = None):
    """Solve for several incident fields sharing one operator.

    Solves are independent; with ``threads > 1`` they run concurrently and the
    results are identical to the sequential ones.
    """
    cfg = cfg or SolverConfig()
    op = LippmannSchwinger(q, k) if np.any(q.values) else None
    threads = thread_count() if threads is None else threads

    def one(inc):
        return solve_total_field(q, inc, k, cfg, operator=op)

    with threadpool_limits(limits=1):
        if threads <= 1 or len(incidents) < 2:
            return [one(inc) for inc in incidents]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, incidents))


def _support(q: ContrastField):
    mask = q.values != 0
    return mask, q.centers()[mask]


def far_field(q: ContrastField, u: TotalField, dirs: DirectionGrid) -> np.ndarray:
    """``k^2 sum_cells q u exp(-i k xhat . y) |cell|`` for every grid direction."""
    if u.values.shape != q.values.shape or not math.isclose(u.box_halfwidth, q.box_halfwidth):
        raise GridMismatchError("total field and contrast live on different grids")
    mask, y = _support(q)
    if not mask.any():
        return np.zeros(dirs.N, dtype=complex)
    k = u.k
    src = q.values[mask] * u.values[mask]
    phase = np.exp(-1j * k * (dirs.directions @ y.T))
    return k * k * q.cell_area * (phase @ src)


def far_field_many(q: ContrastField, fields, dirs: DirectionGrid) -> np.ndarray:
    """Far fields of several solutions as columns of an ``N x len(fields)`` array."""
    for u in fields:
        if u.values.shape != q.values.shape:
            raise GridMismatchError("total field and contrast live on different grids")
    mask, y = _support(q)
    if not mask.any() or not fields:
        return np.zeros((dirs.N, len(fields)), dtype=complex)
    k = fields[0].k
    src = np.stack([q.values[mask] * u.values[mask] for u in fields], axis=1)
    phase = np.exp(-1j * k * (dirs.directions @ y.T))
    return k * k * q.cell_area * (phase @ src)


# ---------------------------------------------------------------------------
# Mie series for a homogeneous disc centred at the origin
# ---------------------------------------------------------------------------

def _default_terms(radius, q_const, k):
    x = k * radius * math.sqrt(1.0 + max(q_const, 0.0))
    return int(math.ceil(x + 4.0 * x ** (1.0 / 3.0) + 25))


@dataclass(frozen=True)
class MieCoefficients:
    radius: float
    q: float
    k: float
    scattered: np.ndarray      # beta_n, n >= 0: u_s = sum i^n beta_n H_n(kr) e^{in psi}
    interior: np.ndarray       # alpha_n: u = sum i^n alpha_n J_n(kappa r) e^{in psi}
    kappa: float = field(default=0.0)


def mie_coefficients(radius: float, q_const: float, k: float, n_terms: int | None = None) -> MieCoefficients:
    if not radius > 0:
        raise ValueError("radius must be positive")
    if not q_const > -1:
        raise ValueError("Mie oracle needs q > -1")
    if not k > 0:
        raise ValueError("wavenumber must be positive")
    n_terms = _default_terms(radius, q_const, k) if n_terms is None else int(n_terms)
    kappa = k * math.sqrt(1.0 + q_const)
    ka, kappa_a = k * radius, kappa * radius
    J, Y = special.bessel_jy(n_terms + 1, ka)
    H = J + 1j * Y
    Jin, _ = special.bessel_jy(n_terms + 1, kappa_a)
    dJ, dH, dJin = (special.derivative_table(t) for t in (J, H, Jin))
    J, H, Jin = J[:-1], H[:-1], Jin[:-1]
    num = kappa * J * dJin - k * dJ * Jin
    den = k * dH * Jin - kappa * H * dJin
    beta = num / den
    alpha = (J + beta * H) / Jin
    mag = np.abs(beta)
    if q_const != 0 and mag[-1] > 1e-14 * mag.sum():
        raise ConvergenceError(
            f"Mie series not converged with {n_terms} terms "
            f"(last coefficient {mag[-1]:.2e}, total {mag.sum():.2e})")
    return MieCoefficients(radius, q_const, k, beta, alpha, kappa)


def mie_far_field(radius: float, q_const: float, k: float, dirs: DirectionGrid,
                  n_terms: int | None = None) -> np.ndarray:
    """Analytic ``[u_inf(xhat_l; theta_m)]`` for a disc of constant contrast at the origin."""
    if q_const == 0:
        return np.zeros((dirs.N, dirs.N), dtype=complex)
    coef = mie_coefficients(radius, q_const, k, n_terms)
    psi = dirs.angles[:, None] - dirs.angles[None, :]
    n = np.arange(len(coef.scattered))
    eps = np.where(n == 0, 1.0, 2.0)
    pattern = (eps * coef.scattered) @ np.cos(n[:, None] * psi.ravel()[None, :])
    return (-4j * pattern).reshape(psi.shape)


def mie_total_field(radius: float, q_const: float, k: float, incident_angle: float, points,
                    n_terms: int | None = None) -> np.ndarray:
    """Analytic total field at ``points`` for a plane wave with the given incidence angle."""
    p = np.asarray(points, dtype=float)
    flat = p.reshape(-1, 2)
    r = np.hypot(flat[:, 0], flat[:, 1])
    psi = np.arctan2(flat[:, 1], flat[:, 0]) - incident_angle
    if q_const == 0:
        return PlaneWave.from_angle(incident_angle).evaluate(p, k)
    coef = mie_coefficients(radius, q_const, k, n_terms)
    nt = len(coef.scattered)
    n = np.arange(nt)
    weights = np.where(n == 0, 1.0, 2.0) * (1j ** n)
    out = np.empty(len(flat), dtype=complex)
    inside = r < radius
    at0 = r == 0
    out[at0] = coef.interior[0]
    ring = inside & ~at0
    if ring.any():
        Jin, _ = special.bessel_jy(nt - 1, coef.kappa * r[ring])
        ang = np.cos(n[:, None] * psi[ring][None, :])
        out[ring] = ((weights * coef.interior)[:, None] * Jin * ang).sum(axis=0)
    if (~inside).any():
        J, Y = special.bessel_jy(nt - 1, k * r[~inside])
        ang = np.cos(n[:, None] * psi[~inside][None, :])
        terms = weights[:, None] * (J + coef.scattered[:, None] * (J + 1j * Y)) * ang
        out[~inside] = terms.sum(axis=0)
    return out.reshape(p.shape[:-1])
