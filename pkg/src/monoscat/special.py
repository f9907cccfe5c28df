"""Integer-order Bessel and Hankel functions of real positive argument.

J_n is computed with Miller's backward recurrence. Below ``ASYMPTOTIC_SWITCH``
the sequence is normalized with ``J_0 + 2 sum J_2k = 1`` and Y_0, Y_1 come from
Neumann series in the same sequence; above it J_0, J_1, Y_0, Y_1 come from the
Hankel asymptotic expansion (optimally truncated). Y_n for n >= 2 is always
obtained by forward recurrence, which is stable for Y.

Everything is vectorized over the argument array.
"""

import math

import numpy as np

EULER_GAMMA = 0.57721566490153286061
ASYMPTOTIC_SWITCH = 16.0

_RESCALE_AT = 1e250


def _miller_start(nmax, xmax):
    start = max(nmax, xmax) + 15.0 * max(xmax, 1.0) ** (1.0 / 3.0) + 20.0
    start = int(math.ceil(start))
    return start + (start % 2)


def _miller(nmax, x):
    """Unnormalized backward recurrence.

    Returns the stored orders 0..nmax plus the full even/odd sums needed for
    normalization and the Neumann series (all sharing the same scale).
    """
    start = _miller_start(nmax, float(x.max()))
    f_next = np.zeros_like(x)
    f_cur = np.full_like(x, 1e-300)
    stored = np.zeros((nmax + 1,) + x.shape)
    even_sum = np.zeros_like(x)       # sum_{k>=1} f_{2k}
    y0_sum = np.zeros_like(x)         # sum_{k>=1} (-1)^k f_{2k} / k
    y1_sum = np.zeros_like(x)         # sum_{k>=1} (-1)^k (2k+1) f_{2k+1} / (k (k+1))
    two_over_x = 2.0 / x
    n = start
    while n >= 0:
        if n <= nmax:
            stored[n] = f_cur
        if n > 0 and n % 2 == 0:
            kk = n // 2
            even_sum += f_cur
            y0_sum += (-1.0) ** kk * f_cur / kk
        elif n % 2 == 1 and n >= 3:
            kk = (n - 1) // 2
            y1_sum += (-1.0) ** kk * n * f_cur / (kk * (kk + 1))
        if n == 0:
            break
        f_prev = n * two_over_x * f_cur - f_next
        f_next, f_cur = f_cur, f_prev
        n -= 1
        big = np.abs(f_cur) > _RESCALE_AT
        if big.any():
            scale = np.where(big, 1.0 / _RESCALE_AT, 1.0)
            f_cur = f_cur * scale
            f_next = f_next * scale
            stored *= scale
            even_sum *= scale
            y0_sum *= scale
            y1_sum *= scale
    return stored, even_sum, y0_sum, y1_sum


def _hankel_asymptotic(nu, x):
    """Return (J_nu, Y_nu) for nu in {0, 1} from the Hankel expansion."""
    mu = 4.0 * nu * nu
    p = np.ones_like(x)
    q = np.zeros_like(x)
    term = np.ones_like(x)
    active = np.ones(x.shape, dtype=bool)
    prev_mag = np.full_like(x, np.inf)
    for j in range(1, 80):
        term = term * (mu - (2 * j - 1) ** 2) / (j * 8.0 * x)
        mag = np.abs(term)
        # optimal truncation: stop once terms start growing
        active &= mag < prev_mag
        if not active.any():
            break
        contrib = np.where(active, term, 0.0)
        if j % 2 == 1:
            q += (-1.0) ** ((j - 1) // 2) * contrib
        else:
            p += (-1.0) ** (j // 2) * contrib
        prev_mag = mag
        active &= mag > 1e-18
    chi = x - (0.5 * nu + 0.25) * math.pi
    amp = np.sqrt(2.0 / (math.pi * x))
    c, s = np.cos(chi), np.sin(chi)
    return amp * (p * c - q * s), amp * (p * s + q * c)


def bessel_jy(nmax, x):
    """Return ``(J, Y)`` with ``J[n] = J_n(x)``, ``Y[n] = Y_n(x)``, n = 0..nmax.

    ``x`` must be real and strictly positive; output arrays have shape
    ``(nmax + 1,) + np.shape(x)``.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    if np.any(~(x > 0)):
        raise ValueError("bessel_jy requires x > 0")
    nmax = int(nmax)
    J = np.empty((nmax + 1,) + x.shape)
    Y = np.empty((nmax + 1,) + x.shape)

    small = x < ASYMPTOTIC_SWITCH
    large = ~small
    if small.any():
        xs = x[small]
        f, even_sum, y0_sum, y1_sum = _miller(max(nmax, 1), xs)
        norm = f[0] + 2.0 * even_sum
        Js = f / norm
        J[:, small] = Js[: nmax + 1]
        log_half = np.log(0.5 * xs)
        y0 = (2.0 / math.pi) * ((log_half + EULER_GAMMA) * Js[0] - 2.0 * y0_sum / norm)
        # psi(2) = 1 - gamma
        y1 = (2.0 / math.pi) * (-Js[0] / xs + (log_half - 1.0 + EULER_GAMMA) * Js[1]
                                - y1_sum / norm)
        Y[0, small] = y0
        if nmax >= 1:
            Y[1, small] = y1
    if large.any():
        xl = x[large]
        j0, y0 = _hankel_asymptotic(0, xl)
        j1, y1 = _hankel_asymptotic(1, xl)
        if nmax >= 2:
            f = _miller(nmax, xl)[0]
            # normalize on whichever of J_0, J_1 is farther from a zero
            use0 = np.abs(j0) >= np.abs(j1)
            scale = np.where(use0, j0 / np.where(use0, f[0], 1.0),
                             j1 / np.where(use0, 1.0, f[1]))
            J[:, large] = f * scale
        J[0, large] = j0
        if nmax >= 1:
            J[1, large] = j1
        Y[0, large] = y0
        if nmax >= 1:
            Y[1, large] = y1

    for n in range(1, nmax):
        Y[n + 1] = (2.0 * n / x) * Y[n] - Y[n - 1]

    if scalar:
        return J[:, 0], Y[:, 0]
    return J, Y


def _signed(n, values):
    # J_{-n} = (-1)^n J_n, same for Y and H
    return values * (-1) ** n if n < 0 else values


def jn(n, x):
    """Bessel function of the first kind, integer order, ``x >= 0``."""
    x = np.asarray(x, dtype=float)
    zero = x == 0
    if zero.any():
        out = np.full(x.shape, 1.0 if n == 0 else 0.0)
        if (~zero).any():
            out[~zero] = jn(n, x[~zero])
        return out[()] if out.ndim == 0 else out
    J, _ = bessel_jy(abs(n), x)
    return _signed(n, J[abs(n)])


def yn(n, x):
    """Bessel function of the second kind, integer order, ``x > 0``."""
    _, Y = bessel_jy(abs(n), x)
    return _signed(n, Y[abs(n)])


def hankel1(n, x):
    """Hankel function of the first kind ``H_n^(1)(x) = J_n(x) + i Y_n(x)``."""
    J, Y = bessel_jy(abs(n), x)
    return _signed(n, J[abs(n)] + 1j * Y[abs(n)])


def derivative_table(values):
    """Derivatives of an order table ``values[n]`` for n = 0..nmax-1.

    Uses ``C_n' = (C_{n-1} - C_{n+1}) / 2`` and ``C_0' = -C_1``; the last order
    of the input is consumed, so the result has one order fewer.
    """
    values = np.asarray(values)
    out = np.empty_like(values[:-1])
    out[0] = -values[1]
    out[1:] = 0.5 * (values[:-2] - values[2:])
    return out
