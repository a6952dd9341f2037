"""Hot inner loops: tanh-mixture divided differences and Weyl accumulation.

Every kernel has a pure-numpy implementation (``*_np``) and, when numba is
available, a compiled twin (``*_nb``). The un-suffixed names dispatch on
``_backend.USE_NUMBA``. The twins may factor a sum differently (the compiled
divided difference avoids per-entry exponentials where that is safe), so they
agree to a few ulps rather than bit for bit.
"""

import math

import numpy as np

from . import _backend
from ._backend import njit, prange

LOG2 = math.log(2.0)


# -- scalar helpers ---------------------------------------------------------

def logcosh_np(z):
    az = np.abs(z)
    return az + np.log1p(np.exp(-2.0 * az)) - LOG2


def logsinhc_np(z):
    """log(sinh(z)/z), stable for all real z."""
    az = np.abs(np.asarray(z, dtype=float))
    out = np.empty_like(az)
    small = az < 1e-4
    mid = (~small) & (az < 20.0)
    big = az >= 20.0
    zs = az[small] ** 2
    out[small] = np.log1p(zs / 6.0 + zs * zs / 120.0)
    out[mid] = np.log(np.sinh(az[mid]) / az[mid])
    ab = az[big]
    out[big] = ab - LOG2 - np.log(ab) + np.log1p(-np.exp(-2.0 * ab))
    return out


@njit(inline="always")
def _logcosh(z):
    az = abs(z)
    return az + math.log1p(math.exp(-2.0 * az)) - LOG2


@njit(inline="always")
def _logsinhc(z):
    az = abs(z)
    if az < 1e-4:
        zs = az * az
        return math.log1p(zs / 6.0 + zs * zs / 120.0)
    if az < 20.0:
        return math.log(math.sinh(az) / az)
    return az - LOG2 - math.log(az) + math.log1p(-math.exp(-2.0 * az))


# -- divided differences of a tanh mixture ----------------------------------

def tanh_divdiff_np(x, y, loc, weight, slope):
    """D[i, j] = (g(x_i) - g(y_j)) / (x_i - y_j) for g = sum_k w_k tanh(s (. - t_k)).

    Uses tanh A - tanh B = sinh(A - B) / (cosh A cosh B), evaluated in the log
    domain, so the diagonal limit g'(x) comes out of the same formula.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lsc = logsinhc_np(slope * (x[:, None] - y[None, :]))
    out = np.zeros((x.size, y.size))
    for t, w in zip(loc, weight):
        lx = logcosh_np(slope * (x - t))
        ly = logcosh_np(slope * (y - t))
        out += w * slope * np.exp(lsc - lx[:, None] - ly[None, :])
    return out


# below this |argument|, sinh and sech and their products stay in the normal
# range, so the direct product needs no logarithms
DIRECT_MAX = 300.0


@njit(inline="always")
def _sinhc(z):
    az = abs(z)
    if az < 1e-4:
        zs = az * az
        return 1.0 + zs / 6.0 + zs * zs / 120.0
    return math.sinh(az) / az


@njit(parallel=True)
def _tanh_divdiff_nb(x, y, loc, weight, slope):
    nx = x.size
    ny = y.size
    nk = loc.size
    out = np.zeros((nx, ny))
    zy = np.empty((nk, ny))
    sy = np.empty((nk, ny))
    for k in range(nk):
        for j in range(ny):
            zy[k, j] = slope * (y[j] - loc[k])
            sy[k, j] = 1.0 / math.cosh(zy[k, j]) if abs(zy[k, j]) < DIRECT_MAX else 0.0
    for i in prange(nx):
        zx = np.empty(nk)
        sx = np.empty(nk)
        for k in range(nk):
            zx[k] = slope * (x[i] - loc[k])
            sx[k] = 1.0 / math.cosh(zx[k]) if abs(zx[k]) < DIRECT_MAX else 0.0
        for j in range(ny):
            d = slope * (x[i] - y[j])
            direct = abs(d) < DIRECT_MAX
            sc = _sinhc(d) if direct else 0.0
            acc = 0.0
            for k in range(nk):
                if direct and abs(zx[k]) < DIRECT_MAX and abs(zy[k, j]) < DIRECT_MAX:
                    acc += weight[k] * slope * (sc * sx[k] * sy[k, j])
                else:
                    acc += weight[k] * slope * math.exp(_logsinhc(d) - _logcosh(zx[k]) - _logcosh(zy[k, j]))
            out[i, j] = acc
    return out


def tanh_divdiff_nb(x, y, loc, weight, slope):
    return _tanh_divdiff_nb(
        np.ascontiguousarray(x, dtype=np.float64),
        np.ascontiguousarray(y, dtype=np.float64),
        np.ascontiguousarray(loc, dtype=np.float64),
        np.ascontiguousarray(weight, dtype=np.float64),
        float(slope),
    )


# -- Weyl operator accumulation ----------------------------------------------

def weyl_accumulate_np(x, h, shifts, coeff, xi):
    """Sum of weighted grid Weyl operators.

    M[i, (i + m) % N] += sum_q coeff[r, q] * exp(1j * xi[q] * (x[i] + m h / 2))
    for each shift m = shifts[r]. This is exp(i(xi Q + u P)) with u = m h
    acting on the periodic grid, weighted by the quadrature coefficients.
    """
    n = x.size
    out = np.zeros((n, n), dtype=complex)
    rows = np.arange(n)
    for r, m in enumerate(shifts):
        phase = np.exp(1j * np.outer(x + 0.5 * m * h, xi))
        out[rows, (rows + m) % n] += phase @ coeff[r]
    return out


@njit(parallel=True)
def _weyl_accumulate_nb(x, h, shifts, coeff, xi):
    n = x.size
    nq = xi.size
    out = np.zeros((n, n), dtype=np.complex128)
    for i in prange(n):
        for r in range(shifts.size):
            m = shifts[r]
            arg = x[i] + 0.5 * m * h
            acc = 0.0 + 0.0j
            for q in range(nq):
                th = xi[q] * arg
                acc += coeff[r, q] * complex(math.cos(th), math.sin(th))
            out[i, (i + m) % n] += acc
    return out


def weyl_accumulate_nb(x, h, shifts, coeff, xi):
    return _weyl_accumulate_nb(
        np.ascontiguousarray(x, dtype=np.float64),
        float(h),
        np.ascontiguousarray(shifts, dtype=np.int64),
        np.ascontiguousarray(coeff, dtype=np.complex128),
        np.ascontiguousarray(xi, dtype=np.float64),
    )


if not _backend.NUMBA_AVAILABLE:
    tanh_divdiff_nb = tanh_divdiff_np  # noqa: F811
    weyl_accumulate_nb = weyl_accumulate_np  # noqa: F811


def tanh_divdiff(x, y, loc, weight, slope):
    if _backend.USE_NUMBA:
        return tanh_divdiff_nb(x, y, loc, weight, slope)
    return tanh_divdiff_np(x, y, loc, weight, slope)


def weyl_accumulate(x, h, shifts, coeff, xi):
    if _backend.USE_NUMBA:
        return weyl_accumulate_nb(x, h, shifts, coeff, xi)
    return weyl_accumulate_np(x, h, shifts, coeff, xi)
