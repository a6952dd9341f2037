"""The commutator integral kernel and its Nystrom discretization.

For f with Stieltjes measure df and bounded g, i[f(P), g(Q)] has kernel

    K(x, y) = (2 pi)^(-1/2) (g(x) - g(y)) / (x - y) df_hat(y - x),

with diagonal K(x, x) = g'(x) [f] / (2 pi). The argument of df_hat is y - x
throughout; the other orientation is its complex conjugate.
"""

import math
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._kernels import logcosh_np, logsinhc_np
from .fourier import SQRT_2PI, ft_measure, ft_quadrature
from .funcspace import KatoFunction, SampledFunction, total_variation
from .grid import GridSpec

BOUNDARY_TOL = 1e-12
MAX_N = 4096


class ReducedAccuracyWarning(UserWarning):
    """A diagonal or derivative came from finite differences."""


class BoundaryDecayWarning(UserWarning):
    """The kernel has not decayed at the edge of the truncated domain."""


class RankDeficiencyError(ValueError):
    pass


# -- ingredients ------------------------------------------------------------

def df_hat(f, u):
    """df_hat(u) for a KatoFunction (closed form) or a sampled f with f' samples."""
    if isinstance(f, KatoFunction):
        return ft_measure(f, u)
    if isinstance(f, SampledFunction):
        return ft_quadrature(f, u).values
    raise TypeError(f"f must be a KatoFunction or SampledFunction, got {type(f).__name__}")


def bracket(fn):
    """[fn], or None when the tails are undeclared."""
    try:
        return total_variation(fn)
    except ValueError:
        return None


def _kato_divdiff_pairs(g: KatoFunction, x, y):
    s = g.a_hat
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    lsc = logsinhc_np(s * (x - y))
    out = np.zeros(x.shape)
    for t, w in zip(g.measure.locations, g.measure.weights):
        out += w * s * np.exp(lsc - logcosh_np(s * (x - t)) - logcosh_np(s * (y - t)))
    return out


def sampled_derivative(g: SampledFunction):
    """Derivative samples of g: declared ones, else 4th-order centered differences."""
    if g.derivative is not None:
        return np.asarray(g.derivative), "declared"
    v = np.asarray(g.values)
    h = g.spacing
    d = np.empty_like(v)
    d[2:-2] = (-v[4:] + 8 * v[3:-1] - 8 * v[1:-3] + v[:-4]) / (12 * h)
    d[1] = (v[2] - v[0]) / (2 * h)
    d[-2] = (v[-1] - v[-3]) / (2 * h)
    d[0] = (v[1] - v[0]) / h
    d[-1] = (v[-1] - v[-2]) / h
    return d, "finite-difference"


def _sampled_divdiff(g: SampledFunction, xi, yi):
    """Divided differences on node indices; diagonal from sampled_derivative."""
    v = np.asarray(g.values)
    x = np.asarray(g.nodes)
    xi, yi = np.broadcast_arrays(xi, yi)
    dx = x[xi] - x[yi]
    diag = xi == yi
    with np.errstate(invalid="ignore", divide="ignore"):
        out = (v[xi] - v[yi]) / np.where(diag, 1.0, dx)
    d, method = sampled_derivative(g)
    out = np.where(diag, d[xi], out)
    if method != "declared" and np.any(diag):
        warnings.warn(
            "sampled g has no derivative samples; diagonal uses 4th-order differences",
            ReducedAccuracyWarning,
            stacklevel=3,
        )
    return out, method


def commutator_kernel(f, g, x, y):
    """K(x, y) for scalar or broadcastable arrays of points."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if isinstance(g, KatoFunction):
        dd = _kato_divdiff_pairs(g, x, y)
    elif isinstance(g, SampledFunction):
        dd, _ = _sampled_divdiff(g, g.index_of(x), g.index_of(y))
    else:
        raise TypeError(f"g must be a KatoFunction or SampledFunction, got {type(g).__name__}")
    out = dd * df_hat(f, y - x) / SQRT_2PI
    return out if out.ndim else complex(out)


# -- Nystrom matrices -------------------------------------------------------

@dataclass
class KernelMatrix:
    """entries = W^(1/2) K W^(1/2) on ``grid``; ``weights`` is the diagonal of W."""

    grid: GridSpec
    entries: np.ndarray
    weights: np.ndarray
    source: dict
    expected_trace: float | None = None
    diagonal_method: str = "analytic"
    boundary_decay: float = 0.0
    warnings: list = field(default_factory=list)
    route: str = "kernel"

    @property
    def hermitian_defect(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T))) if self.entries.size else 0.0

    def kernel_values(self):
        """Undo the symmetrization: K(x_i, x_j)."""
        s = np.sqrt(self.weights)
        return self.entries / np.outer(s, s)

    def eigvalsh(self):
        return np.linalg.eigvalsh(self.entries)

    def to_csv(self, path):
        write_matrix_csv(path, self.entries)

    def to_binary(self, path):
        write_matrix_binary(path, self.entries)


def _kernel_on_grid(f, g, grid: GridSpec):
    x = grid.nodes
    n = grid.N
    if isinstance(g, KatoFunction):
        m = g.measure
        if m.is_zero:
            dd = np.zeros((n, n))
        else:
            dd = _kernels.tanh_divdiff(x, x, m.locations, m.weights, g.a_hat)
        method = "analytic"
    elif isinstance(g, SampledFunction):
        idx = g.index_of(x)
        dd, method = _sampled_divdiff(g, idx[:, None], idx[None, :])
    else:
        raise TypeError(f"g must be a KatoFunction or SampledFunction, got {type(g).__name__}")
    # df_hat(y - x) depends on the lag j - i only; evaluate once per lag and
    # fill negative lags by conjugation so the result is exactly Hermitian
    lags = grid.h * np.arange(n)
    pos = np.asarray(df_hat(f, lags), dtype=complex)
    full = np.concatenate([np.conj(pos[:0:-1]), pos])
    lag_index = np.arange(n)[None, :] - np.arange(n)[:, None] + (n - 1)
    kern = dd * full[lag_index] / SQRT_2PI
    return kern, method


def boundary_decay(kern) -> float:
    """Largest edge diagonal entry relative to the largest diagonal entry."""
    d = np.abs(np.real(np.diag(kern)))
    peak = d.max() if d.size else 0.0
    if peak == 0.0:
        return 0.0
    return float(max(d[0], d[-1]) / peak)


def source_descriptor(f, g) -> dict:
    def desc(fn):
        if isinstance(fn, KatoFunction):
            return {"kind": "kato", **fn.to_json()}
        return {"kind": "sampled", "n": int(fn.nodes.size), "boundary_limits": fn.boundary_limits}

    return {"f": desc(f), "g": desc(g)}


def nystrom_assemble(f, g, grid: GridSpec, auto_double=True, max_n=MAX_N, tol=BOUNDARY_TOL) -> KernelMatrix:
    """Symmetrized Nystrom matrix of the commutator kernel.

    When the diagonal has not decayed below ``tol`` at the edges and g is a
    KatoFunction, the half width (and N, keeping h fixed) is doubled until it
    has or N would exceed ``max_n``.
    """
    notes = []
    while True:
        kern, method = _kernel_on_grid(f, g, grid)
        if not np.all(np.isfinite(kern)):
            raise FloatingPointError("kernel evaluation produced non-finite values")
        decay = boundary_decay(kern)
        can_double = auto_double and isinstance(g, KatoFunction) and 2 * grid.N <= max_n
        if decay <= tol or not can_double:
            break
        notes.append(f"boundary decay {decay:.2e} at L={grid.L:g}; doubled to L={2 * grid.L:g}")
        grid = grid.doubled()
    if decay > tol:
        msg = f"kernel diagonal at the domain edge is {decay:.2e} of its peak (> {tol:g})"
        notes.append(msg)
        warnings.warn(msg, BoundaryDecayWarning, stacklevel=2)
    if method != "analytic" and method != "declared":
        notes.append("diagonal from finite differences (reduced accuracy)")
    w = grid.weights
    s = np.sqrt(w)
    entries = s[:, None] * kern * s[None, :]
    # rounding in the products differs between (i, j) and (j, i); averaging
    # with the adjoint makes the matrix Hermitian bit for bit
    entries = 0.5 * (entries + entries.conj().T)
    bf, bg = bracket(f), bracket(g)
    expected = None if bf is None or bg is None else bf * bg / (2 * math.pi)
    return KernelMatrix(
        grid=grid,
        entries=entries,
        weights=np.asarray(w),
        source=source_descriptor(f, g),
        expected_trace=expected,
        diagonal_method=method,
        boundary_decay=decay,
        warnings=notes,
    )


# -- closed forms for tanh pairs ---------------------------------------------

def _check_rank_n(alpha, beta, n):
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    if not math.isclose(4 * alpha * beta, 2 * math.pi * n, rel_tol=1e-12):
        raise ValueError(f"(2 alpha)(2 beta) = {4 * alpha * beta:.15g} differs from 2 pi n = {2 * math.pi * n:.15g}")


def rank_n_pair(beta, n):
    """(f, g) = (tanh(alpha .), tanh(beta .)) with (2 alpha)(2 beta) = 2 pi n."""
    if int(n) != n or n < 1 or not beta > 0:
        raise ValueError("need a positive integer n and beta > 0")
    alpha = math.pi * n / (2.0 * beta)
    return KatoFunction.tanh(alpha), KatoFunction.tanh(beta)


def tanh_rank_n_kernel(alpha, beta, n, x, y):
    """(beta / n pi) sech(beta x) sech(beta y) sum_k exp((n - 1 - 2k) beta (x - y) / n)."""
    _check_rank_n(alpha, beta, n)
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    base = -logcosh_np(beta * x) - logcosh_np(beta * y)
    out = np.zeros(x.shape)
    for k in range(n):
        out += np.exp(base + (n - 1 - 2 * k) * beta * (x - y) / n)
    out *= beta / (n * math.pi)
    return out if out.ndim else float(out)


def rank_n_factors(beta, n, x):
    """psi_k(x) = sech(beta x) exp((n - 1 - 2k) beta x / n), k = 0..n-1."""
    x = np.asarray(x, dtype=float)
    k = np.arange(n)[:, None]
    return np.exp((n - 1 - 2 * k) * beta * x[None, :] / n - logcosh_np(beta * x)[None, :])


def det2x2_tanh(alpha, beta, n, x1, x2):
    """Determinant of the 2x2 principal minor [[K11, K12], [K21, K22]]."""
    _check_rank_n(alpha, beta, n)
    d = x1 - x2
    s = sum(math.exp((n - (2 * k + 1)) * beta * d / n) for k in range(n))
    pref = (beta / (n * math.pi)) ** 2
    lc = 2.0 * (float(logcosh_np(np.array(beta * x1))) + float(logcosh_np(np.array(beta * x2))))
    return pref * math.exp(-lc) * (n * n - s * s)


# -- eigenfunctions and the finite-rank identities ---------------------------

def numerical_rank(entries, rtol=1e-8) -> int:
    sv = np.linalg.svd(entries, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > rtol * sv[0]))


def eigenfunctions(km: KernelMatrix, rtol=1e-8):
    """Sampled eigenfunctions phi_j with K(x, y) = sum_j sign_j phi_j(x) conj phi_j(y).

    phi_j = sqrt(|lambda_j|) v_j / sqrt(w); only |lambda_j| > rtol * max|lambda|
    is kept. Returns (phis, signs) with phis of shape (r, N).
    """
    lam, vec = np.linalg.eigh(km.entries)
    big = np.abs(lam).max() if lam.size else 0.0
    if big == 0.0:
        return np.zeros((0, km.grid.N), dtype=complex), np.zeros(0)
    keep = np.abs(lam) > rtol * big
    order = np.argsort(-np.abs(lam[keep]))
    lam = lam[keep][order]
    vec = vec[:, keep][:, order]
    phis = (np.sqrt(np.abs(lam))[None, :] * vec / np.sqrt(km.weights)[:, None]).T
    return phis, np.sign(lam)


def _lag_correlation(phi, h):
    """C[m] = h sum_l phi[l + m] conj phi[l] for m = -(N-1)..N-1 (zero padded)."""
    n = phi.size
    size = 2 * n
    a = np.fft.fft(phi, size)
    c = np.fft.ifft(a * np.conj(a))
    return h * np.concatenate([c[size - n + 1:], c[:n]])


@dataclass
class FiniteRankReport:
    rank_used: int
    numerical_rank: int
    derivative_residual: float
    correlation_residual: float
    derivative_scale: float
    correlation_scale: float

    def to_json(self):
        return dict(self.__dict__)


def finite_rank_identities(phis, f, g, grid: GridSpec, signs=None, kernel=None, lag_window=None, rank_rtol=1e-8):
    """Residuals of the two identities built from the eigenfunctions phi_j.

    (i)  [f] g'(x) = 2 pi sum_j s_j |phi_j(x)|^2
    (ii) [g] sqrt(2 pi) df_hat(y - x) = 2 pi sum_j s_j int phi_j(x + u) conj phi_j(y + u) du

    Both are written multiplied out so that a zero commutator gives zero on
    each side. Residuals are sup norms relative to the larger side's sup norm
    (0 when both sides vanish); (ii) is tested on lags |y - x| <= lag_window
    (default L/2).
    """
    phis = np.atleast_2d(np.asarray(phis, dtype=complex)) if len(phis) else np.zeros((0, grid.N), complex)
    r = phis.shape[0]
    signs = np.ones(r) if signs is None else np.asarray(signs, dtype=float)
    if kernel is None:
        kernel = nystrom_assemble(f, g, grid, auto_double=False)
    nrank = numerical_rank(kernel.entries, rank_rtol)
    if r < nrank:
        raise RankDeficiencyError(f"{r} eigenfunctions supplied but numerical rank is {nrank}")
    bf, bg = total_variation(f), total_variation(g)
    x = grid.nodes

    if isinstance(g, KatoFunction):
        gp = g.derivative(x)
    else:
        gp, _ = sampled_derivative(g)
        gp = gp[g.index_of(x)]
    lhs1 = bf * gp
    rhs1 = 2 * math.pi * (signs[:, None] * np.abs(phis) ** 2).sum(axis=0) if r else np.zeros(grid.N)

    n = grid.N
    lags = grid.h * np.arange(-(n - 1), n)
    window = grid.L / 2 if lag_window is None else lag_window
    sel = np.abs(lags) <= window + 1e-12
    corr = np.zeros(lags.size, dtype=complex)
    for s, phi in zip(signs, phis):
        corr += s * _lag_correlation(phi, grid.h)
    # C[m] pairs x = x_i + m h with y = x_i, i.e. y - x = -m h
    rhs2 = 2 * math.pi * corr[sel]
    lhs2 = bg * SQRT_2PI * np.asarray(df_hat(f, -lags[sel]), dtype=complex)

    def rel(a, b):
        scale = max(np.max(np.abs(a)), np.max(np.abs(b)))
        return (float(np.max(np.abs(a - b)) / scale) if scale > 0 else 0.0), float(scale)

    r1, s1 = rel(lhs1, rhs1)
    r2, s2 = rel(lhs2, rhs2)
    return FiniteRankReport(r, nrank, r1, r2, s1, s2)


# -- matrix exchange formats -------------------------------------------------

def write_matrix_csv(path, entries):
    """Rows ``i,j,re,im`` (row-major order, header line first)."""
    a = np.asarray(entries, dtype=complex)
    n, m = a.shape
    ii, jj = np.meshgrid(np.arange(n), np.arange(m), indexing="ij")
    with open(path, "w") as fh:
        fh.write("i,j,re,im\n")
        for i, j, z in zip(ii.ravel(), jj.ravel(), a.ravel()):
            fh.write(f"{i},{j},{float(z.real)!r},{float(z.imag)!r}\n")


def read_matrix_csv(path):
    data = np.genfromtxt(path, delimiter=",", names=True)
    i = data["i"].astype(int)
    j = data["j"].astype(int)
    n = int(i.max()) + 1
    m = int(j.max()) + 1
    out = np.zeros((n, m), dtype=complex)
    out[i, j] = data["re"] + 1j * data["im"]
    return out


def write_matrix_binary(path, entries):
    """8-byte little-endian uint64 N, then N*N complex128 (little-endian) column-major."""
    a = np.asarray(entries, dtype="<c16")
    n, m = a.shape
    if n != m:
        raise ValueError("binary format stores square matrices only")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", n))
        fh.write(np.asfortranarray(a).tobytes(order="F"))


def read_matrix_binary(path):
    with open(path, "rb") as fh:
        (n,) = struct.unpack("<Q", fh.read(8))
        body = fh.read()
    if len(body) != 16 * n * n:
        raise ValueError(f"expected {16 * n * n} payload bytes for N={n}, found {len(body)}")
    return np.frombuffer(body, dtype="<c16").reshape((n, n), order="F").copy()
