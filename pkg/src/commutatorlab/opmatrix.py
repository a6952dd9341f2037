"""Grid-operator route: f(P), g(Q), their commutator, and alternative forms.

f(P) is the circulant matrix ifft . diag(f(xi_k)) . fft on the periodic grid.
A finite commutator matrix is traceless, so the raw i[f(P), g(Q)] carries
compensating wrap-around eigenvalues from the periodization of x and the
Nyquist fold of xi. Cross-route comparisons therefore go through a smooth
phase-space window T = B(xi) W(x) that localizes to |x| <= L/2 and
|xi| <= pi / (2h); the boundary-leak norm is reported next to every comparison.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._kernels import logcosh_np
from .fourier import SQRT_2PI
from .funcspace import KatoFunction, SampledFunction, im_continuation
from .grid import GridSpec
from .kernel import KernelMatrix, df_hat, write_matrix_binary, write_matrix_csv


class CutoffWarning(UserWarning):
    """A quadrature cutoff leaves a transform tail above tolerance."""


class AliasingWarning(UserWarning):
    """A Weyl shift or frequency exceeds what the periodic grid resolves."""


@dataclass
class OperatorMatrix:
    grid: GridSpec
    entries: np.ndarray
    hermitian_flag: bool
    provenance: dict
    warnings: list = field(default_factory=list)
    route: str = "operator"

    def __post_init__(self):
        if self.hermitian_flag:
            defect = float(np.max(np.abs(self.entries - self.entries.conj().T)))
            if defect > 1e-12 * max(1.0, float(np.max(np.abs(self.entries)))):
                raise ValueError(f"matrix flagged Hermitian but defect is {defect:.2e}")

    @property
    def hermitian_defect(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    def eigvalsh(self):
        return np.linalg.eigvalsh(self.entries)

    def to_csv(self, path):
        write_matrix_csv(path, self.entries)

    def to_binary(self, path):
        write_matrix_binary(path, self.entries)


def _values_on(fn, pts):
    if isinstance(fn, (KatoFunction, SampledFunction)):
        return np.asarray(fn(pts), dtype=float)
    if callable(fn):
        return np.asarray(fn(pts))
    return np.full(pts.shape, float(fn))


def _describe(fn):
    if isinstance(fn, KatoFunction):
        return {"kind": "kato", **fn.to_json()}
    if isinstance(fn, SampledFunction):
        return {"kind": "sampled", "n": int(fn.nodes.size)}
    return {"kind": getattr(fn, "__name__", type(fn).__name__)}


def circulant_from_symbol(symbol, hermitian=True):
    """Matrix of ifft . diag(symbol) . fft, with ``symbol`` in FFT order."""
    n = symbol.size
    col = np.fft.ifft(symbol)
    if hermitian:
        # a real symbol gives col[-k] = conj col[k]; enforce it exactly
        col = 0.5 * (col + np.conj(np.roll(col[::-1], 1)))
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return col[idx]


def build_gQ(g, grid: GridSpec) -> OperatorMatrix:
    vals = _values_on(g, grid.nodes)
    return OperatorMatrix(grid, np.diag(vals.astype(complex)), bool(np.isrealobj(vals)), {"op": "g(Q)", "g": _describe(g)})


def build_fP(f, grid: GridSpec) -> OperatorMatrix:
    """f evaluated on the momentum nodes; a SampledFunction must live on them."""
    sym = _values_on(f, grid.fft_momentum)
    real = bool(np.isrealobj(sym))
    return OperatorMatrix(grid, circulant_from_symbol(sym, real), real, {"op": "f(P)", "f": _describe(f)})


def commutator_matrix(A: OperatorMatrix, B: OperatorMatrix) -> OperatorMatrix:
    """i(AB - BA)."""
    if A.grid != B.grid:
        raise ValueError(f"grid mismatch: {A.grid} vs {B.grid}")
    X = A.entries @ B.entries
    if A.hermitian_flag and B.hermitian_flag:
        # BA = (AB)^H for Hermitian factors, so this is Hermitian by construction
        C = 1j * (X - X.conj().T)
    else:
        C = 1j * (X - B.entries @ A.entries)
    prov = {"op": "i[A,B]", "A": A.provenance, "B": B.provenance}
    return OperatorMatrix(A.grid, C, A.hermitian_flag and B.hermitian_flag, prov, A.warnings + B.warnings)


def operator_commutator(f, g, grid: GridSpec) -> OperatorMatrix:
    return commutator_matrix(build_fP(f, grid), build_gQ(g, grid))


# -- interior localization ---------------------------------------------------

@dataclass(frozen=True)
class Window:
    """Smooth phase-space window: |x| <= x_frac L and |xi| <= xi_frac pi / h."""

    x_frac: float = 0.5
    xi_frac: float = 0.5
    x_soft: float = 0.5
    xi_soft: float = 1.0

    def spatial(self, grid: GridSpec):
        x, c = grid.nodes, self.x_frac * grid.L
        return 0.5 * (np.tanh((x + c) / self.x_soft) - np.tanh((x - c) / self.x_soft))

    def momentum(self, grid: GridSpec):
        k, c = grid.fft_momentum, self.xi_frac * grid.nyquist
        return 0.5 * (np.tanh((k + c) / self.xi_soft) - np.tanh((k - c) / self.xi_soft))

    def matrix(self, grid: GridSpec):
        return circulant_from_symbol(self.momentum(grid)) * self.spatial(grid)[None, :]


DEFAULT_WINDOW = Window()


def compress(entries, grid: GridSpec, window: Window = DEFAULT_WINDOW):
    T = window.matrix(grid)
    out = T.conj().T @ entries @ T
    return 0.5 * (out + out.conj().T)


def boundary_leak(entries, grid: GridSpec, frac=0.5) -> float:
    """Share of the Frobenius norm carried by rows or columns outside |x| <= frac L."""
    inside = np.abs(grid.nodes) <= frac * grid.L
    total = np.linalg.norm(entries)
    if total == 0.0:
        return 0.0
    interior = np.linalg.norm(entries[np.ix_(inside, inside)])
    return float(math.sqrt(max(total**2 - interior**2, 0.0)) / total)


def interior_discrepancy(A, B, grid: GridSpec, window: Window = DEFAULT_WINDOW) -> dict:
    """Relative Frobenius distance of the windowed matrices, B as reference."""
    a = A.entries if hasattr(A, "entries") else A
    b = B.entries if hasattr(B, "entries") else B
    ca, cb = compress(a, grid, window), compress(b, grid, window)
    ref = np.linalg.norm(cb)
    diff = np.linalg.norm(ca - cb)
    return {
        "rel_frobenius": float(diff / ref) if ref > 0 else float(diff),
        "reference_norm": float(ref),
        "leak_A": boundary_leak(a, grid, window.x_frac),
        "leak_B": boundary_leak(b, grid, window.x_frac),
    }


def windowed(M, window: Window = DEFAULT_WINDOW):
    """Copy of an Operator/KernelMatrix with entries replaced by T^H M T."""
    ent = compress(M.entries, M.grid, window)
    if isinstance(M, KernelMatrix):
        return KernelMatrix(M.grid, ent, M.weights, M.source, None, M.diagonal_method, M.boundary_decay, list(M.warnings), M.route)
    prov = {"op": "window", "of": M.provenance, "window": window.__dict__}
    return OperatorMatrix(M.grid, ent, True, prov, list(M.warnings), M.route)


# -- cosh sandwich -----------------------------------------------------------

def cosh_sandwich(lam: float, g: KatoFunction, grid: GridSpec) -> OperatorMatrix:
    """sech(lam P) Im g(Q + i lam) sech(lam P), equal to i[tanh(lam P), g(Q)]."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    sech = np.exp(-logcosh_np(lam * grid.fft_momentum))  # no overflow at large lam xi
    S = circulant_from_symbol(sech)
    d = im_continuation(g, grid.nodes, lam)
    X = S @ (d[:, None] * S)
    X = 0.5 * (X + X.conj().T)
    return OperatorMatrix(grid, X, True, {"op": "cosh_sandwich", "lambda": lam, "g": _describe(g)})


# -- Weyl representation -----------------------------------------------------

def _class_width(fn, default=1.0):
    return fn.a if isinstance(fn, KatoFunction) else default


def sinc(z):
    """sin(z) / z."""
    return np.sinc(np.asarray(z) / np.pi)


def default_cutoffs(f, g, grid: GridSpec):
    """U = min(30 / a_f, 0.9 L), Xi = min(30 / a_g, 0.9 pi / h)."""
    U = min(30.0 / _class_width(f), 0.9 * grid.L)
    Xi = min(30.0 / _class_width(g), 0.9 * grid.nyquist)
    return U, Xi


def weyl_representation(f, g, grid: GridSpec, U=None, Xi=None, M=None, tail_tol=1e-10) -> OperatorMatrix:
    """(2 pi)^-1 int int exp(i(xi Q + u P)) df_hat(u) dg_hat(xi) sinc(u xi / 2) du dxi.

    On the grid, exp(i(xi Q + u P)) with u = m h acts as
    psi(x) -> exp(i xi (x + u/2)) psi(x + u), so u runs over whole grid shifts
    (trapezoid weight h). The xi integral uses the momentum nodes (weight
    pi / L) by default, or M-point Gauss-Legendre on [-Xi, Xi] when M is given.
    """
    dU, dXi = default_cutoffs(f, g, grid)
    U = dU if U is None else float(U)
    Xi = dXi if Xi is None else float(Xi)
    notes = []
    f0 = abs(complex(df_hat(f, 0.0)))
    g0 = abs(complex(df_hat(g, 0.0)))
    if f0 == 0.0 or g0 == 0.0:
        return OperatorMatrix(grid, np.zeros((grid.N, grid.N), complex), True, {"op": "weyl", "zero": True})
    tf = abs(complex(df_hat(f, U))) / f0
    tg = abs(complex(df_hat(g, Xi))) / g0
    for name, tail, cut in (("U", tf, U), ("Xi", tg, Xi)):
        if tail > tail_tol:
            msg = f"cutoff {name}={cut:.4g} leaves a relative transform tail {tail:.2e} > {tail_tol:g}"
            notes.append(msg)
            warnings.warn(msg, CutoffWarning, stacklevel=2)
    if U > grid.L:
        msg = f"U={U:.4g} exceeds the half width L={grid.L:g}; shifts wrap around the periodic grid"
        notes.append(msg)
        warnings.warn(msg, AliasingWarning, stacklevel=2)
    if Xi > grid.nyquist:
        msg = f"Xi={Xi:.4g} exceeds the grid Nyquist frequency {grid.nyquist:.4g}"
        notes.append(msg)
        warnings.warn(msg, AliasingWarning, stacklevel=2)

    h = grid.h
    mmax = int(math.floor(U / h + 1e-12))
    shifts = np.arange(-mmax, mmax + 1)
    u = shifts * h
    if M is None:
        xi = grid.momentum[np.abs(grid.momentum) <= Xi + 1e-12]
        wxi = np.full(xi.size, grid.dxi)
        rule = "momentum-grid"
    else:
        gx, gw = np.polynomial.legendre.leggauss(int(M))
        xi, wxi = Xi * gx, Xi * gw
        rule = f"gauss-legendre-{int(M)}"
    fu = np.asarray(df_hat(f, u), dtype=complex)
    gx_ = np.asarray(df_hat(g, xi), dtype=complex)
    coeff = (h / (2 * math.pi)) * fu[:, None] * (gx_ * wxi)[None, :] * sinc(np.outer(u, xi) / 2)
    ent = _kernels.weyl_accumulate(grid.nodes, h, shifts, coeff, xi)
    ent = 0.5 * (ent + ent.conj().T)
    prov = {"op": "weyl", "U": U, "Xi": Xi, "xi_rule": rule, "n_shifts": int(shifts.size), "n_xi": int(xi.size)}
    return OperatorMatrix(grid, ent, True, prov, notes, route="weyl")


# -- coherent-state scan -----------------------------------------------------

@dataclass
class CoherentScan:
    x: np.ndarray
    y: np.ndarray
    field: np.ndarray
    min_value: float
    argmin: tuple
    max_value: float
    imag_max: float
    warnings: list = field(default_factory=list)

    def to_json(self):
        return {
            "min_value": self.min_value,
            "argmin": list(self.argmin),
            "max_value": self.max_value,
            "imag_max": self.imag_max,
            "resolution": [int(self.x.size), int(self.y.size)],
        }


def coherent_scan(f, g, window=(-6.0, 6.0, -6.0, 6.0), R=61, M=128, cutoff=12.0, imag_tol=1e-10) -> CoherentScan:
    """I(x, y) = int int exp(-(xi^2 + u^2)/4) exp(i(xi x + u y)) sin(xi u / 2)/(xi u) df_hat(u) dg_hat(xi).

    Gauss-Legendre with M nodes per axis on [-cutoff, cutoff]; the Gaussian
    factor makes the tail below exp(-cutoff^2 / 4).
    """
    gx, gw = np.polynomial.legendre.leggauss(int(M))
    z, w = cutoff * gx, cutoff * gw
    fu = np.asarray(df_hat(f, z), dtype=complex)
    gxi = np.asarray(df_hat(g, z), dtype=complex)
    gauss = np.exp(-(z[:, None] ** 2 + z[None, :] ** 2) / 4)
    G = gauss * 0.5 * sinc(np.outer(z, z) / 2) * (gxi * w)[:, None] * (fu * w)[None, :]
    X = np.linspace(window[0], window[1], R)
    Y = np.linspace(window[2], window[3], R)
    I = np.exp(1j * np.outer(X, z)) @ G @ np.exp(1j * np.outer(Y, z)).T
    notes = []
    imag = float(np.max(np.abs(I.imag))) if I.size else 0.0
    scale = max(float(np.max(np.abs(I.real))), 1.0)
    if imag > imag_tol * scale:
        notes.append(f"imaginary part {imag:.2e} exceeds tolerance")
    if math.exp(-cutoff**2 / 4) > 1e-10:
        notes.append(f"cutoff {cutoff:g} leaves Gaussian tail {math.exp(-cutoff ** 2 / 4):.2e}")
    re = I.real
    k = np.unravel_index(np.argmin(re), re.shape)
    return CoherentScan(X, Y, re, float(re[k]), (float(X[k[0]]), float(Y[k[1]])), float(re.max()), imag, notes)


# -- two-dimensional kernel ----------------------------------------------------

def kernel2d_eval(f, g, x, y):
    """df_hat(sqrt2 (y1 - x1)) dg_hat(sqrt2 (y2 - x2)) exp(i(x1 y2 - x2 y1)) sinc((y1 - x1)(y2 - x2)) / pi."""
    x1, x2 = (np.asarray(v, dtype=float) for v in x)
    y1, y2 = (np.asarray(v, dtype=float) for v in y)
    r2 = math.sqrt(2.0)
    d1, d2 = y1 - x1, y2 - x2
    out = (
        np.asarray(df_hat(f, r2 * d1))
        * np.asarray(df_hat(g, r2 * d2))
        * np.exp(1j * (x1 * y2 - x2 * y1))
        * sinc(d1 * d2)
        / math.pi
    )
    return out if out.ndim else complex(out)


def kernel2d_nystrom(f, g, half_width=4.0, n=16):
    """Symmetrized Nystrom matrix of the 2-D kernel on an n x n tensor grid."""
    t = np.linspace(-half_width, half_width, n)
    h = t[1] - t[0]
    p1, p2 = (a.ravel() for a in np.meshgrid(t, t, indexing="ij"))
    K = kernel2d_eval(f, g, (p1[:, None], p2[:, None]), (p1[None, :], p2[None, :]))
    K = h * h * K
    return 0.5 * (K + K.conj().T)
