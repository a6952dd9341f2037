"""Diagnostics: positivity spectra, trace and rank checks, the inequality
battery for g' and psi = (g')^(-1/2), periodic commutation, Moebius
transforms, and the perturbation probe harness."""

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from . import _backend
from ._kernels import logcosh_np
from .funcspace import (
    IndeterminateTailsError,
    KatoFunction,
    SampledFunction,
    mollify,
    total_variation,
)
from .grid import GridSpec
from .kernel import KernelMatrix, nystrom_assemble, sampled_derivative
from .opmatrix import (
    DEFAULT_WINDOW,
    OperatorMatrix,
    Window,
    boundary_leak,
    build_fP,
    build_gQ,
    commutator_matrix,
    compress,
)

EPS = np.finfo(float).eps
PAIRWISE_MAX = 48


class NotHermitianError(ValueError):
    pass


class NonMonotoneError(ValueError):
    pass


class IncommensurableGridError(ValueError):
    pass


# -- positivity --------------------------------------------------------------

@dataclass
class PositivityReport:
    min_eigenvalue: float
    top_eigenvalues: list
    trace_computed: float
    trace_expected: float | None
    numerical_rank: int
    rank_tolerance: float
    psd_verdict: bool
    tolerance: float
    route: str
    size: int = 0
    eigenvalue_sum: float = 0.0
    hermitian_defect: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def relative_min(self) -> float:
        top = self.top_eigenvalues[0] if self.top_eigenvalues else 0.0
        return self.min_eigenvalue / top if top > 0 else float("-inf") if self.min_eigenvalue < 0 else 0.0

    def to_json(self):
        return asdict(self)


def _entries(M):
    if isinstance(M, (KernelMatrix, OperatorMatrix)):
        return M.entries
    return np.asarray(M)


def positivity_spectrum(M, tol=1e-8, top=8, rank_tol=1e-8, herm_tol=1e-10, expected_trace=None, route=None) -> PositivityReport:
    """Dense Hermitian eigendecomposition and the relative PSD predicate

    lambda_min >= -tol * max(lambda_max, 0).
    """
    A = _entries(M)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("positivity needs a square matrix")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    defect = float(np.max(np.abs(A - A.conj().T))) if A.size else 0.0
    if defect > herm_tol * scale:
        raise NotHermitianError(f"Hermitian defect {defect:.2e} exceeds {herm_tol:g}")
    lam = np.linalg.eigvalsh(0.5 * (A + A.conj().T))
    lmax = float(lam[-1]) if lam.size else 0.0
    lmin = float(lam[0]) if lam.size else 0.0
    big = float(np.max(np.abs(lam))) if lam.size else 0.0
    rank = int(np.sum(np.abs(lam) > rank_tol * big)) if big > 0 else 0
    if expected_trace is None and isinstance(M, KernelMatrix):
        expected_trace = M.expected_trace
    if route is None:
        route = getattr(M, "route", "matrix")
    notes = list(getattr(M, "warnings", []))
    return PositivityReport(
        min_eigenvalue=lmin,
        top_eigenvalues=[float(v) for v in lam[::-1][:top]],
        trace_computed=float(np.trace(A).real),
        trace_expected=expected_trace,
        numerical_rank=rank,
        rank_tolerance=rank_tol,
        psd_verdict=bool(lmin >= -tol * max(lmax, 0.0)),
        tolerance=tol,
        route=route,
        size=int(A.shape[0]),
        eigenvalue_sum=float(lam.sum()),
        hermitian_defect=defect,
        notes=notes,
    )


def trace_check(f, g, grid: GridSpec):
    """(computed, expected, rel_error): quadrature of K(x, x) vs [f][g] / 2 pi."""
    bf = total_variation(f)
    bg = total_variation(g)
    x = grid.nodes
    if isinstance(g, KatoFunction):
        gp = g.derivative(x)
    else:
        d, _ = sampled_derivative(g)
        gp = d[g.index_of(x)]
    computed = float(np.dot(grid.weights, gp) * bf / (2 * math.pi))
    expected = bf * bg / (2 * math.pi)
    if expected == 0.0:
        rel = abs(computed)
    else:
        rel = abs(computed - expected) / abs(expected)
    return computed, expected, rel


# -- periodic commutation ------------------------------------------------------

@dataclass
class PeriodicResult:
    residual: float
    norm_product: float
    relative: float
    grid: GridSpec
    adjustment: str
    seed: int
    tau_f: float
    tau_g: float

    def to_json(self):
        d = asdict(self)
        d["grid"] = self.grid.to_json()
        return d


def commensurate_grid(tau_f, tau_g, grid: GridSpec | None = None, max_n=2**14, max_den=10_000):
    """Grid with 2L = p tau_g and 2 pi / h = q tau_f, N = p q tau_f tau_g / (2 pi) even.

    Starts from (p, q) nearest to the requested grid and searches upward in
    p q; returns (grid, note).
    """
    ratio = Fraction(tau_f * tau_g / (2 * math.pi)).limit_denominator(max_den)
    if not math.isclose(float(ratio), tau_f * tau_g / (2 * math.pi), rel_tol=1e-12):
        raise IncommensurableGridError("tau_f tau_g / 2 pi is not a ratio of small integers")
    if grid is None:
        p0, q0 = 4, 16
    else:
        p0 = max(1, round(2 * grid.L / tau_g))
        q0 = max(1, round(2 * math.pi / (grid.h * tau_f)))
    best = None
    for p in range(p0, p0 + 64):
        for q in range(q0, q0 + 256):
            n = ratio * p * q
            if n.denominator == 1 and n.numerator % 2 == 0 and n.numerator <= max_n:
                cost = (p - p0) ** 2 + (q - q0) ** 2
                if best is None or cost < best[0]:
                    best = (cost, p, q, int(n))
                break
    if best is None:
        raise IncommensurableGridError(f"no commensurate grid with N <= {max_n}")
    _, p, q, n = best
    g = GridSpec(p * tau_g / 2, n)
    note = f"L = {p}*tau_g/2, 2pi/h = {q}*tau_f, N = {n}"
    if grid is not None and (g.L != grid.L or g.N != grid.N):
        note = f"adjusted from L={grid.L:g}, N={grid.N}: " + note
    return g, note


def random_trig(period, harmonics, rng):
    """Real trigonometric polynomial sum_k a_k cos(2 pi k x / T) + b_k sin(2 pi k x / T)."""
    a = rng.standard_normal(harmonics + 1)
    b = rng.standard_normal(harmonics + 1)
    k = np.arange(harmonics + 1)
    b[0] = 0.0
    if harmonics:
        a[1:] /= k[1:]
        b[1:] /= k[1:]

    def fn(x):
        th = 2 * math.pi * np.multiply.outer(np.asarray(x, dtype=float), k) / period
        return np.cos(th) @ a + np.sin(th) @ b

    fn.sup = float(np.max(np.abs(fn(np.linspace(0, period, 4097)))))
    return fn


def commute_check_periodic(tau_f, tau_g, harmonics=3, grid=None, seed=0, harmonics_g=None, max_n=2**14) -> PeriodicResult:
    """Largest singular value of [f(P), g(Q)] for random periodic f, g."""
    rng = np.random.default_rng(seed)
    gr, note = commensurate_grid(tau_f, tau_g, grid, max_n)
    f = random_trig(tau_f, harmonics, rng)
    g = random_trig(tau_g, harmonics if harmonics_g is None else harmonics_g, rng)
    C = commutator_matrix(build_fP(f, gr), build_gQ(g, gr))
    res = float(np.linalg.norm(C.entries, 2))
    norm = f.sup * g.sup
    return PeriodicResult(res, norm, res / norm if norm > 0 else 0.0, gr, note, int(seed), tau_f, tau_g)


# -- inequality battery ---------------------------------------------------------

@dataclass
class InequalityRecord:
    name: str
    worst_margin: float
    worst_location: float
    passed: bool
    tolerance: float
    error_estimate: float = 0.0


@dataclass
class InequalityReport:
    records: list
    a_hat: float
    sigma2: float
    window: tuple
    notes: list = field(default_factory=list)

    @property
    def all_pass(self) -> bool:
        return all(r.passed for r in self.records)

    def __getitem__(self, name) -> InequalityRecord:
        for r in self.records:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_json(self):
        return {
            "a_hat": self.a_hat,
            "sigma2": self.sigma2,
            "window": list(self.window),
            "records": [asdict(r) for r in self.records],
            "notes": list(self.notes),
        }


def _diff4(v, h, k=1):
    """4th-order centered derivative with node stride k (edges padded)."""
    d = np.empty_like(v)
    d[2 * k:-2 * k] = (-v[4 * k:] + 8 * v[3 * k:-k] - 8 * v[k:-3 * k] + v[:-4 * k]) / (12 * k * h)
    d[:2 * k] = d[2 * k]
    d[-2 * k:] = d[-2 * k - 1]
    return d


def _sampled_riccati(d, h, a_hat, sel, k=1):
    """(|g''| / (2 a_hat g'), u, Riccati margin) from g' samples, stencil stride k."""
    g2_all = _diff4(d, h, k)
    g3_all = _diff4(g2_all, h, k)
    gp, g2, g3 = d[sel], g2_all[sel], g3_all[sel]
    ratio2 = np.abs(g2) / (2 * a_hat * gp)
    u = -g2 / (2 * gp)
    up = -(g3 * gp - g2 * g2) / (2 * gp * gp)
    return ratio2, u, (a_hat**2 - u * u - up) / a_hat**2


def _record(name, margins, xs, tol, err=0.0):
    k = int(np.argmin(margins))
    worst = float(margins[k])
    return InequalityRecord(name, worst, float(xs[k]), bool(worst >= -tol - err), tol, float(err))


def _mixture_moments(g: KatoFunction, xs, chunk=256):
    """log g'(x) and the mean / variance of T_k = tanh(a_hat (x - t_k)) under
    p_k(x) proportional to w_k sech^2(a_hat (x - t_k)), all without underflow.

    For a tanh mixture with slope s these give u = -g''/(2 g') = s E[T] and
    u' + u^2 = s^2 (1 - 3 Var[T]), so the Riccati margin needs no cancellation.
    """
    s = g.a_hat
    loc, w = g.measure.locations, g.measure.weights
    lg = np.empty(xs.size)
    mean = np.empty(xs.size)
    var = np.empty(xs.size)
    for start in range(0, xs.size, chunk):
        sl = slice(start, start + chunk)
        z = s * (xs[sl, None] - loc[None, :])
        lp = np.log(w)[None, :] - 2.0 * logcosh_np(z)
        top = lp.max(axis=1, keepdims=True)
        e = np.exp(lp - top)
        tot = e.sum(axis=1, keepdims=True)
        p = e / tot
        T = np.tanh(z)
        mu = (p * T).sum(axis=1)
        mean[sl] = mu
        if loc.size <= PAIRWISE_MAX:
            # Var = 1/2 sum_jk p_j p_k (T_j - T_k)^2 with the differences taken as
            # sinh(z_j - z_k) / (cosh z_j cosh z_k), exact even when tanh saturates
            lc = logcosh_np(z)
            dz = z[:, :, None] - z[:, None, :]
            dT = np.sinh(dz) * np.exp(-lc[:, :, None] - lc[:, None, :])
            var[sl] = 0.5 * np.einsum("ij,ik,ijk->i", p, p, dT * dT)
        else:
            var[sl] = (p * (T - mu[:, None]) ** 2).sum(axis=1)
        lg[sl] = math.log(s) + top[:, 0] + np.log(tot[:, 0])
    return lg, mean, var


def _psi_second(lg_e, h):
    """5-point psi'' with psi = exp(-lg/2), plus a Richardson error estimate.

    ``lg_e`` carries four extra stencil points on each side of the scan.
    Returns (psi'' / psi, error estimate of that ratio), on the scan points.
    """
    # scale by psi at the centre point so growth in the tails cannot overflow
    ctr = lg_e[4:-4]
    n = ctr.size
    idx = np.arange(n)[:, None] + np.arange(9)[None, :]
    rel = np.exp(-0.5 * (lg_e[idx] - ctr[:, None]))  # psi(x + k h) / psi(x), k = -4..4
    d2 = (-rel[:, 2] + 16 * rel[:, 3] - 30 * rel[:, 4] + 16 * rel[:, 5] - rel[:, 6]) / (12 * h * h)
    d2h = (-rel[:, 0] + 16 * rel[:, 2] - 30 * rel[:, 4] + 16 * rel[:, 6] - rel[:, 8]) / (48 * h * h)
    rounding = (64 / 12) * 4 * EPS * np.abs(rel).max(axis=1) / (h * h)
    return d2, np.abs(d2 - d2h) + rounding


def inequality_suite(g, a_hat=None, n=2001, span=8.0, tol=1e-10, window=None) -> InequalityReport:
    """Scan the inequality battery for g' with tanh slope bound a_hat.

    Margins are relative (0 means equality):
      exp_bound    log g'(x) - log g'(x0) + 2 a_hat |x - x0|, pairs x != x0
      second_deriv 1 - |g''| / (2 a_hat g')
      tail_bound   1 - g' / (2 a_hat |g(+-inf) - g|), both tails
      cosh_lower   g'(x) cosh^2(a_hat (x - x0)) / g'(x0) - 1, odd g, x != x0
      schrodinger  1 - psi'' / (a_hat^2 psi), psi = (g')^(-1/2), 5-point stencil
      riccati      (a_hat^2 - u^2 - u') / a_hat^2, u = psi'/psi = -g''/(2 g')
      log_deriv    1 - |u| / a_hat
    A record passes when its margin is >= -(tol + error_estimate); the
    estimate is the Richardson stencil error for psi'' and a rounding or
    difference-noise bound elsewhere.
    """
    notes = []
    if isinstance(g, KatoFunction):
        a_hat = g.a_hat if a_hat is None else float(a_hat)
        if g.measure.is_zero:
            raise NonMonotoneError("constant g has no strictly increasing window")
        if window is None:
            pad = span / g.a_hat
            loc = g.measure.locations
            window = (float(loc.min()) - pad, float(loc.max()) + pad)
        xs = np.linspace(window[0], window[1], n)
        h = xs[1] - xs[0]
        xe = np.concatenate([xs[0] - h * np.arange(4, 0, -1), xs, xs[-1] + h * np.arange(1, 5)])
        lg_e, _, _ = _mixture_moments(g, xe)
        lg, mean, var = _mixture_moments(g, xs)
        s = g.a_hat
        ratio2 = (s / a_hat) * np.abs(mean)  # |g''| / (2 a_hat g')
        u = s * mean
        ric = (1.0 - (s / a_hat) ** 2) + 3.0 * (s / a_hat) ** 2 * var
        ric_err = 16 * EPS * np.ones_like(ric)
        d_err = 0.0
        lo_gap, hi_gap = g.tail_gaps(xs)
        gap_err = 0.0
        noise_lg = 0.0
        delta = 0.0
        lg_e_alt = None
        odd = g.is_odd()
        center = g.measure.mean() if odd else None
    elif isinstance(g, SampledFunction):
        if a_hat is None:
            raise ValueError("a_hat is required for sampled g")
        a_hat = float(a_hat)
        if g.boundary_limits is None:
            raise IndeterminateTailsError("tail bound needs declared boundary limits")
        d, method = sampled_derivative(g)
        if method != "declared":
            notes.append("g' from finite differences")
        h = g.spacing
        x_all = np.asarray(g.nodes)
        # nested stride-2 stencils reach 8 nodes out
        sel = np.arange(8, x_all.size - 8)
        if window is not None:
            sel = sel[(x_all[sel] >= window[0]) & (x_all[sel] <= window[1])]
        gp_e = d[sel[0] - 4: sel[-1] + 5]
        if np.any(gp_e <= 0):
            raise NonMonotoneError("g' is not strictly positive on the scan window")
        keep = gp_e > 1e-300
        if not np.all(keep):
            raise NonMonotoneError("g' underflows below 1e-300 inside the window; narrow it")
        xs = x_all[sel]
        lg_e = np.log(gp_e)
        lg = lg_e[4:-4]
        ratio2, u, ric = _sampled_riccati(d, h, a_hat, sel)
        # Richardson: the same stencils at stride 2h bound the truncation error
        ratio2_2, _, ric_2 = _sampled_riccati(d, h, a_hat, sel, 2)
        if method == "declared":
            delta = np.full(sel.size, 4 * EPS)
        else:
            # relative rounding noise of a differenced g' where g' is small
            delta = 8 * EPS * np.abs(np.asarray(g.values)).max() / (h * d[sel])
        ric_err = np.abs(ric - ric_2) + 4 * delta / (h * a_hat) ** 2
        d_err = float(np.max(np.abs(ratio2 - ratio2_2)) + 2 * np.max(delta) / (h * a_hat))
        noise_lg = 2 * float(np.max(delta))
        lg_e_alt = None
        if method != "declared":
            # g' itself carries an h^4 truncation error that the stencils above
            # cannot see; rerun with g' differenced at stride 2h and charge the change
            d_alt = _diff4(np.asarray(g.values, dtype=float), h, 2)
            alt_e = d_alt[sel[0] - 4: sel[-1] + 5]
            if np.all(alt_e > 1e-300):
                r2a, _, rica = _sampled_riccati(d_alt, h, a_hat, sel)
                ric_err = ric_err + np.abs(ric - rica)
                d_err += float(np.max(np.abs(ratio2 - r2a)))
                trunc = np.abs(np.log(alt_e) - lg_e)
                noise_lg += 2 * float(np.max(trunc))
                delta = delta + trunc[4:-4]
                lg_e_alt = np.log(alt_e)
            else:
                notes.append("stride-2 derivative not positive; truncation of g' not estimated")
        vals = np.asarray(g.values)[sel]
        lo_gap = vals - g.boundary_limits[0]
        hi_gap = g.boundary_limits[1] - vals
        # the gaps come from a subtraction; relative rounding grows as they shrink
        gap_err = 4 * EPS * (np.abs(vals) + np.abs(g.boundary_limits).max()) / np.minimum(lo_gap, hi_gap) + delta
        odd = False
        center = None
        window = (float(xs[0]), float(xs[-1]))
        notes.append("cosh lower bound skipped: oddness is not tested for sampled g")
    else:
        raise TypeError("g must be a KatoFunction or SampledFunction")

    recs = []
    worst, wloc = np.inf, 0.0
    for start in range(0, xs.size, 512):
        sl = slice(start, start + 512)
        marg = lg[None, :] - lg[sl, None] + 2 * a_hat * np.abs(xs[None, :] - xs[sl, None])
        rows = np.arange(marg.shape[0])
        marg[rows, rows + start] = np.inf  # x = x0 is equality by definition
        k = np.unravel_index(np.argmin(marg), marg.shape)
        if marg[k] < worst:
            worst, wloc = float(marg[k]), float(xs[k[1]])
    rt = 64 * EPS * (np.abs(lg).max() + 2 * a_hat * (xs[-1] - xs[0])) + noise_lg
    recs.append(InequalityRecord("exp_bound", worst, wloc, bool(worst >= -tol - rt), tol, float(rt)))

    recs.append(_record("second_deriv", 1.0 - ratio2, xs, tol, d_err))

    gp = np.exp(lg)
    gap = np.minimum(lo_gap, hi_gap)
    marg_t = 1.0 - gp / (2 * a_hat * gap)
    err_t = np.broadcast_to(gap_err * (1.0 - marg_t), xs.shape)
    k = int(np.argmin(marg_t + err_t))
    recs.append(InequalityRecord("tail_bound", float(marg_t[k]), float(xs[k]), bool(marg_t[k] >= -tol - err_t[k]), tol, float(err_t[k])))

    if odd:
        z = a_hat * (xs - center)
        lg0 = float(_mixture_moments(g, np.array([center]))[0][0])
        marg = np.expm1(lg + 2 * logcosh_np(z) - lg0)
        off = np.abs(xs - center) > 0.5 * h
        err = 64 * EPS * (1 + np.abs(2 * logcosh_np(z)).max())
        recs.append(_record("cosh_lower", marg[off], xs[off], tol, err))

    d2rel, d2err = _psi_second(lg_e, h)
    marg_s = 1.0 - d2rel / a_hat**2
    err_s = (d2err + 4 * delta / h**2) / a_hat**2
    if lg_e_alt is not None:
        err_s = err_s + np.abs(d2rel - _psi_second(lg_e_alt, h)[0]) / a_hat**2
    k = int(np.argmin(marg_s + err_s))
    recs.append(
        InequalityRecord("schrodinger", float(marg_s[k]), float(xs[k]), bool(marg_s[k] >= -tol - err_s[k]), tol, float(err_s[k]))
    )

    k = int(np.argmin(ric + ric_err))
    recs.append(InequalityRecord("riccati", float(ric[k]), float(xs[k]), bool(ric[k] >= -tol - ric_err[k]), tol, float(ric_err[k])))

    recs.append(_record("log_deriv", 1.0 - np.abs(u) / a_hat, xs, tol, d_err))

    return InequalityReport(recs, a_hat, a_hat**2 / 3.0, tuple(window), notes)


# -- Moebius transforms ---------------------------------------------------------

def moebius(p, q, r, s):
    det = p * s - q * r
    if det == 0:
        raise ValueError("degenerate Moebius map (ps - qr = 0)")
    if det < 0:
        raise ValueError("Moebius map is decreasing (ps - qr < 0); not operator monotone")

    def F(x):
        return (p * x + q) / (r * x + s)

    F.pole = None if r == 0 else -s / r
    return F


def monotone_transform(F, f: KatoFunction, g, grid: GridSpec, tol=1e-8, window: Window = DEFAULT_WINDOW) -> PositivityReport:
    """Positivity of i[F(f(P)), g(Q)] for an increasing Moebius F = (p, q, r, s)."""
    Fm = moebius(*F)
    lo, hi = f.limits
    if Fm.pole is not None and lo <= Fm.pole <= hi:
        raise ValueError(f"pole {Fm.pole:g} lies inside the range [{lo:g}, {hi:g}] of f")
    xi = grid.momentum
    Ff = SampledFunction(xi, Fm(f(xi)), monotone=True)
    C = commutator_matrix(build_fP(Ff, grid), build_gQ(g, grid))
    bracket_F = Fm(hi) - Fm(lo)
    expected = bracket_F * total_variation(g) / (2 * math.pi)
    rep = positivity_spectrum(compress(C.entries, grid, window), tol, expected_trace=expected, route="operator")
    rep.notes.append(f"windowed operator route; boundary leak {boundary_leak(C.entries, grid):.3g}")
    return rep


# -- route equivalence -------------------------------------------------------------

def route_equivalence(f, g, grid: GridSpec, tol=1e-8, spectral_floor=1e-6, window: Window = DEFAULT_WINDOW) -> dict:
    """Kernel route vs windowed operator route.

    Verdicts: raw Nystrom matrix vs windowed operator matrix. Eigenvalues: both
    windowed, compared on all eigenvalues above ``spectral_floor * lambda_max``,
    errors relative to lambda_max.
    """
    km = nystrom_assemble(f, g, grid)
    if km.grid != grid:
        grid = km.grid
    C = commutator_matrix(build_fP(f, grid), build_gQ(g, grid))
    Kw = compress(km.entries, grid, window)
    Cw = compress(C.entries, grid, window)
    rk = positivity_spectrum(km, tol)
    rc = positivity_spectrum(Cw, tol, route="operator")
    ek = np.linalg.eigvalsh(Kw)[::-1]
    ec = np.linalg.eigvalsh(Cw)[::-1]
    scale = max(abs(ek[0]), abs(ek[-1]))
    lead = np.abs(ek) > spectral_floor * scale
    err = np.abs(ek[lead] - ec[lead]) / scale if scale > 0 else np.zeros(0)
    return {
        "grid": grid.to_json(),
        "kernel_verdict": rk.psd_verdict,
        "operator_verdict": rc.psd_verdict,
        "verdicts_agree": rk.psd_verdict == rc.psd_verdict,
        "kernel_relative_min": rk.relative_min,
        "operator_relative_min": rc.relative_min,
        "n_compared": int(lead.sum()),
        "max_eigenvalue_error": float(err.max()) if err.size else 0.0,
        "leading_kernel": [float(v) for v in ek[:5]],
        "leading_operator": [float(v) for v in ec[:5]],
        "frobenius_rel": float(np.linalg.norm(Kw - Cw) / np.linalg.norm(Kw)) if np.linalg.norm(Kw) > 0 else 0.0,
        "operator_leak": boundary_leak(C.entries, grid),
        "predicted_wrap_error": predicted_wrap_error(f, grid, window),
    }


def predicted_wrap_error(f, grid: GridSpec, window: Window = DEFAULT_WINDOW):
    """exp(-a_f d): size of the periodic image of the f(P) kernel at the wrap
    distance d = 2 L (1 - x_frac) between the window and its copy. None for
    sampled f."""
    if not isinstance(f, KatoFunction):
        return None
    return math.exp(-f.a * 2.0 * grid.L * (1.0 - window.x_frac))


# -- perturbation probes -----------------------------------------------------------

FAMILIES = ("bump", "ramp", "width")


def perturbed_pair(f: KatoFunction, g: KatoFunction, family: str, eps: float, grid: GridSpec):
    """(f_eps, g_eps) for one of the shipped families.

    bump   g + eps * gamma', gamma(x) = 4 exp(-2 (x - t0)^2): g' dips to
           g'(t0) - 16 eps, non-monotone once that is negative
    ramp   g + eps * (unit ramp clipped to [-1, 1], Gaussian-mollified, sigma 0.5)
    width  f rescaled to class width a_f (1 + eps), so ab = pi/2 (1 + eps)
    """
    if family == "width":
        return KatoFunction(f.a * (1.0 + eps), f.measure, f.c), g
    x = grid.nodes
    t0 = g.measure.mean() if not g.measure.is_zero else 0.0
    if family == "bump":
        z = x - t0
        e = np.exp(-2.0 * z * z)
        vals = g(x) + eps * (-16.0 * z * e)
        deriv = g.derivative(x) + eps * (-16.0 * e * (1.0 - 4.0 * z * z))
        return f, SampledFunction(x, vals, deriv, g.limits, bool(np.all(np.diff(vals) >= 0)))
    if family == "ramp":
        ramp = SampledFunction(x, np.clip(x - t0, -1.0, 1.0), None, (-1.0, 1.0), True)
        sm = mollify(ramp, 0.5)
        base = SampledFunction.from_function(g, x)
        return f, base + sm.scaled(eps)
    raise ValueError(f"unknown perturbation family {family!r}; choose from {FAMILIES}")


@dataclass
class ProbeEntry:
    parameter: float
    min_eigenvalue: float
    max_eigenvalue: float
    relative_min: float
    psd_verdict: bool
    warnings: list = field(default_factory=list)


def _probe_one(f, g, family, eps, grid, tol):
    fe, ge = perturbed_pair(f, g, family, eps, grid)
    km = nystrom_assemble(fe, ge, grid, auto_double=False)
    rep = positivity_spectrum(km, tol)
    top = rep.top_eigenvalues[0] if rep.top_eigenvalues else 0.0
    return ProbeEntry(float(eps), rep.min_eigenvalue, top, rep.relative_min, rep.psd_verdict, list(km.warnings))


def conjecture_probe(f: KatoFunction, g: KatoFunction, family: str, params, grid: GridSpec, tol=1e-8, workers=None) -> list:
    """Minimum eigenvalue of the kernel-route matrix along a perturbation family.

    Runs the parameter values on a thread pool (``workers`` defaults to the
    COMMUTATORLAB_THREADS cap, else 1); results keep parameter order.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown perturbation family {family!r}; choose from {FAMILIES}")
    params = [float(p) for p in params]
    workers = workers or _backend.thread_cap() or 1
    if workers == 1:
        return [_probe_one(f, g, family, e, grid, tol) for e in params]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda e: _probe_one(f, g, family, e, grid, tol), params))


def catalog_to_json(entries, path=None):
    doc = [asdict(e) for e in entries]
    if path is not None:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)
    return doc


def catalog_to_csv(entries, path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["parameter", "min_eig", "verdict"])
        for e in entries:
            wr.writerow([repr(float(e.parameter)), repr(float(e.min_eigenvalue)), str(e.psd_verdict).lower()])
