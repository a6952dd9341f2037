"""Fourier convention, transforms of Stieltjes measures, grid DFT helpers.

Convention: h_hat(xi) = (2 pi)^(-1/2) int exp(-i x xi) h(x) dx, inverse with
exp(+i x xi). For a Kato function of class width a the measure df has the
closed-form transform

    df_hat(xi) = sum_j w_j exp(-i xi t_j) sqrt(2/pi) (a xi) / sinh(a xi).
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .funcspace import AtomicMeasure, KatoFunction, SampledFunction
from .grid import GridSpec

SQRT_2PI = math.sqrt(2.0 * math.pi)
SERIES_CUTOFF = 1e-4

__all__ = [
    "GridSpec",
    "QuadratureResult",
    "dft_forward",
    "dft_inverse",
    "ft_measure",
    "ft_quadrature",
    "measure_transform",
    "read_vector_csv",
    "write_vector_csv",
    "xi_over_sinh",
]


def xi_over_sinh(z):
    """z / sinh(z), even, with the removable point handled by a series."""
    z = np.abs(np.asarray(z, dtype=float))
    out = np.empty_like(z)
    small = z < SERIES_CUTOFF
    mid = (~small) & (z < 20.0)
    big = z >= 20.0
    zs = z[small] ** 2
    out[small] = 1.0 - zs / 6.0 + 7.0 * zs**2 / 360.0 - 31.0 * zs**3 / 15120.0
    out[mid] = z[mid] / np.sinh(z[mid])
    zb = z[big]
    out[big] = 2.0 * zb * np.exp(-zb) / (-np.expm1(-2.0 * zb))
    return out


def measure_transform(locations, weights, xi):
    """sum_j w_j exp(-i xi t_j) for a weighted point set."""
    xi = np.asarray(xi, dtype=float)
    if len(weights) == 0:
        return np.zeros(xi.shape, dtype=complex)
    return np.exp(-1j * xi[..., None] * np.asarray(locations)) @ np.asarray(weights, dtype=float)


def ft_measure(f: KatoFunction, xi):
    """Closed-form df_hat(xi); df_hat(0) = [f] / sqrt(2 pi)."""
    xi = np.asarray(xi, dtype=float)
    m = f.measure
    out = (
        2.0
        / SQRT_2PI
        * xi_over_sinh(f.a * xi)
        * measure_transform(m.locations, m.weights, xi)
    )
    return out if xi.ndim else complex(out)


@dataclass
class QuadratureResult:
    values: np.ndarray
    truncated: bool = False
    edge_magnitude: float = 0.0
    notes: list = field(default_factory=list)


def ft_quadrature(source, xi, edge_tol=1e-12) -> QuadratureResult:
    """(2 pi)^(-1/2) (atoms + trapezoid integral of a density) against exp(-i xi x).

    ``source`` is an AtomicMeasure, or a SampledFunction whose derivative
    samples are the density (sign unrestricted, so non-monotone g works).
    The truncation flag is raised when the density at either grid edge
    exceeds ``edge_tol`` relative to its peak.
    """
    xi = np.asarray(xi, dtype=float)
    if isinstance(source, KatoFunction):
        source = source.measure
    if isinstance(source, AtomicMeasure):
        vals = measure_transform(source.locations, source.weights, xi) / SQRT_2PI
        edge = 0.0
        if source.density is not None:
            v = source.density.values
            edge = float(max(v[0], v[-1]) / max(v.max(), 1e-300))
        trunc = edge > edge_tol
    elif isinstance(source, SampledFunction):
        if source.derivative is None:
            raise ValueError("sampled function needs derivative samples for its measure")
        d = source.derivative
        w = np.full(d.size, source.spacing)
        w[0] = w[-1] = 0.5 * source.spacing
        vals = measure_transform(source.nodes, w * d, xi) / SQRT_2PI
        peak = max(float(np.max(np.abs(d))), 1e-300)
        edge = float(max(abs(d[0]), abs(d[-1])) / peak)
        trunc = edge > edge_tol
    else:
        raise TypeError(f"cannot transform {type(source).__name__}")
    res = QuadratureResult(vals if xi.ndim else complex(vals), trunc, edge)
    if trunc:
        res.notes.append(f"integrand at grid edge is {edge:.2e} of its peak")
    return res


def _check_length(v, grid):
    v = np.asarray(v)
    if v.shape != (grid.N,):
        raise ValueError(f"vector length {v.shape} does not match grid size {grid.N}")
    return v


def dft_forward(v, grid: GridSpec):
    """Samples on nodes -> transform samples on ascending momentum nodes.

    v_hat_k = h / sqrt(2 pi) sum_j exp(-i xi_k x_j) v_j, the trapezoid rule
    for the continuum transform. It is unitary between the weighted norms
    h |v|^2 and (pi / L) |v_hat|^2.
    """
    v = _check_length(v, grid)
    xi = grid.fft_momentum
    # the node origin is -L, not 0: fold the offset into a phase
    vh = np.fft.fft(v) * np.exp(1j * xi * grid.L) * (grid.h / SQRT_2PI)
    return np.fft.fftshift(vh)


def dft_inverse(vh, grid: GridSpec):
    vh = _check_length(vh, grid)
    xi = grid.fft_momentum
    spec = np.fft.ifftshift(vh) * np.exp(-1j * xi * grid.L) * (SQRT_2PI / grid.h)
    return np.fft.ifft(spec)


def write_vector_csv(path, v):
    v = np.asarray(v, dtype=complex)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["index", "re", "im"])
        for i, z in enumerate(v):
            wr.writerow([i, repr(float(z.real)), repr(float(z.imag))])


def read_vector_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    idx = np.array([int(r["index"]) for r in rows])
    if not np.array_equal(idx, np.arange(len(rows))):
        raise ValueError("vector CSV indices must run 0..N-1 in order")
    return np.array([complex(float(r["re"]), float(r["im"])) for r in rows])
