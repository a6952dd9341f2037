"""Bounded monotone functions built from tanh mixtures, and sampled functions.

A Kato-class function of strip half-width ``a`` is

    f(x) = c + sum_j w_j tanh(a_hat (x - t_j)) + int tanh(a_hat (x - t)) rho(t) dt,

with a_hat = pi / (2 a) and a finite positive measure (atoms plus an optional
gridded density). The convention a_hat = pi / (2 a) is used everywhere: ``a``
is the half-width of the analyticity strip and ``a_hat`` the tanh slope.
"""

import json
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ._kernels import logcosh_np
from .grid import GridSpec

STRIP_MARGIN = 0.999


class StripBoundaryError(ValueError):
    """Requested point lies on or outside the analyticity strip."""


class IndeterminateTailsError(ValueError):
    """Boundary limits are needed but were not declared."""


def _readonly(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Density:
    """Nonnegative density sampled at x0 + k dx, trapezoid-integrated."""

    x0: float
    dx: float
    values: np.ndarray

    def __post_init__(self):
        v = _readonly(self.values)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("density needs at least two samples")
        if not self.dx > 0:
            raise ValueError("density spacing must be positive")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("density values must be finite and nonnegative")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "x0", float(self.x0))
        object.__setattr__(self, "dx", float(self.dx))

    @property
    def nodes(self):
        return self.x0 + self.dx * np.arange(self.values.size)

    @property
    def quadrature_weights(self):
        w = np.full(self.values.size, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w

    @property
    def mass(self) -> float:
        return float(np.dot(self.quadrature_weights, self.values))


class AtomicMeasure:
    """Finite positive measure: weighted atoms plus an optional density.

    ``locations``/``weights`` give the flattened quadrature form (atoms first,
    then density nodes with trapezoid weight times value); every evaluation in
    the package integrates against that form.
    """

    def __init__(self, atoms=(), density: Density | None = None):
        atoms = np.asarray(atoms, dtype=float).reshape(-1, 2)
        if np.any(atoms[:, 1] <= 0) or not np.all(np.isfinite(atoms)):
            raise ValueError("atom weights must be finite and strictly positive")
        self.atoms = _readonly(atoms)
        self.density = density
        loc, wt = atoms[:, 0], atoms[:, 1]
        if density is not None:
            keep = density.values > 0
            loc = np.concatenate([loc, density.nodes[keep]])
            wt = np.concatenate([wt, (density.quadrature_weights * density.values)[keep]])
        self.locations = _readonly(loc)
        self.weights = _readonly(wt)
        self.total_mass = float(atoms[:, 1].sum() + (density.mass if density else 0.0))

    @property
    def is_zero(self) -> bool:
        return self.total_mass == 0.0

    def mean(self) -> float:
        return float(np.dot(self.weights, self.locations) / self.total_mass)

    def variance(self) -> float:
        mu = self.mean()
        return float(np.dot(self.weights, (self.locations - mu) ** 2) / self.total_mass)

    def to_json(self) -> dict:
        dens = None
        if self.density is not None:
            dens = {
                "x0": self.density.x0,
                "dx": self.density.dx,
                "values": self.density.values.tolist(),
            }
        return {"atoms": self.atoms.tolist(), "density": dens}

    @classmethod
    def from_json(cls, doc: dict) -> "AtomicMeasure":
        dens = doc.get("density")
        density = None
        if dens is not None:
            density = Density(dens["x0"], dens["dx"], np.asarray(dens["values"], dtype=float))
        return cls(doc.get("atoms", []), density)

    def __repr__(self):
        return (
            f"AtomicMeasure(atoms={self.atoms.tolist()}, "
            f"density={'yes' if self.density else 'no'}, mass={self.total_mass:.6g})"
        )


class KatoFunction:
    """c + int tanh(a_hat (x - t)) dnu(t), a member of the class K_a."""

    def __init__(self, a: float, measure: AtomicMeasure, c: float = 0.0):
        if not (a > 0 and math.isfinite(a)):
            raise ValueError(f"class width a must be positive, got {a}")
        self.a = float(a)
        self.measure = measure
        self.c = float(c)

    @property
    def a_hat(self) -> float:
        return math.pi / (2.0 * self.a)

    @classmethod
    def tanh(cls, slope=1.0, center=0.0, weight=1.0, c=0.0):
        """weight * tanh(slope (x - center)) + c."""
        return cls(math.pi / (2.0 * slope), AtomicMeasure([(center, weight)]), c)

    @classmethod
    def mixture(cls, a, atoms, c=0.0):
        return cls(a, AtomicMeasure(atoms), c)

    @classmethod
    def constant(cls, c=0.0, a=1.0):
        return cls(a, AtomicMeasure(), c)

    @property
    def limits(self):
        m = self.measure.total_mass
        return (self.c - m, self.c + m)

    @property
    def sup_bound(self) -> float:
        return self.measure.total_mass + abs(self.c)

    def __call__(self, x):
        return kato_eval(self, x)

    def derivative(self, x, order=1):
        return kato_derivative(self, x, order)

    def tail_gaps(self, x):
        """(f(x) - f(-inf), f(+inf) - f(x)) without cancellation."""
        x = np.asarray(x, dtype=float)
        s = self.a_hat
        z = 2.0 * s * (x[..., None] - self.measure.locations)
        w = self.measure.weights
        return (2.0 * expit(z)) @ w, (2.0 * expit(-z)) @ w

    def is_odd(self, rtol=1e-12):
        """Whether f - c is odd about the measure's mean (symmetric measure)."""
        m = self.measure
        if m.is_zero:
            return True
        mu = m.mean()
        loc = m.locations - mu
        order = np.argsort(loc)
        rorder = np.argsort(-loc)
        return bool(
            np.allclose(loc[order], -loc[rorder], rtol=rtol, atol=rtol)
            and np.allclose(m.weights[order], m.weights[rorder], rtol=rtol, atol=0)
        )

    def to_json(self) -> dict:
        doc = {"a": self.a, "c": self.c}
        doc.update(self.measure.to_json())
        return doc

    @classmethod
    def from_json(cls, doc) -> "KatoFunction":
        if isinstance(doc, str):
            doc = json.loads(doc)
        return cls(float(doc["a"]), AtomicMeasure.from_json(doc), float(doc.get("c", 0.0)))

    def __repr__(self):
        return f"KatoFunction(a={self.a:.6g}, c={self.c:.6g}, {self.measure!r})"


def kato_eval(f: KatoFunction, x):
    x = np.asarray(x, dtype=float)
    m = f.measure
    if m.is_zero:
        return np.full(x.shape, f.c) if x.ndim else float(f.c)
    out = f.c + np.tanh(f.a_hat * (x[..., None] - m.locations)) @ m.weights
    return out if x.ndim else float(out)


def _sech2(z):
    return np.exp(-2.0 * logcosh_np(z))


def kato_derivative(f: KatoFunction, x, order=1):
    """Analytic derivatives of order 1, 2 or 3; order 1 is always >= 0."""
    x = np.asarray(x, dtype=float)
    m = f.measure
    s = f.a_hat
    if m.is_zero:
        return np.zeros(x.shape) if x.ndim else 0.0
    z = s * (x[..., None] - m.locations)
    sech2 = _sech2(z)
    if order == 1:
        terms = s * sech2
    elif order == 2:
        terms = -2.0 * s**2 * sech2 * np.tanh(z)
    elif order == 3:
        t = np.tanh(z)
        terms = -2.0 * s**3 * sech2 * (1.0 - 3.0 * t * t)
    else:
        raise ValueError("order must be 1, 2 or 3")
    out = terms @ m.weights
    return out if x.ndim else float(out)


def im_continuation(g: KatoFunction, x, y):
    """Im g(x + i y) inside the strip |y| <= 0.999 a.

    Per atom, Im tanh(s (x + i y - t)) = sin(2 s y) / (cosh(2 s (x - t)) + cos(2 s y)).
    """
    y = float(y)
    if abs(y) > STRIP_MARGIN * g.a:
        raise StripBoundaryError(
            f"|y| = {abs(y):.6g} is outside the strip margin {STRIP_MARGIN} * a = {STRIP_MARGIN * g.a:.6g}"
        )
    x = np.asarray(x, dtype=float)
    m = g.measure
    if m.is_zero or y == 0.0:
        return np.zeros(x.shape) if x.ndim else 0.0
    s = g.a_hat
    th = 2.0 * s * y
    z = np.abs(2.0 * s * (x[..., None] - m.locations))
    e = np.exp(-z)
    # 1 / (cosh z + cos th) written with e = exp(-|z|) to avoid overflow
    terms = math.sin(th) * 2.0 * e / (1.0 + e * e + 2.0 * math.cos(th) * e)
    out = terms @ m.weights
    return out if x.ndim else float(out)


def recovery_scale(y: float) -> float:
    """kappa such that rho = kappa / (2 pi) * Im g(t + i y) rebuilds g at width y."""
    return math.pi / y


def recover_measure(g: KatoFunction, y: float, grid: GridSpec) -> AtomicMeasure:
    """Density-only measure (2 pi)^-1 kappa Im g(t + i y) on the grid nodes.

    With kappa = pi / y, ``rebuild(recovered, y, g.c)`` reproduces g. The
    rebuilt function lives in K_y, which contains K_a for y < a.
    """
    if not 0.0 < y <= STRIP_MARGIN * g.a:
        raise StripBoundaryError(f"recovery height must satisfy 0 < y <= {STRIP_MARGIN} a")
    x = grid.nodes
    dens = recovery_scale(y) / (2.0 * math.pi) * im_continuation(g, x, y)
    dens = np.maximum(dens, 0.0)
    measure = AtomicMeasure([], Density(x[0], grid.h, dens))
    if not math.isfinite(measure.total_mass):
        raise ValueError("recovered mass is not finite")
    return measure


def rebuild(measure: AtomicMeasure, y: float, c: float = 0.0) -> KatoFunction:
    return KatoFunction(y, measure, c)


def recovery_check(g: KatoFunction, y: float, grid: GridSpec, n_test=401) -> dict:
    """Closed-loop recover -> rebuild -> compare on [-L/2, L/2]."""
    rec = recover_measure(g, y, grid)
    h = rebuild(rec, y, g.c)
    xs = np.linspace(-grid.L / 2, grid.L / 2, n_test)
    mass = g.measure.total_mass
    return {
        "kappa": recovery_scale(y),
        "rebuild_width": y,
        "sup_discrepancy": float(np.max(np.abs(h(xs) - g(xs)))),
        "recovered_mass": rec.total_mass,
        "mass_ratio": rec.total_mass / mass if mass > 0 else float("nan"),
    }


def variance_functional(f: KatoFunction) -> float:
    """Variance of the probability measure f'(xi) d xi / [f].

    Each tanh component contributes pi^2 / (12 a_hat^2) = a^2 / 3; the atom
    locations add their own variance.
    """
    m = f.measure
    if m.is_zero:
        raise ValueError("variance of a zero measure is undefined")
    return math.pi**2 / (12.0 * f.a_hat**2) + m.variance()


class SampledFunction:
    """A bounded function known only on uniform nodes.

    Tail values are declared (``boundary_limits``), never extrapolated.
    """

    def __init__(
        self,
        nodes,
        values,
        derivative=None,
        boundary_limits=None,
        monotone=False,
        sup_norm=None,
    ):
        nodes = _readonly(nodes)
        values = _readonly(values)
        if nodes.ndim != 1 or nodes.shape != values.shape or nodes.size < 5:
            raise ValueError("nodes and values must be 1-D arrays of equal length >= 5")
        steps = np.diff(nodes)
        if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * steps[0]:
            raise ValueError("nodes must be uniform and increasing")
        if derivative is not None:
            derivative = _readonly(derivative)
            if derivative.shape != values.shape:
                raise ValueError("derivative samples must match values")
        if monotone and np.any(np.diff(values) < 0):
            raise ValueError("flagged monotone but values decrease")
        vmax = float(np.max(np.abs(values)))
        if sup_norm is None:
            sup_norm = vmax
        elif vmax > sup_norm * (1 + 1e-12):
            raise ValueError("values exceed the declared sup norm")
        self.nodes = nodes
        self.values = values
        self.derivative = derivative
        self.boundary_limits = None if boundary_limits is None else tuple(map(float, boundary_limits))
        self.monotone = bool(monotone)
        self.sup_norm = float(sup_norm)

    @property
    def spacing(self) -> float:
        return float(self.nodes[1] - self.nodes[0])

    def index_of(self, x, atol=1e-9):
        x = np.asarray(x, dtype=float)
        r = (x - self.nodes[0]) / self.spacing
        idx = np.rint(r)
        if np.any(np.abs(r - idx) > atol) or np.any(idx < 0) or np.any(idx >= self.nodes.size):
            raise ValueError("sampled functions can only be evaluated at their nodes")
        return idx.astype(int)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = self.values[self.index_of(x)]
        return out if x.ndim else float(out)

    def derivative_at(self, x):
        if self.derivative is None:
            raise ValueError("no derivative samples")
        x = np.asarray(x, dtype=float)
        out = self.derivative[self.index_of(x)]
        return out if x.ndim else float(out)

    @classmethod
    def from_function(cls, fn, nodes, monotone=None):
        """Sample a KatoFunction (values, derivative and limits) on the nodes."""
        nodes = np.asarray(nodes, dtype=float)
        vals = fn(nodes)
        deriv = fn.derivative(nodes) if hasattr(fn, "derivative") else None
        lims = getattr(fn, "limits", None)
        if monotone is None:
            monotone = bool(np.all(np.diff(vals) >= 0))
        sup = fn.sup_bound if hasattr(fn, "sup_bound") else None
        return cls(nodes, vals, deriv, lims, monotone, sup)

    def __add__(self, other):
        if not isinstance(other, SampledFunction) or not np.array_equal(self.nodes, other.nodes):
            return NotImplemented
        deriv = None
        if self.derivative is not None and other.derivative is not None:
            deriv = self.derivative + other.derivative
        lims = None
        if self.boundary_limits and other.boundary_limits:
            lims = tuple(a + b for a, b in zip(self.boundary_limits, other.boundary_limits))
        vals = self.values + other.values
        return SampledFunction(self.nodes, vals, deriv, lims, bool(np.all(np.diff(vals) >= 0)))

    def scaled(self, k):
        deriv = None if self.derivative is None else k * self.derivative
        lims = None if self.boundary_limits is None else tuple(k * v for v in self.boundary_limits)
        return SampledFunction(self.nodes, k * self.values, deriv, lims, self.monotone and k >= 0)

    def to_csv(self, path):
        cols = [self.nodes, self.values]
        header = "x,value"
        if self.derivative is not None:
            cols.append(self.derivative)
            header += ",derivative"
        np.savetxt(path, np.column_stack(cols), delimiter=",", header=header, comments="", fmt="%.17g")

    @classmethod
    def from_csv(cls, path, boundary_limits=None, monotone=False):
        data = np.genfromtxt(path, delimiter=",", names=True)
        deriv = data["derivative"] if "derivative" in data.dtype.names else None
        return cls(data["x"], data["value"], deriv, boundary_limits, monotone)


def total_variation(f) -> float:
    """[f] = f(+inf) - f(-inf)."""
    if isinstance(f, KatoFunction):
        return 2.0 * f.measure.total_mass
    lims = getattr(f, "boundary_limits", None)
    if lims is None:
        raise IndeterminateTailsError("sampled function has no declared boundary limits")
    return lims[1] - lims[0]


def mollify(f: SampledFunction, sigma: float, radius=8.0) -> SampledFunction:
    """Convolve with the unit-mass Gaussian of width sigma.

    The series is padded with the declared boundary limits (edge values when
    none are declared). Derivative samples come from the derivative of the
    Gaussian, so the output is smooth and carries f' as well.
    """
    h = f.spacing
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if h >= sigma / 4:
        raise ValueError(f"grid spacing {h:.3g} is too coarse for sigma = {sigma:.3g} (need h < sigma/4)")
    r = int(math.ceil(radius * sigma / h))
    k = h * np.arange(-r, r + 1)
    gk = np.exp(-0.5 * (k / sigma) ** 2)
    z = gk.sum()
    kern = gk / z
    dkern = -(k / sigma**2) * gk / z
    if f.boundary_limits is not None:
        lo, hi = f.boundary_limits
    else:
        lo, hi = f.values[0], f.values[-1]
    padded = np.concatenate([np.full(r, lo), f.values, np.full(r, hi)])
    vals = np.convolve(padded, kern, mode="valid")
    deriv = np.convolve(padded, dkern, mode="valid")
    return SampledFunction(
        f.nodes,
        vals,
        deriv,
        f.boundary_limits,
        f.monotone and bool(np.all(np.diff(vals) >= 0)),
        max(f.sup_norm, float(np.max(np.abs(vals)))),
    )


def load_function(doc, base_dir="."):
    """KatoFunction JSON, or {"file": csv, "boundary_limits": [...], "monotone": bool}."""
    if "file" in doc:
        path = doc["file"]
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        return SampledFunction.from_csv(path, doc.get("boundary_limits"), doc.get("monotone", False))
    return KatoFunction.from_json(doc)
