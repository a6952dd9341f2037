import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from commutatorlab.fourier import (
    dft_forward,
    dft_inverse,
    ft_measure,
    ft_quadrature,
    read_vector_csv,
    write_vector_csv,
    xi_over_sinh,
)
from commutatorlab.funcspace import AtomicMeasure, Density, KatoFunction, SampledFunction
from commutatorlab.grid import GridSpec


def test_xi_over_sinh_series_continuity():
    z = np.array([0.0, 0.99e-4, 1.01e-4, 1e-3, 19.9, 20.1, 700.0, 800.0])
    ref = np.array([1.0] + [t / math.sinh(t) for t in z[1:6]] + [0.0, 0.0])
    ref[6] = 2 * 700 * math.exp(-700)
    got = xi_over_sinh(z)
    assert np.allclose(got[:6], ref[:6], rtol=1e-15, atol=0)
    assert got[6] == pytest.approx(ref[6], rel=1e-13)
    assert got[7] >= 0
    assert xi_over_sinh(-0.5) == xi_over_sinh(0.5)


def test_ft_measure_at_zero():
    f = KatoFunction.tanh(1.0)
    assert ft_measure(f, 0.0) == pytest.approx(math.sqrt(2 / math.pi))
    g = KatoFunction.mixture(0.7, [(1.0, 0.3), (-2.0, 0.45)])
    assert ft_measure(g, 0.0).real == pytest.approx(2 * 0.75 / math.sqrt(2 * math.pi))


def test_centered_atom_real_even():
    f = KatoFunction.mixture(1.3, [(0.0, 1.0)])
    xi = np.linspace(-5, 5, 41)
    v = ft_measure(f, xi)
    assert np.all(v.imag == 0)
    assert np.allclose(v, v[::-1], rtol=0, atol=1e-16)


def test_ft_measure_against_quadrature():
    f = KatoFunction.mixture(1.0, [(1.0, 0.5)])
    grid = GridSpec(60, 8192)
    s = SampledFunction.from_function(f, grid.nodes)
    for xi in (0.0, 0.7, 2.0, 5.0):
        q = ft_quadrature(s, xi)
        assert not q.truncated
        assert abs(q.values - ft_measure(f, xi)) <= 1e-8


def test_ft_quadrature_dirac_and_gaussian():
    m = AtomicMeasure([(0.0, 1.0)])
    for xi in (0.0, 1.0, -7.5):
        assert ft_quadrature(m, xi).values == pytest.approx(1 / math.sqrt(2 * math.pi))
    x = np.linspace(-12, 12, 2401)
    dens = Density(x[0], x[1] - x[0], np.exp(-x**2 / 2))
    q = ft_quadrature(AtomicMeasure([], dens), np.array([0.0, 1.0, 2.5]))
    assert np.allclose(q.values, np.exp(-np.array([0.0, 1.0, 2.5]) ** 2 / 2), atol=1e-12)
    narrow = Density(-2.0, 0.01, np.exp(-np.linspace(-2, 2, 401) ** 2 / 2))
    assert ft_quadrature(AtomicMeasure([], narrow), 1.0).truncated


def test_dft_constant_and_roundtrip():
    grid = GridSpec(8.0, 64)
    v = np.ones(grid.N)
    vh = dft_forward(v, grid)
    k0 = np.argmin(np.abs(grid.momentum))
    mask = np.ones(grid.N, bool)
    mask[k0] = False
    assert np.max(np.abs(vh[mask])) < 1e-13
    assert abs(vh[k0]) > 1
    rng = np.random.default_rng(0)
    w = rng.standard_normal(grid.N) + 1j * rng.standard_normal(grid.N)
    assert np.max(np.abs(dft_inverse(dft_forward(w, grid), grid) - w)) < 1e-12
    with pytest.raises(ValueError):
        dft_forward(np.ones(3), grid)


def test_dft_parseval_and_gaussian_pair():
    grid = GridSpec(20.0, 512)
    rng = np.random.default_rng(1)
    v = rng.standard_normal(grid.N)
    vh = dft_forward(v, grid)
    assert grid.dxi * np.sum(np.abs(vh) ** 2) == pytest.approx(grid.h * np.sum(v**2), rel=1e-12)
    g = np.exp(-grid.nodes**2 / 2)
    assert np.max(np.abs(dft_forward(g, grid) - np.exp(-grid.momentum**2 / 2))) < 1e-12


def test_vector_csv_roundtrip(tmp_path):
    v = np.array([1 + 2j, -0.5, 3e-17j])
    p = tmp_path / "v.csv"
    write_vector_csv(p, v)
    assert p.read_text().splitlines()[0] == "index,re,im"
    assert np.array_equal(read_vector_csv(p), v)


@given(st.floats(0.2, 3.0), st.lists(st.tuples(st.floats(-4, 4), st.floats(0.05, 1.0)), min_size=1, max_size=4))
def test_transform_symmetry_and_bound(a, atoms):
    f = KatoFunction.mixture(a, atoms)
    xi = np.linspace(-20, 20, 81)
    v = ft_measure(f, xi)
    assert np.allclose(ft_measure(f, -xi), np.conj(v), atol=1e-15)
    bound = 2 * f.measure.total_mass / math.sqrt(2 * math.pi)
    assert np.all(np.abs(v) <= bound * (1 + 1e-12))
    big = np.abs(xi) > 1
    # |df_hat| <= C |xi| exp(-a |xi|) with C = [f] sqrt(2/pi) a / (1 - e^{-2a})
    C = 2 * f.measure.total_mass * math.sqrt(2 / math.pi) * a / (1 - math.exp(-2 * a))
    assert np.all(np.abs(v[big]) <= C * np.abs(xi[big]) * np.exp(-a * np.abs(xi[big])) * (1 + 1e-12))
