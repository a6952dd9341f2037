import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from commutatorlab.funcspace import KatoFunction, SampledFunction
from commutatorlab.grid import GridSpec
from commutatorlab.kernel import (
    BoundaryDecayWarning,
    RankDeficiencyError,
    ReducedAccuracyWarning,
    commutator_kernel,
    det2x2_tanh,
    eigenfunctions,
    finite_rank_identities,
    numerical_rank,
    nystrom_assemble,
    rank_n_factors,
    rank_n_pair,
    read_matrix_binary,
    read_matrix_csv,
    tanh_rank_n_kernel,
    write_matrix_binary,
    write_matrix_csv,
)

GRID = GridSpec(20, 512)


def _df_hat_quad(f, u):
    re = quad(lambda x: f.derivative(x) * math.cos(u * x), -60, 60, limit=400)[0]
    im = quad(lambda x: -f.derivative(x) * math.sin(u * x), -60, 60, limit=400)[0]
    return complex(re, im) / math.sqrt(2 * math.pi)


def test_kernel_against_quadrature_oracle():
    f = KatoFunction.mixture(1.0, [(0.3, 0.6), (-1.0, 0.4)])
    g = KatoFunction.mixture(math.pi / 2, [(0.5, 1.0)])
    for x, y in [(0.0, 1.0), (-2.0, 0.5), (1.5, 1.5)]:
        if x == y:
            dd = g.derivative(x)
        else:
            dd = (g(x) - g(y)) / (x - y)
        want = dd * _df_hat_quad(f, y - x) / math.sqrt(2 * math.pi)
        assert abs(commutator_kernel(f, g, x, y) - want) <= 1e-10 * abs(want)


def test_kernel_diagonal_value():
    f, g = rank_n_pair(1.0, 1)
    x = np.linspace(-3, 3, 7)
    d = commutator_kernel(f, g, x, x)
    assert np.allclose(d, g.derivative(x) * 2 / (2 * math.pi), rtol=1e-14)


def test_nystrom_hermitian_and_trace():
    f = KatoFunction.mixture(1.0, [(-1, 0.2), (0.5, 0.5), (2, 0.3)])
    g = KatoFunction.mixture(math.pi / 2, [(-3, 0.3), (0, 1.0), (2.5, 0.5)])
    km = nystrom_assemble(f, g, GRID)
    assert km.hermitian_defect == 0.0
    assert km.expected_trace == pytest.approx((2 * 1.0) * (2 * 1.8) / (2 * math.pi))
    assert np.trace(km.entries).real == pytest.approx(km.expected_trace, rel=1e-6)
    lam = km.eigvalsh()
    assert lam[0] >= -1e-8 * lam[-1]
    assert np.allclose(km.kernel_values() * np.sqrt(np.outer(km.weights, km.weights)), km.entries)


def test_auto_doubling_and_warning():
    f = KatoFunction.tanh(1.0)
    g = KatoFunction.tanh(0.3)
    small = GridSpec(5, 64)
    km = nystrom_assemble(f, g, small)
    assert km.grid.L > small.L and km.grid.h == small.h
    assert km.boundary_decay <= 1e-12
    with pytest.warns(BoundaryDecayWarning):
        nystrom_assemble(f, g, small, auto_double=False)


def test_sampled_g_without_derivative_warns():
    f = KatoFunction.tanh(1.0)
    x = GRID.nodes
    g = SampledFunction(x, np.tanh(x), boundary_limits=(-1, 1), monotone=True)
    with pytest.warns(ReducedAccuracyWarning):
        km = nystrom_assemble(f, g, GRID)
    assert km.diagonal_method == "finite-difference"
    ref = nystrom_assemble(f, KatoFunction.tanh(1.0), GRID)
    assert np.max(np.abs(km.entries - ref.entries)) < 1e-3 * np.max(np.abs(ref.entries))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_rank_n_closed_form(n):
    beta = 1.0
    f, g = rank_n_pair(beta, n)
    grid = GridSpec(20 if n < 3 else 40, 512 if n < 3 else 1024)
    km = nystrom_assemble(f, g, grid, auto_double=False)
    x = grid.nodes
    closed = tanh_rank_n_kernel(f.a_hat, g.a_hat, n, x[:, None], x[None, :])
    assert np.max(np.abs(km.kernel_values() - closed)) <= 1e-10 * np.max(np.abs(closed))
    assert numerical_rank(km.entries) == n
    psi = rank_n_factors(beta, n, x)
    assert psi.shape == (n, x.size)
    lam = km.eigvalsh()
    assert (lam[0] >= -1e-8 * lam[-1]) == (n == 1)


def test_rank_n_parameter_check():
    with pytest.raises(ValueError):
        tanh_rank_n_kernel(1.0, 1.0, 1, 0.0, 0.0)
    with pytest.raises(ValueError):
        rank_n_pair(1.0, 0)


def test_det2x2():
    f, g = rank_n_pair(1.0, 2)
    d = det2x2_tanh(f.a_hat, g.a_hat, 2, 1.0, 0.0)
    pts = np.array([1.0, 0.0])
    brute = np.linalg.det(commutator_kernel(f, g, pts[:, None], pts[None, :])).real
    assert d < 0
    assert abs(d - brute) <= 1e-12 * abs(brute)
    f1, g1 = rank_n_pair(1.0, 1)
    assert abs(det2x2_tanh(f1.a_hat, g1.a_hat, 1, 1.0, 0.0)) < 1e-18


def test_finite_rank_identities_rank1_and_rank2():
    for n, tol in ((1, 1e-8), (2, 1e-6)):
        f, g = rank_n_pair(1.0, n)
        km = nystrom_assemble(f, g, GRID, auto_double=False)
        phis, signs = eigenfunctions(km)
        rep = finite_rank_identities(phis, f, g, GRID, signs, km)
        assert rep.rank_used == n
        assert rep.derivative_residual <= tol
        assert rep.correlation_residual <= tol
    with pytest.raises(RankDeficiencyError):
        finite_rank_identities(phis[:1], f, g, GRID, signs[:1], km)


def test_rank1_closed_form_eigenfunction():
    # K = (beta / pi) sech(beta x) sech(beta y): phi = sqrt(beta / pi) sech(beta x)
    f, g = rank_n_pair(1.0, 1)
    phi = np.sqrt(1.0 / math.pi) / np.cosh(GRID.nodes)
    rep = finite_rank_identities(phi[None, :], f, g, GRID)
    assert rep.derivative_residual <= 1e-8 and rep.correlation_residual <= 1e-8


def test_zero_commutator():
    f = KatoFunction.tanh(1.0)
    km = nystrom_assemble(f, KatoFunction.constant(0.3), GRID)
    assert np.all(km.entries == 0)
    phis, signs = eigenfunctions(km)
    rep = finite_rank_identities(phis, f, KatoFunction.constant(0.3), GRID, signs, km)
    assert rep.derivative_residual == 0.0 and rep.correlation_residual == 0.0


def test_matrix_formats_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    a = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    a[0, 0] = 1e-300 + 5e-324j
    write_matrix_csv(tmp_path / "m.csv", a)
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "i,j,re,im" and lines[2].startswith("0,1,")
    assert np.array_equal(read_matrix_csv(tmp_path / "m.csv"), a)
    write_matrix_binary(tmp_path / "m.bin", a)
    raw = (tmp_path / "m.bin").read_bytes()
    assert len(raw) == 8 + 16 * 25
    assert int.from_bytes(raw[:8], "little") == 5
    assert np.frombuffer(raw[8:24], "<c16")[0] == a[0, 0]
    assert np.frombuffer(raw[24:40], "<c16")[0] == a[1, 0]  # column-major
    assert np.array_equal(read_matrix_binary(tmp_path / "m.bin"), a)
    (tmp_path / "bad.bin").write_bytes(raw[:-1])
    with pytest.raises(ValueError):
        read_matrix_binary(tmp_path / "bad.bin")


@st.composite
def kato_pair(draw):
    a = draw(st.floats(0.6, 2.0))
    atoms_f = draw(st.lists(st.tuples(st.floats(-3, 3), st.floats(0.1, 1.0)), min_size=1, max_size=3))
    atoms_g = draw(st.lists(st.tuples(st.floats(-3, 3), st.floats(0.1, 1.0)), min_size=1, max_size=3))
    return KatoFunction.mixture(a, atoms_f), KatoFunction.mixture(math.pi / (2 * a), atoms_g)


@given(kato_pair())
def test_hermitian_and_psd_property(pair):
    f, g = pair
    grid = GridSpec(16, 256)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryDecayWarning)
        km = nystrom_assemble(f, g, grid, max_n=1024)
    assert km.hermitian_defect == 0.0
    lam = km.eigvalsh()
    assert lam[0] >= -1e-8 * lam[-1]
    assert np.trace(km.entries).real == pytest.approx(km.expected_trace, rel=1e-5)
