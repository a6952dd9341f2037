import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from commutatorlab.grid import GridSpec


def test_nodes_and_weights():
    g = GridSpec(10.0, 64)
    assert g.h == pytest.approx(20.0 / 64)
    assert g.nodes[0] == -10.0
    assert np.allclose(np.diff(g.nodes), g.h)
    assert g.weights.sum() == pytest.approx(20.0)


def test_momentum_is_dft_dual():
    g = GridSpec(5.0, 32)
    assert np.allclose(np.sort(g.fft_momentum), g.momentum)
    assert g.momentum[0] == pytest.approx(-g.nyquist)
    assert g.dxi == pytest.approx(np.pi / 5.0)


@pytest.mark.parametrize("L,N", [(0.0, 8), (-1.0, 8), (1.0, 7), (1.0, 0)])
def test_rejects_bad_grids(L, N):
    with pytest.raises(ValueError):
        GridSpec(L, N)


def test_json_round_trip_and_doubling():
    g = GridSpec(20, 512)
    assert GridSpec.from_json(g.to_json()) == g
    d = g.doubled()
    assert d.h == g.h and d.L == 40.0


def test_index_of():
    g = GridSpec(4.0, 16)
    assert list(g.index_of(g.nodes[[0, 5]])) == [0, 5]
    with pytest.raises(ValueError):
        g.index_of(0.1)


@given(st.floats(0.5, 50.0), st.integers(1, 256).map(lambda k: 2 * k))
def test_grid_invariants(L, N):
    g = GridSpec(L, N)
    assert np.all(np.diff(g.nodes) > 0)
    assert np.all(g.weights > 0)
    assert g.weights.sum() == pytest.approx(2 * L)
