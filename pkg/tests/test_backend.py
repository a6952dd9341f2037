import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from commutatorlab import _backend, _kernels

needs_numba = pytest.mark.skipif(not _backend.NUMBA_AVAILABLE, reason="numba not installed")


@needs_numba
@given(
    st.lists(st.tuples(st.floats(-4, 4), st.floats(0.05, 1.0)), min_size=1, max_size=5),
    st.floats(0.2, 4.0),
)
def test_divdiff_backends_agree(atoms, slope):
    x = np.linspace(-12, 12, 97)
    y = np.linspace(-9, 15, 61)
    loc = np.array([a for a, _ in atoms])
    w = np.array([b for _, b in atoms])
    a = _kernels.tanh_divdiff_np(x, y, loc, w, slope)
    b = _kernels.tanh_divdiff_nb(x, y, loc, w, slope)
    assert np.allclose(a, b, rtol=1e-13, atol=1e-300)


@needs_numba
def test_weyl_backends_agree():
    rng = np.random.default_rng(5)
    x = np.linspace(-5, 5, 40, endpoint=False)
    h = x[1] - x[0]
    shifts = np.arange(-6, 7)
    xi = rng.uniform(-3, 3, 9)
    coeff = rng.standard_normal((shifts.size, xi.size)) + 1j * rng.standard_normal((shifts.size, xi.size))
    a = _kernels.weyl_accumulate_np(x, h, shifts, coeff, xi)
    b = _kernels.weyl_accumulate_nb(x, h, shifts, coeff, xi)
    assert np.max(np.abs(a - b)) < 1e-12 * np.max(np.abs(a))


def test_divdiff_diagonal_is_derivative():
    x = np.linspace(-3, 3, 11)
    d = _kernels.tanh_divdiff(x, x, np.array([0.5]), np.array([2.0]), 1.5)
    assert np.allclose(np.diag(d), 2.0 * 1.5 / np.cosh(1.5 * (x - 0.5)) ** 2, rtol=1e-14)
    far = _kernels.tanh_divdiff(np.array([400.0]), np.array([-400.0]), np.array([0.0]), np.array([1.0]), 1.0)
    assert far[0, 0] == pytest.approx(2.0 / 800.0, rel=1e-14)


def _run(env_value):
    env = dict(os.environ, COMMUTATORLAB_BACKEND=env_value)
    code = "import commutatorlab; print(commutatorlab.backend_name())"
    return subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)


def test_env_flag_forces_numpy():
    r = _run("numpy")
    assert r.returncode == 0 and r.stdout.strip() == "numpy"


def test_env_flag_rejects_unknown():
    r = _run("fortran")
    assert r.returncode != 0 and "COMMUTATORLAB_BACKEND" in r.stderr


def test_thread_cap(monkeypatch):
    monkeypatch.delenv("COMMUTATORLAB_THREADS", raising=False)
    assert _backend.thread_cap() is None
    monkeypatch.setenv("COMMUTATORLAB_THREADS", "2")
    assert _backend.thread_cap() == 2
    monkeypatch.setenv("COMMUTATORLAB_THREADS", "0")
    with pytest.raises(ValueError):
        _backend.thread_cap()
