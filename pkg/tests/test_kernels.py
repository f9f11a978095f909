import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from starloc import _anm_py, kernels

cython = pytest.mark.skipif(kernels.compiled_backend is None, reason="compiled extension not built")


def _problem(seed, nx, nz):
    rng = np.random.default_rng(seed)
    size = nx * nz
    r = np.triu(rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size)))
    r /= np.linalg.norm(r, 2)
    b = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    b /= np.linalg.norm(b)
    evals, evecs = np.linalg.eigh(r.conj().T @ r)
    return np.maximum(evals, 0.0), np.ascontiguousarray(evecs), r.conj().T @ b


@cython
@pytest.mark.parametrize("nx, nz, seed", [(2, 2, 0), (4, 4, 1), (3, 5, 2)])
def test_backends_agree(nx, nz, seed):
    args = (*_problem(seed, nx, nz), 0.05, 1.0, nx, nz, 1e-8, 20000, True, 1.0)
    hp, up, tp, ip, cp_, histp = _anm_py.admm_solve(*args)
    hc, uc, tc, ic, cc, histc = kernels.compiled_backend.admm_solve(*args)
    assert cp_ and cc
    assert abs(ip - ic) <= 2
    np.testing.assert_allclose(hc, hp, atol=1e-9)
    np.testing.assert_allclose(uc, up, atol=1e-9)
    assert tc == pytest.approx(tp, abs=1e-9)
    n = min(len(histp), len(histc))
    np.testing.assert_allclose(np.array(histc[:n])[:, 0], np.array(histp[:n])[:, 0], rtol=1e-8)


def test_get_backend():
    assert kernels.get_backend("python") is _anm_py
    assert kernels.get_backend() is kernels.backend
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_env_forces_python_backend():
    env = dict(os.environ, STARLOC_BACKEND="python")
    out = subprocess.run(
        [sys.executable, "-c", "from starloc import kernels; print(kernels.BACKEND_NAME)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_toeplitz_round_trip(nx, nz, seed):
    rng = np.random.default_rng(seed)
    shape = (2 * nx - 1, 2 * nz - 1)
    u = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    u = 0.5 * (u + u[::-1, ::-1].conj())
    tp = _anm_py.toeplitz_assemble(u, nx, nz)
    np.testing.assert_allclose(tp, tp.conj().T, atol=1e-15)
    np.testing.assert_allclose(_anm_py.toeplitz_project(tp, nx, nz), u, atol=1e-14)


def test_toeplitz_structure_two_level():
    tp = _anm_py.toeplitz_assemble(np.arange(15, dtype=complex).reshape(3, 5), 2, 3)
    # entry depends only on the (x, z) index differences
    for i in range(6):
        for j in range(6):
            assert tp[i, j] == (i // 3 - j // 3 + 1) * 5 + (i % 3 - j % 3 + 2)


@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_psd_projection(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    a = a + a.conj().T
    p = _anm_py.psd_project(a)
    assert np.linalg.eigvalsh(p)[0] >= -1e-12 * max(1.0, np.abs(a).max())
    np.testing.assert_allclose(_anm_py.psd_project(p), p, atol=1e-12)
    # the residual is negative semidefinite
    assert np.linalg.eigvalsh(a - p)[-1] <= 1e-12 * max(1.0, np.abs(a).max())
