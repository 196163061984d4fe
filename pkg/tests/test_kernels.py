"""Parity between the numba kernels and the numpy reference path."""

import numpy as np
import pytest

from hypoflow import kernels
from hypoflow.kernels import _NUMPY_IMPLS


def _data(seed=0, nx=24, nv=12, d=2):
    rng = np.random.default_rng(seed)
    h = np.exp(0.3 * rng.standard_normal((nx, nv)))
    gx = rng.standard_normal((d, nx, nv))
    gv = rng.standard_normal((d, nx, nv))
    hess = rng.standard_normal((d, d, nx, nv))
    wv = rng.random(nv) + 0.1
    wv /= wv.sum()
    pih = h @ wv
    gpi = rng.standard_normal((d, nx))
    fac = rng.random((nx, nv))
    return h, gx, gv, hess, wv, pih, gpi, fac


requires_numba = pytest.mark.skipif(not kernels.HAS_NUMBA,
                                    reason="numba unavailable")


@requires_numba
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_backend_parity(seed):
    h, gx, gv, hess, wv, pih, gpi, fac = _data(seed)
    p = 1.5
    pairs = [
        ("weighted_mean", (h, wv)),
        ("entropy_log", (h, wv)),
        ("entropy_power", (h, wv, p)),
        ("fisher", (h, gx, gv, wv, p - 2.0)),
        ("weighted_fisher", (h, gx, wv, p - 2.0, fac)),
        ("pi_ratio_x", (h, gx, gpi, pih, wv)),
        ("cross_dissipation", (h, gx, gpi, pih, wv, p)),
        ("quartic", (h, gv, gx, wv, p)),
        ("hessian_norm", (h, hess, gv, gx, wv, p)),
    ]
    from hypoflow.kernels import _NUMBA_IMPLS
    for name, args in pairs:
        a = np.asarray(_NUMBA_IMPLS[name](*args))
        b = np.asarray(_NUMPY_IMPLS[name](*args))
        assert np.allclose(a, b, rtol=1e-12, atol=1e-14), name


def test_active_backend_reported():
    assert kernels.BACKEND in ("numba", "numpy")


def test_fisher_matches_manual():
    h, gx, gv, hess, wv, pih, gpi, fac = _data(3)
    ix, iv, im = kernels.fisher(h, gx, gv, wv, -1.0)
    w = 1.0 / h
    manual_ix = float(((w * (gx * gx).sum(axis=0)) @ wv).mean())
    assert ix == pytest.approx(manual_ix, rel=1e-12)


def test_env_flag_selects_numpy(tmp_path):
    import subprocess
    import sys

    code = ("import os; os.environ['HYPOFLOW_BACKEND']='numpy';"
            "from hypoflow import kernels; print(kernels.BACKEND)")
    out = subprocess.run([sys.executable, "-c", code],
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
