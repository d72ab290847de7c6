import os
import subprocess
import sys

import numpy as np
import pytest

from reljacobi import _kernels
from reljacobi.fields import preset_metric

needs_numba = pytest.mark.skipif(not _kernels.NUMBA_AVAILABLE, reason="numba backend not active")


def _metric_inputs(seed=0):
    metric = preset_metric("polynomial_perturbation", {"seed": seed})
    x = np.random.default_rng(seed).uniform(-0.8, 0.8, 4)
    return metric.inverse_jet(x)


@needs_numba
def test_nested_cyclic_equivalence(rng):
    for n in (8, 16):
        J = rng.normal(size=(n, n))
        dJ = rng.normal(size=(n, n, n))
        for ia, ib, ic in [((0, 1, 2, 3), (4, 5, 6, 7), (4, 5, 6, 7)), ((4, 5, 6, 7),) * 3]:
            args = (J, dJ, np.array(ia), np.array(ib), np.array(ic))
            np.testing.assert_allclose(_kernels.nested_cyclic_nb(*args), _kernels.nested_cyclic_py(*args),
                                       rtol=1e-12, atol=1e-12)


@needs_numba
def test_christoffel_and_riemann_equivalence():
    for seed in range(3):
        g, G, dg, dG, d2g = _metric_inputs(seed)
        gam_py = _kernels.christoffel_py(G, dg)
        np.testing.assert_allclose(_kernels.christoffel_nb(G, dg), gam_py, atol=1e-14)
        dgam_py = _kernels.christoffel_grad_py(G, dG, dg, d2g)
        np.testing.assert_allclose(_kernels.christoffel_grad_nb(G, dG, dg, d2g), dgam_py, atol=1e-13)
        np.testing.assert_allclose(_kernels.riemann_nb(gam_py, dgam_py), _kernels.riemann_py(gam_py, dgam_py),
                                   atol=1e-13)


@needs_numba
def test_rk4_linear_equivalence(rng):
    A = rng.normal(size=(8, 8))
    z0 = rng.normal(size=8)
    np.testing.assert_allclose(_kernels.rk4_linear_nb(A, z0, 0.01, 200), _kernels.rk4_linear_py(A, z0, 0.01, 200),
                               rtol=1e-12, atol=1e-12)


def test_public_names_follow_backend():
    suffix = "_nb" if _kernels.BACKEND == "numba" else "_py"
    for name in ("nested_cyclic", "christoffel", "christoffel_grad", "riemann", "rk4_linear"):
        assert getattr(_kernels, name) is getattr(_kernels, name + suffix)


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, RELJACOBI_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "from reljacobi import _kernels; print(_kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
