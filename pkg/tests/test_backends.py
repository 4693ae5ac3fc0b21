"""Agreement between the compiled stencil kernels and the numpy fallback."""

import os
import subprocess
import sys

import numpy as np
import pytest

from elastiseg import _stencils_np

compiled = pytest.importorskip("elastiseg._stencils")


def test_gradient_agreement():
    rng = np.random.default_rng(10)
    phi = rng.random((37, 53))
    assert np.max(np.abs(compiled.gradient(phi) - _stencils_np.gradient(phi))) <= 1e-12


def test_divergence_agreement():
    rng = np.random.default_rng(11)
    w = rng.standard_normal((2, 37, 53))
    assert np.max(np.abs(compiled.divergence(w) - _stencils_np.divergence(w))) <= 1e-12


def test_shrink_agreement():
    rng = np.random.default_rng(12)
    t = rng.standard_normal((2, 37, 53))
    g = rng.uniform(0.1, 5.0, (37, 53))
    assert np.max(np.abs(compiled.shrink(t, g, 20.0) - _stencils_np.shrink(t, g, 20.0))) <= 1e-12


def test_curvature_weight_agreement():
    rng = np.random.default_rng(13)
    phi = rng.random((37, 53))
    a = compiled.curvature_weight(phi, 3.0, 25.0, 5.0)
    b = _stencils_np.curvature_weight(phi, 3.0, 25.0, 5.0)
    assert np.max(np.abs(a - b)) <= 1e-12


def test_env_var_forces_numpy_backend():
    env = dict(os.environ, ELASTISEG_KERNELS="numpy")
    out = subprocess.run(
        [sys.executable, "-c", "from elastiseg import KERNEL_BACKEND; print(KERNEL_BACKEND)"],
        capture_output=True, text=True, env=env, check=True,
    )
    assert out.stdout.strip() == "numpy"


def test_default_backend_is_compiled():
    from elastiseg import KERNEL_BACKEND

    assert KERNEL_BACKEND == "compiled"
