"""Discrete differential operators, curvature weight, spectral solver and
the generalized shrinkage step.

The stencil kernels come from a compiled extension when available, with a
pure-numpy fallback.  Selection happens at import time; set
ELASTISEG_KERNELS=numpy to force the fallback (used by the benchmark and
the backend-agreement tests).
"""

from __future__ import annotations

import os

import numpy as np

from . import _stencils_np

__all__ = [
    "KERNEL_BACKEND",
    "gradient",
    "divergence",
    "curvature_weight",
    "shrink",
    "SpectralPlan",
    "solve_screened_poisson",
]

if os.environ.get("ELASTISEG_KERNELS", "").lower() in ("numpy", "python"):
    _impl = _stencils_np
    KERNEL_BACKEND = "numpy"
else:
    try:
        from . import _stencils as _impl  # type: ignore[no-redef]

        KERNEL_BACKEND = "compiled"
    except ImportError:
        _impl = _stencils_np
        KERNEL_BACKEND = "numpy"


def gradient(phi: np.ndarray) -> np.ndarray:
    """Forward-difference gradient with periodic wraparound, shape (2, H, W)."""
    return _impl.gradient(phi)


def divergence(w: np.ndarray) -> np.ndarray:
    """Backward-difference divergence; exact negative adjoint of gradient."""
    return _impl.divergence(w)


def curvature_weight(phi: np.ndarray, alpha: float, beta: float, eps: float) -> np.ndarray:
    """alpha + beta * |div(grad phi / max(eps, |grad phi|))| pointwise."""
    if alpha < 0.0 or beta < 0.0 or eps <= 0.0:
        raise ValueError("curvature_weight needs alpha, beta >= 0 and eps > 0")
    return _impl.curvature_weight(phi, alpha, beta, eps)


def shrink(target: np.ndarray, weight: np.ndarray, mu: float) -> np.ndarray:
    """Closed-form minimizer of g|w| + (mu/2)|w - t|^2 pointwise.

    Shrinks t radially by weight/mu; returns zero where |t| <= weight/mu.
    """
    if mu <= 0.0:
        raise ValueError("shrink needs mu > 0")
    return _impl.shrink(target, weight, mu)


class SpectralPlan:
    """Precomputed eigenvalues of the periodic 5-point Laplacian.

    The eigenvalue grid matches the real FFT layout (H, W//2 + 1); the
    zero-frequency eigenvalue is 0 and all eigenvalues are <= 0.
    """

    def __init__(self, height: int, width: int):
        self.height = int(height)
        self.width = int(width)
        ky = 2.0 * np.pi * np.fft.fftfreq(self.height)
        kx = 2.0 * np.pi * np.fft.rfftfreq(self.width)
        self.laplacian_eigenvalues = (2.0 * np.cos(ky)[:, None] - 2.0) + (
            2.0 * np.cos(kx)[None, :] - 2.0
        )

    @classmethod
    def for_field(cls, field: np.ndarray) -> "SpectralPlan":
        h, w = np.asarray(field).shape[-2:]
        return cls(h, w)


def solve_screened_poisson(
    rhs: np.ndarray, mu: float, tau: float, plan: SpectralPlan
) -> np.ndarray:
    """Solve (-mu * Laplacian + tau) phi = rhs under periodic boundaries."""
    if mu <= 0.0 or tau <= 0.0:
        raise ValueError("solve_screened_poisson needs mu > 0 and tau > 0")
    rhs = np.asarray(rhs, dtype=np.float64)
    if rhs.shape != (plan.height, plan.width):
        raise ValueError(
            f"rhs shape {rhs.shape} does not match plan "
            f"({plan.height}, {plan.width})"
        )
    spectrum = np.fft.rfft2(rhs) / (-mu * plan.laplacian_eigenvalues + tau)
    return np.fft.irfft2(spectrum, s=rhs.shape)
