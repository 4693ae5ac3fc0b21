"""Pure-numpy stencil kernels (fallback for the compiled extension).

Forward-difference gradient and backward-difference divergence with periodic
wraparound, chosen so that <grad a, b> = -<a, div b> holds exactly.
"""

from __future__ import annotations

import numpy as np


def gradient(phi: np.ndarray) -> np.ndarray:
    phi = np.asarray(phi, dtype=np.float64)
    out = np.empty((2,) + phi.shape)
    out[0] = np.roll(phi, -1, axis=1) - phi
    out[1] = np.roll(phi, -1, axis=0) - phi
    return out


def divergence(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    wx, wy = w[0], w[1]
    return (wx - np.roll(wx, 1, axis=1)) + (wy - np.roll(wy, 1, axis=0))


def shrink(target: np.ndarray, weight: np.ndarray, mu: float) -> np.ndarray:
    target = np.asarray(target, dtype=np.float64)
    norm = np.sqrt(target[0] ** 2 + target[1] ** 2)
    mag = np.maximum(norm - weight / mu, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(norm > 0.0, mag / np.where(norm > 0.0, norm, 1.0), 0.0)
    return target * scale


def curvature_weight(phi: np.ndarray, alpha: float, beta: float, eps: float) -> np.ndarray:
    grad = gradient(phi)
    norm = np.sqrt(grad[0] ** 2 + grad[1] ** 2)
    denom = np.maximum(eps, norm)
    kappa = divergence(grad / denom)
    return alpha + beta * np.abs(kappa)
