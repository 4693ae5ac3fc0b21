"""Synthetic phantoms with ground-truth masks and stochastic noise injection.

Phantoms are painted nearest-object-first, so overlapping shapes occlude
one another; the returned ground-truth masks are always the complete
shapes (painted-in gaps are intensity artifacts, not holes in the truth).
Noise is generated with numpy's PCG64 generator so runs are reproducible
across platforms given the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

__all__ = ["Shape", "PhantomSpec", "make_phantom", "add_noise", "NOISE_KINDS"]

NOISE_KINDS = ("gaussian", "rayleigh", "poisson", "gamma", "saltpepper")


@dataclass
class Shape:
    """One painted shape.

    kind: 'disk' (cx, cy, r), 'rect' (x0, y0, x1, y1) or 'annulus'
    (cx, cy, r_inner, r_outer).  `gaps` lists angular sectors
    (start_deg, extent_deg) painted with the background level; for rects
    the sector is measured around the rect center.
    """

    kind: str
    params: Tuple[float, ...]
    level: float
    gaps: List[Tuple[float, float]] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("disk", "rect", "annulus"):
            raise ValueError(f"unknown shape kind {self.kind!r}")
        if not 0.0 <= self.level <= 1.0:
            raise ValueError("shape level must lie in [0, 1]")
        expected = {"disk": 3, "rect": 4, "annulus": 4}[self.kind]
        if len(self.params) != expected:
            raise ValueError(f"{self.kind} expects {expected} parameters")


@dataclass
class PhantomSpec:
    width: int
    height: int
    background: float = 0.0
    shapes: List[Shape] = field(default_factory=list)  # nearest first

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("phantom dimensions must be positive")
        if not 0.0 <= self.background <= 1.0:
            raise ValueError("background level must lie in [0, 1]")


def _membership(shape: Shape, xx: np.ndarray, yy: np.ndarray) -> np.ndarray:
    if shape.kind == "disk":
        cx, cy, r = shape.params
        return (xx - cx) ** 2 + (yy - cy) ** 2 <= r**2
    if shape.kind == "rect":
        x0, y0, x1, y1 = shape.params
        return (xx >= x0) & (xx <= x1) & (yy >= y0) & (yy <= y1)
    cx, cy, r_in, r_out = shape.params
    rho2 = (xx - cx) ** 2 + (yy - cy) ** 2
    return (rho2 >= r_in**2) & (rho2 <= r_out**2)


def _center(shape: Shape) -> Tuple[float, float]:
    if shape.kind == "rect":
        x0, y0, x1, y1 = shape.params
        return (0.5 * (x0 + x1), 0.5 * (y0 + y1))
    return shape.params[0], shape.params[1]


def _gap_region(shape: Shape, xx: np.ndarray, yy: np.ndarray) -> np.ndarray:
    cut = np.zeros(xx.shape, dtype=bool)
    cx, cy = _center(shape)
    angle = np.degrees(np.arctan2(yy - cy, xx - cx)) % 360.0
    for start, extent in shape.gaps:
        lo = start % 360.0
        hi = (start + extent) % 360.0
        if lo <= hi:
            cut |= (angle >= lo) & (angle < hi)
        else:
            cut |= (angle >= lo) | (angle < hi)
    return cut


def make_phantom(spec: PhantomSpec) -> Tuple[np.ndarray, List[np.ndarray]]:
    """Paint the phantom and return (image (1, H, W), full-shape masks)."""
    yy, xx = np.mgrid[0 : spec.height, 0 : spec.width].astype(np.float64)
    img = np.full((spec.height, spec.width), spec.background)
    masks = []
    covered = np.zeros(img.shape, dtype=bool)
    for shape in spec.shapes:
        mask = _membership(shape, xx, yy)
        if not mask.any():
            raise ValueError(f"shape {shape.kind} lies outside the phantom")
        if (
            xx[mask].min() <= 0
            or xx[mask].max() >= spec.width - 1
            or yy[mask].min() <= 0
            or yy[mask].max() >= spec.height - 1
        ):
            raise ValueError(f"shape {shape.kind} touches the phantom border")
        masks.append(mask)
        paint = mask & ~covered
        if shape.gaps:
            paint = paint & ~_gap_region(shape, xx, yy)
        img[paint] = shape.level
        covered |= mask
    return img[None], masks


def add_noise(f: np.ndarray, kind: str, param: float, seed: int) -> np.ndarray:
    """Corrupt an image with one noise kind; output is clamped to [0, 1].

    gaussian: additive, param = standard deviation.
    rayleigh: multiplicative unit-mean speckle, param in [0, 1] blends its
        strength (0 reproduces the input).
    poisson: scaled photon counts, param = counts at full intensity.
    gamma: multiplicative unit-mean Gamma(k, 1/k), param = shape k.
    saltpepper: param = flip fraction; flipped pixels become 0 or 1.
    """
    f = np.asarray(f, dtype=np.float64)
    rng = np.random.default_rng(seed)
    shape = f.shape
    if kind == "gaussian":
        if param < 0:
            raise ValueError("gaussian sigma must be >= 0")
        out = f + param * rng.standard_normal(shape)
    elif kind == "rayleigh":
        if not 0.0 <= param <= 1.0:
            raise ValueError("rayleigh strength must lie in [0, 1]")
        unit_mean = rng.rayleigh(scale=1.0, size=shape) / math.sqrt(math.pi / 2.0)
        out = f * (1.0 + param * (unit_mean - 1.0))
    elif kind == "poisson":
        if param <= 0:
            raise ValueError("poisson count scale must be > 0")
        out = rng.poisson(np.clip(f, 0.0, None) * param).astype(np.float64) / param
    elif kind == "gamma":
        if param <= 0:
            raise ValueError("gamma shape must be > 0")
        out = f * rng.gamma(shape=param, scale=1.0 / param, size=shape)
    elif kind == "saltpepper":
        if not 0.0 <= param <= 1.0:
            raise ValueError("flip fraction must lie in [0, 1]")
        out = f.copy()
        flips = rng.random(shape) < param
        out[flips] = rng.integers(0, 2, size=int(flips.sum())).astype(np.float64)
    else:
        raise ValueError(f"unknown noise kind {kind!r}")
    return np.clip(out, 0.0, 1.0)
