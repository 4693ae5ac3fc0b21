"""Noise potentials and closed-form maximum-likelihood parameter estimates.

Four distributions are supported: Gaussian, Rayleigh, Poisson and Gamma.
Each has a pointwise potential Q(f; theta) and weighted estimators for its
parameters, in both the two-phase (phi / 1-phi weights) and the depth
(region characteristic-function weights) forms.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NoiseKind",
    "Theta",
    "ScenarioSet",
    "EmptyRegionError",
    "potential",
    "estimate_two_phase",
    "estimate_depth",
    "coupled_potential",
]

# Region weight sums below this are treated as an empty (collapsed) region.
REGION_EPS = 1e-12
# Floor on estimated sigma/mu so log terms stay finite on noiseless regions.
PARAM_FLOOR = 1e-6

HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


class NoiseKind(enum.Enum):
    GAUSSIAN = "gaussian"
    RAYLEIGH = "rayleigh"
    POISSON = "poisson"
    GAMMA = "gamma"

    @property
    def needs_positive_intensity(self) -> bool:
        # Rayleigh evaluates log f; Poisson estimates log sigma from mean f.
        return self in (NoiseKind.RAYLEIGH, NoiseKind.POISSON)


@dataclass(frozen=True)
class Theta:
    """Distribution parameters for one region and channel.

    Rayleigh and Poisson use sigma only, Gamma uses mu only, Gaussian both.
    """

    mu: float = 0.0
    sigma: float = 1.0


class EmptyRegionError(RuntimeError):
    """A region weight sum underflowed; the segmentation collapsed."""


class ScenarioSet:
    """Noise scenarios (kind, probability); probabilities sum to one."""

    def __init__(self, entries):
        entries = [(NoiseKind(kind), float(p)) for kind, p in entries]
        if not entries:
            raise ValueError("scenario set must be nonempty")
        kinds = [k for k, _ in entries]
        if len(set(kinds)) != len(kinds):
            raise ValueError("scenario kinds must be distinct")
        if any(p <= 0.0 for _, p in entries):
            raise ValueError("scenario probabilities must be positive")
        total = sum(p for _, p in entries)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"scenario probabilities sum to {total}, not 1")
        self.entries = entries

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def kinds(self):
        return [k for k, _ in self.entries]

    @property
    def probabilities(self):
        return np.array([p for _, p in self.entries])

    def needs_positive_intensity(self) -> bool:
        return any(k.needs_positive_intensity for k in self.kinds)


def potential(kind: NoiseKind, f: np.ndarray, theta: Theta) -> np.ndarray:
    """Pointwise potential Q(f; theta) for one noise kind."""
    f = np.asarray(f, dtype=np.float64)
    if kind is NoiseKind.GAUSSIAN:
        if theta.sigma <= 0.0:
            raise ValueError("Gaussian potential needs sigma > 0")
        q = HALF_LOG_2PI + np.log(theta.sigma) + (f - theta.mu) ** 2 / (2.0 * theta.sigma**2)
    elif kind is NoiseKind.RAYLEIGH:
        if theta.sigma <= 0.0:
            raise ValueError("Rayleigh potential needs sigma > 0")
        with np.errstate(divide="ignore"):
            # log(0) yields -inf here; the finiteness check below rejects it
            q = 2.0 * np.log(theta.sigma) - np.log(f) + f**2 / (2.0 * theta.sigma**2)
    elif kind is NoiseKind.POISSON:
        if theta.sigma <= 0.0:
            raise ValueError("Poisson potential needs sigma > 0")
        q = theta.sigma - f * np.log(theta.sigma)
    elif kind is NoiseKind.GAMMA:
        if theta.mu <= 0.0:
            raise ValueError("Gamma potential needs mu > 0")
        q = f / theta.mu + np.log(theta.mu)
    else:  # pragma: no cover
        raise ValueError(f"unknown noise kind {kind}")
    if not np.all(np.isfinite(q)):
        raise ValueError(f"{kind.value} potential produced nonfinite values")
    return q


def _weighted_theta(kind: NoiseKind, f: np.ndarray, weight: np.ndarray) -> Theta:
    wsum = float(weight.sum())
    if wsum <= REGION_EPS:
        raise EmptyRegionError("region weight sum underflowed")
    if kind is NoiseKind.GAUSSIAN:
        mu = float((f * weight).sum()) / wsum
        var = float(((f - mu) ** 2 * weight).sum()) / wsum
        return Theta(mu=mu, sigma=max(np.sqrt(var), PARAM_FLOOR))
    if kind is NoiseKind.RAYLEIGH:
        var = float((f**2 * weight).sum()) / (2.0 * wsum)
        return Theta(sigma=max(np.sqrt(var), PARAM_FLOOR))
    if kind is NoiseKind.POISSON:
        mean = float((f * weight).sum()) / wsum
        return Theta(sigma=max(mean, PARAM_FLOOR))
    if kind is NoiseKind.GAMMA:
        mean = float((f * weight).sum()) / wsum
        return Theta(mu=max(mean, PARAM_FLOOR))
    raise ValueError(f"unknown noise kind {kind}")  # pragma: no cover


def estimate_two_phase(kind: NoiseKind, f: np.ndarray, phi: np.ndarray):
    """Estimate (theta_inside, theta_outside) with weights phi and 1-phi."""
    f = np.asarray(f, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    return _weighted_theta(kind, f, phi), _weighted_theta(kind, f, 1.0 - phi)


def estimate_depth(kind: NoiseKind, f: np.ndarray, chis):
    """Estimate one Theta per region from its characteristic-function weight."""
    f = np.asarray(f, dtype=np.float64)
    thetas = []
    for h, chi in enumerate(chis):
        try:
            thetas.append(_weighted_theta(kind, f, np.asarray(chi, dtype=np.float64)))
        except EmptyRegionError as exc:
            raise EmptyRegionError(f"region {h + 1} is empty") from exc
    return thetas


def coupled_potential(kind: NoiseKind, f: np.ndarray, thetas) -> np.ndarray:
    """Sum of per-channel potentials for a multichannel image (m, H, W)."""
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 3:
        raise ValueError("coupled_potential expects a (m, H, W) image")
    if len(thetas) != f.shape[0]:
        raise ValueError(f"{len(thetas)} parameter sets for {f.shape[0]} channels")
    q = np.zeros(f.shape[1:])
    for channel, theta in zip(f, thetas):
        q += potential(kind, channel, theta)
    return q
