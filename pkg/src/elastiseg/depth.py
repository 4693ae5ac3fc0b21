"""Segmentation with depth: overlapping relaxed shapes, visibility
functions, the consensus solver and occlusion-ordering inference.

Objects are indexed nearest-first; object h is visible where no nearer
object covers it.  The solver recovers each full shape, including occluded
parts, by letting the curvature-weighted boundary term complete boundaries
where the data term is damped by the visibility factor.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import convergence, grid_ops
from .core import clamp_positive, threshold
from .noise_models import (
    EmptyRegionError,
    NoiseKind,
    ScenarioSet,
    Theta,
    coupled_potential,
    estimate_depth,
)
from .two_phase import POTENTIAL_CAP, SolverConfig

__all__ = [
    "DepthScenarioState",
    "DepthResult",
    "characteristic",
    "admm_sweep_depth",
    "energy_depth",
    "segment_with_depth",
    "rank_orderings",
    "init_multiphase",
]

MAX_ORDERING_OBJECTS = 5


def characteristic(phis: Sequence[np.ndarray]) -> List[np.ndarray]:
    """Visibility functions: chi_h = phi_h * prod_{j<h}(1 - phi_j), plus the
    visible background chi_{n+1} = prod_j (1 - phi_j)."""
    chis = []
    occlusion = np.ones_like(phis[0])
    for phi in phis:
        chis.append(phi * occlusion)
        occlusion = occlusion * (1.0 - phi)
    chis.append(occlusion)
    return chis


@dataclass
class DepthScenarioState:
    """Per-scenario unknowns; lists are indexed by object (nearest first)."""

    phis: List[np.ndarray]
    ws: List[np.ndarray]
    lams: List[np.ndarray]
    vs: List[np.ndarray]
    anchors: List[np.ndarray]
    thetas: Optional[List[List[Theta]]] = None  # [channel][region]

    @classmethod
    def initial(cls, phi0s: Sequence[np.ndarray]) -> "DepthScenarioState":
        phis = [np.asarray(p, dtype=np.float64).copy() for p in phi0s]
        shape = phis[0].shape
        return cls(
            phis=phis,
            ws=[np.zeros((2,) + shape) for _ in phis],
            lams=[np.zeros((2,) + shape) for _ in phis],
            vs=[np.zeros(shape) for _ in phis],
            anchors=[p.copy() for p in phis],
        )

    @property
    def n_objects(self) -> int:
        return len(self.phis)


@dataclass
class DepthResult:
    aggregates: List[np.ndarray]  # consensus fields, nearest first
    masks: List[np.ndarray]  # thresholded shapes, nearest first
    energy: float  # model energy (proximal terms excluded)
    diagnostics: List[convergence.ResidualRecord]
    iterations: int
    converged: bool
    ordering: Tuple[int, ...]  # input label of each solver slot

    def masks_by_label(self) -> List[np.ndarray]:
        """Masks reindexed by the caller's original object labels."""
        out: List[np.ndarray] = [None] * len(self.masks)  # type: ignore[list-item]
        for slot, label in enumerate(self.ordering):
            out[label] = self.masks[slot]
        return out


def _region_potentials(kind: NoiseKind, f: np.ndarray, thetas) -> List[np.ndarray]:
    """Channel-summed potential per region from per-channel parameter lists."""
    n_regions = len(thetas[0])
    return [
        coupled_potential(kind, f, [per_channel[s] for per_channel in thetas])
        for s in range(n_regions)
    ]


def occlusion_force(
    qs: List[np.ndarray], phis: Sequence[np.ndarray], h: int, data_weight: float
) -> np.ndarray:
    """Derivative of the data terms with respect to phi_h.

    Pulls phi_h toward region h where its own potential is low and away
    where a farther region (or the background) explains the pixel better;
    everything is damped by the visibility of slot h.  Like the two-phase
    data force, the result is capped symmetrically so degenerate
    exactly-fitted regions cannot flood the label solve.
    """
    n = len(phis)
    front = np.ones_like(phis[0])
    for j in range(h):
        front = front * (1.0 - phis[j])
    tail = np.zeros_like(phis[0])
    cumulative = np.ones_like(phis[0])
    for s in range(h + 1, n + 1):
        phi_s = phis[s] if s < n else 1.0
        tail = tail + qs[s] * phi_s * cumulative
        if s < n:
            cumulative = cumulative * (1.0 - phis[s])
    cap = data_weight * POTENTIAL_CAP
    return np.clip(data_weight * front * (qs[h] - tail), -cap, cap)


def admm_sweep_depth(
    state: DepthScenarioState,
    kind: NoiseKind,
    f: np.ndarray,
    cfg: SolverConfig,
    plan: Optional[grid_ops.SpectralPlan] = None,
    data_weight: float = 1.0,
    weight_const: Optional[float] = None,
) -> DepthScenarioState:
    """One alternating sweep over all objects (Gauss-Seidel in h).

    `weight_const` replaces the curvature weight by a constant (the pure
    length-regularized variant used for initialization).
    """
    if plan is None:
        plan = grid_ops.SpectralPlan.for_field(state.phis[0])
    n = state.n_objects

    chis = characteristic(state.phis)
    thetas = [estimate_depth(kind, channel, chis) for channel in f]
    qs = _region_potentials(kind, f, thetas)

    phis = [p.copy() for p in state.phis]
    ws = list(state.ws)
    lams = list(state.lams)
    for h in range(n):
        lam_h = lams[h]
        force = occlusion_force(qs, phis, h, data_weight)
        rhs = (
            cfg.tau * state.anchors[h]
            - force
            - state.vs[h]
            - grid_ops.divergence(lam_h)
            - cfg.mu * grid_ops.divergence(ws[h])
        )
        phi = np.clip(grid_ops.solve_screened_poisson(rhs, cfg.mu, cfg.tau, plan), 0.0, 1.0)
        if weight_const is None:
            g = grid_ops.curvature_weight(phi, cfg.alpha, cfg.beta, cfg.epsilon)
        else:
            g = np.full(phi.shape, float(weight_const))
        grad_phi = grid_ops.gradient(phi)
        w = grid_ops.shrink(grad_phi - lam_h / cfg.mu, g, cfg.mu)
        phis[h] = phi
        ws[h] = w
        lams[h] = lam_h + cfg.mu * (w - grad_phi)

    return DepthScenarioState(
        phis=phis, ws=ws, lams=lams, vs=list(state.vs), anchors=list(state.anchors), thetas=thetas
    )


def scenario_energy_depth(
    state: DepthScenarioState,
    kind: NoiseKind,
    f: np.ndarray,
    cfg: SolverConfig,
    include_proximal: bool = True,
    data_weight: float = 1.0,
    weight_const: Optional[float] = None,
) -> float:
    """Energy of one scenario; the proximal (consensus) terms are optional
    because ordering comparisons use the plain model energy."""
    chis = characteristic(state.phis)
    thetas = state.thetas
    if thetas is None:
        thetas = [estimate_depth(kind, channel, chis) for channel in f]
    qs = _region_potentials(kind, f, thetas)
    total = 0.0
    for s, (q, chi) in enumerate(zip(qs, chis)):
        total += data_weight * float((q * chi).sum())
    for h, phi in enumerate(state.phis):
        if weight_const is None:
            g = grid_ops.curvature_weight(phi, cfg.alpha, cfg.beta, cfg.epsilon)
        else:
            g = np.full(phi.shape, float(weight_const))
        grad_phi = grid_ops.gradient(phi)
        total += float((g * np.sqrt(grad_phi[0] ** 2 + grad_phi[1] ** 2)).sum())
        if include_proximal:
            total += float(
                (state.vs[h] * phi).sum()
                + 0.5 * cfg.tau * ((phi - state.anchors[h]) ** 2).sum()
            )
    return total


def energy_depth(
    states: List[DepthScenarioState],
    scenarios: ScenarioSet,
    f: np.ndarray,
    cfg: SolverConfig,
    include_proximal: bool = True,
    data_weight: float = 1.0,
    weight_const: Optional[float] = None,
) -> float:
    return float(
        sum(
            p
            * scenario_energy_depth(
                state, kind, f, cfg, include_proximal, data_weight, weight_const
            )
            for state, (kind, p) in zip(states, scenarios)
        )
    )


def _snapshot(states, aggs, energy) -> convergence.Snapshot:
    return convergence.Snapshot(
        phis=[[p for p in s.phis] for s in states],
        aggregates=list(aggs),
        vs=[[v for v in s.vs] for s in states],
        ws=[[w for w in s.ws] for s in states],
        grad_phis=[[grid_ops.gradient(p) for p in s.phis] for s in states],
        lams=[[l for l in s.lams] for s in states],
        energy=energy,
    )


def segment_with_depth(
    f: np.ndarray,
    scenarios: ScenarioSet,
    ordering: Sequence[int],
    cfg: SolverConfig,
    phi0s: Sequence[np.ndarray],
    data_weight: float = 1.0,
    weight_const: Optional[float] = None,
) -> DepthResult:
    """Solve for n overlapping shapes under the given occlusion ordering.

    `ordering[h]` is the input label placed in solver slot h (nearest
    first); results come back in slot order with the ordering recorded.
    """
    f = np.asarray(f, dtype=np.float64)
    if f.ndim == 2:
        f = f[None]
    if scenarios.needs_positive_intensity():
        f = clamp_positive(f)
    n = len(phi0s)
    ordering = tuple(int(i) for i in ordering)
    if sorted(ordering) != list(range(n)):
        raise ValueError(f"ordering {ordering} is not a permutation of 0..{n - 1}")
    slot_phi0s = [np.asarray(phi0s[label], dtype=np.float64) for label in ordering]
    for p in slot_phi0s:
        if p.min() < 0.0 or p.max() > 1.0:
            raise ValueError("initial shape fields must lie in [0, 1]")

    plan = grid_ops.SpectralPlan.for_field(slot_phi0s[0])
    states = [DepthScenarioState.initial(slot_phi0s) for _ in scenarios]
    probs = scenarios.probabilities

    records: List[convergence.ResidualRecord] = []
    prev_snap = _snapshot(states, [p.copy() for p in slot_phi0s], 0.0)
    init_snap = None
    converged = False
    iterations = 0

    for k in range(1, cfg.max_outer + 1):
        iterations = k
        for i, (kind, _) in enumerate(scenarios):
            for _ in range(cfg.inner_sweeps):
                states[i] = admm_sweep_depth(
                    states[i], kind, f, cfg, plan, data_weight, weight_const
                )
        aggs = []
        for h in range(n):
            agg = np.zeros_like(states[0].phis[h])
            for state, (_, p) in zip(states, scenarios):
                agg += p * state.phis[h]
            aggs.append(agg)
        states = [
            replace(
                s,
                vs=[s.vs[h] + cfg.tau * (s.phis[h] - aggs[h]) for h in range(n)],
                anchors=[a.copy() for a in aggs],
            )
            for s in states
        ]
        energy = energy_depth(states, scenarios, f, cfg, True, data_weight, weight_const)

        snap = _snapshot(states, aggs, energy)
        if init_snap is None:
            init_snap = snap
        records.append(convergence.residuals(snap, prev_snap, init_snap, probs, k))
        prev_snap = snap

        if k >= 2 and convergence.should_stop(
            records[-1], cfg.tol_tau, cfg.tol_phi, cfg.tol_w, cfg.tol_e
        ):
            converged = True
            break

    aggs = prev_snap.aggregates
    model_energy = energy_depth(states, scenarios, f, cfg, False, data_weight, weight_const)
    return DepthResult(
        aggregates=list(aggs),
        masks=[threshold(a, cfg.eta) for a in aggs],
        energy=model_energy,
        diagnostics=records,
        iterations=iterations,
        converged=converged,
        ordering=ordering,
    )


def rank_orderings(
    f: np.ndarray,
    scenarios: ScenarioSet,
    n: int,
    cfg: SolverConfig,
    phi0s: Sequence[np.ndarray],
    data_weight: float = 1.0,
) -> List[Tuple[Tuple[int, ...], float]]:
    """Solve once per occlusion ordering (cold start each time) and return
    (ordering, model energy) sorted ascending; the first entry wins."""
    if n < 2:
        raise ValueError("ordering inference needs at least two objects")
    if n > MAX_ORDERING_OBJECTS:
        raise ValueError(f"ordering search capped at {MAX_ORDERING_OBJECTS} objects")
    if len(phi0s) != n:
        raise ValueError("phi0s count does not match n")
    ranked = []
    for perm in itertools.permutations(range(n)):
        try:
            result = segment_with_depth(f, scenarios, perm, cfg, phi0s, data_weight)
        except EmptyRegionError:
            # the ordering hypothesis collapsed a region entirely; score it
            # as unboundedly bad rather than aborting the search
            ranked.append((perm, float("inf")))
            continue
        ranked.append((perm, result.energy))
    ranked.sort(key=lambda item: item[1])
    return ranked


def _kmeans_1d(values: np.ndarray, k: int, iters: int = 60) -> np.ndarray:
    """Deterministic 1-D k-means; centers seeded at intensity quantiles.
    Returns the per-pixel cluster index array."""
    centers = np.quantile(values, (np.arange(k) + 0.5) / k)
    if np.min(np.diff(centers)) < 1e-9:
        # quantile seeds collide when one level dominates the histogram;
        # fall back to evenly spaced seeds over the intensity range
        centers = np.linspace(values.min(), values.max(), k)
        if centers[0] >= centers[-1] - 1e-12:
            raise ValueError(f"clustering degenerate: fewer than {k} occupied intensity levels")
    labels = np.zeros(values.shape, dtype=np.intp)
    for _ in range(iters):
        labels = np.argmin(np.abs(values[..., None] - centers[None, None, :]), axis=-1)
        new_centers = centers.copy()
        for c in range(k):
            members = values[labels == c]
            if members.size:
                new_centers[c] = members.mean()
        if np.allclose(new_centers, centers):
            break
        centers = new_centers
    if len(np.unique(labels)) < k:
        raise ValueError(f"clustering degenerate: fewer than {k} occupied intensity levels")
    return labels


def init_multiphase(
    f: np.ndarray,
    scenarios: ScenarioSet,
    n: int,
    cfg: SolverConfig,
    max_outer: Optional[int] = None,
    data_weight: float = 1.0,
) -> List[np.ndarray]:
    """Initial shape fields from the length-regularized multiphase solve.

    Seeds n+1 intensity clusters (background = the most populated cluster,
    objects ordered by decreasing cluster intensity), runs the depth
    pipeline with the curvature weight replaced by the constant 1, and
    returns the thresholded aggregates as binary-valued float fields,
    identical across scenarios.
    """
    f = np.asarray(f, dtype=np.float64)
    if f.ndim == 2:
        f = f[None]
    intensity = f.mean(axis=0)
    labels = _kmeans_1d(intensity, n + 1)

    counts = np.bincount(labels.ravel(), minlength=n + 1)
    background = int(np.argmax(counts))
    object_clusters = [c for c in range(n + 1) if c != background]
    means = [intensity[labels == c].mean() for c in object_clusters]
    object_clusters = [c for _, c in sorted(zip(means, object_clusters), reverse=True)]
    phi0s = [(labels == c).astype(np.float64) for c in object_clusters]
    if max_outer is not None:
        cfg = replace(cfg, max_outer=int(max_outer))
    result = segment_with_depth(
        f, scenarios, tuple(range(n)), cfg, phi0s, data_weight=data_weight, weight_const=1.0
    )
    return [(agg >= cfg.eta).astype(np.float64) for agg in result.aggregates]
