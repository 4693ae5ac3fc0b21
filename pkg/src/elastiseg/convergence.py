"""Residual monitoring and stopping logic shared by both solvers.

A Snapshot captures everything the residuals need at one outer iteration:
per-scenario, per-object label fields (before the consensus assignment),
the consensus aggregates, multipliers, splitting variables and the energy.
The two-phase solver uses object count 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

__all__ = ["Snapshot", "ResidualRecord", "residuals", "should_stop", "write_diagnostics"]

# Denominators below this are treated as already-converged coordinates.
DENOM_GUARD = 1e-12

CSV_HEADER = "iter,R_tau,R_v,R_phi,R_e,R_w,R_lambda,energy"


@dataclass
class Snapshot:
    """State of one outer iteration; indices are [scenario][object]."""

    phis: List[List[np.ndarray]]  # scenario solutions before consensus
    aggregates: List[np.ndarray]  # consensus field per object
    vs: List[List[np.ndarray]]  # scalar multipliers
    ws: List[List[np.ndarray]]  # splitting vector fields (2, H, W)
    grad_phis: List[List[np.ndarray]]  # gradients of the scenario solutions
    lams: List[List[np.ndarray]]  # vector multipliers (2, H, W)
    energy: float


@dataclass
class ResidualRecord:
    iteration: int
    r_tau: float
    r_v: float
    r_phi: float
    r_e: float
    r_w: float
    r_lambda: float
    energy: float


def _l1(a: np.ndarray) -> float:
    return float(np.abs(a).sum())


def _ratio(num: float, den: float) -> float:
    return 0.0 if den < DENOM_GUARD else num / den


def _consensus_gap(snap: Snapshot, probs: np.ndarray) -> float:
    total = 0.0
    for i, p in enumerate(probs):
        for h, agg in enumerate(snap.aggregates):
            total += p * _l1(snap.phis[i][h] - agg)
    return total


def _split_gap(snap: Snapshot, probs: np.ndarray) -> float:
    total = 0.0
    for i, p in enumerate(probs):
        for h in range(len(snap.aggregates)):
            total += p * _l1(snap.ws[i][h] - snap.grad_phis[i][h])
    return total


def _prob_mean(fields: List[List[np.ndarray]], probs: np.ndarray, h: int) -> np.ndarray:
    out = np.zeros_like(fields[0][h])
    for i, p in enumerate(probs):
        out = out + p * fields[i][h]
    return out


def residuals(
    current: Snapshot,
    previous: Snapshot,
    initial: Snapshot,
    probs: Sequence[float],
    iteration: int,
) -> ResidualRecord:
    """All termination residuals for one outer iteration.

    L1 norms are plain pixel-wise absolute sums.  `initial` supplies the
    self-normalizing denominators of the consensus and splitting gaps; when
    a denominator underflows the residual is defined as 0.
    """
    probs = np.asarray(probs, dtype=np.float64)
    n_obj = len(current.aggregates)

    r_tau = _ratio(_consensus_gap(current, probs), _consensus_gap(initial, probs))
    r_w = _ratio(_split_gap(current, probs), _split_gap(initial, probs))

    v_num = v_den = 0.0
    lam_num = lam_den = 0.0
    phi_num = phi_den = 0.0
    for h in range(n_obj):
        v_bar = _prob_mean(current.vs, probs, h)
        v_bar_prev = _prob_mean(previous.vs, probs, h)
        v_num += _l1(v_bar - v_bar_prev)
        v_den += _l1(v_bar_prev)
        lam_bar = _prob_mean(current.lams, probs, h)
        lam_bar_prev = _prob_mean(previous.lams, probs, h)
        lam_num += _l1(lam_bar - lam_bar_prev)
        lam_den += _l1(lam_bar_prev)
        phi_num += _l1(current.aggregates[h] - previous.aggregates[h])
        phi_den += _l1(previous.aggregates[h])

    r_e = _ratio(abs(current.energy - previous.energy), abs(previous.energy))

    return ResidualRecord(
        iteration=iteration,
        r_tau=r_tau,
        r_v=_ratio(v_num, v_den),
        r_phi=_ratio(phi_num, phi_den),
        r_e=r_e,
        r_w=r_w,
        r_lambda=_ratio(lam_num, lam_den),
        energy=current.energy,
    )


def should_stop(record: ResidualRecord, tol_tau: float, tol_phi: float, tol_w: float, tol_e: float) -> bool:
    """Gate on the consensus, aggregate, splitting and energy residuals.

    The multiplier residuals are reported but not gated: they scale with the
    penalty parameters and are unreliable as stopping signals.
    """
    return (
        record.r_tau < tol_tau
        and record.r_phi < tol_phi
        and record.r_w < tol_w
        and record.r_e < tol_e
    )


def write_diagnostics(records: Sequence[ResidualRecord], path) -> None:
    """Serialize residual records as CSV (12 significant digits)."""
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in records:
            fields = (r.r_tau, r.r_v, r.r_phi, r.r_e, r.r_w, r.r_lambda, r.energy)
            fh.write(str(r.iteration) + "," + ",".join(f"{x:.12g}" for x in fields) + "\n")
