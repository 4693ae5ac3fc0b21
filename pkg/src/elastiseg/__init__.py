"""Elastica-regularized image segmentation under noise-model uncertainty.

Scenario-decomposed solver with proximal consensus over candidate noise
distributions, curvature-weighted boundary regularization, a spectral
screened-Poisson label update and closed-form shrinkage.  Supports
two-phase segmentation and multi-object segmentation with depth,
including occlusion-ordering inference.
"""

from .core import dice, load_image, save_field, threshold
from .depth import (
    DepthResult,
    characteristic,
    init_multiphase,
    rank_orderings,
    segment_with_depth,
)
from .grid_ops import KERNEL_BACKEND
from .noise_models import NoiseKind, ScenarioSet, Theta
from .synth import PhantomSpec, Shape, add_noise, make_phantom
from .two_phase import SolverConfig, TwoPhaseResult, segment_two_phase

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "NoiseKind",
    "ScenarioSet",
    "Theta",
    "SolverConfig",
    "TwoPhaseResult",
    "DepthResult",
    "PhantomSpec",
    "Shape",
    "segment_two_phase",
    "segment_with_depth",
    "rank_orderings",
    "init_multiphase",
    "characteristic",
    "make_phantom",
    "add_noise",
    "load_image",
    "save_field",
    "threshold",
    "dice",
]
