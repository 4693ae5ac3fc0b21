"""Command-line front end: config parsing and the four subcommands."""

from __future__ import annotations

import argparse
import hashlib
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import core, depth, synth, two_phase
from .convergence import write_diagnostics
from .grid_ops import KERNEL_BACKEND
from .noise_models import ScenarioSet
from .synth import NOISE_KINDS, PhantomSpec, Shape
from .two_phase import SolverConfig

__all__ = ["parse_config", "build_solver_config", "build_phantom_spec", "main", "run"]

_FLOAT_KEYS = (
    "alpha",
    "beta",
    "tau",
    "mu",
    "alpha1",
    "alpha2",
    "epsilon",
    "eta",
    "tol_tau",
    "tol_phi",
    "tol_w",
    "tol_e",
    "background",
    "data_weight",
)
_INT_KEYS = ("max_outer", "inner_sweeps", "seed", "width", "height")
_KNOWN_KEYS = set(_FLOAT_KEYS) | set(_INT_KEYS) | {"scenarios", "shape"}

DEFAULT_SCENARIOS = "gaussian:0.4,rayleigh:0.1,poisson:0.3,gamma:0.2"


class ConfigError(ValueError):
    pass


def parse_config(path) -> Dict[str, object]:
    """Parse `key = value` lines ('#' comments, repeated `shape` allowed)."""
    values: Dict[str, object] = {}
    shapes: List[str] = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key '{key}'")
        if key == "shape":
            shapes.append(value)
            continue
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate key '{key}'")
        if key in _FLOAT_KEYS:
            try:
                values[key] = float(value)
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: '{key}' is not a number") from None
        elif key in _INT_KEYS:
            try:
                values[key] = int(value)
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: '{key}' is not an integer") from None
        else:
            values[key] = value
    if shapes:
        values["shape"] = shapes
    return values


def parse_scenarios(text: str) -> ScenarioSet:
    """'gaussian:0.4,rayleigh:0.1,...' -> validated scenario set."""
    entries = []
    for item in text.split(","):
        item = item.strip()
        if ":" not in item:
            raise ConfigError(f"scenarios: '{item}' is not kind:probability")
        kind, prob = item.split(":", 1)
        try:
            entries.append((kind.strip().lower(), float(prob)))
        except ValueError:
            raise ConfigError(f"scenarios: bad probability in '{item}'") from None
    try:
        return ScenarioSet(entries)
    except ValueError as exc:
        raise ConfigError(f"scenarios: {exc}") from None


def build_solver_config(values: Dict[str, object]) -> Tuple[SolverConfig, ScenarioSet]:
    kwargs = {
        key: values[key]
        for key in values
        if key not in ("scenarios", "shape", "width", "height", "background", "data_weight")
    }
    try:
        cfg = SolverConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    scenarios = parse_scenarios(str(values.get("scenarios", DEFAULT_SCENARIOS)))
    return cfg, scenarios


def _parse_shape(text: str) -> Shape:
    parts = [p.strip() for p in text.split(",")]
    kind = parts[0]
    if kind not in ("disk", "rect", "annulus"):
        raise ConfigError(f"shape: unknown kind '{kind}'")
    try:
        numbers = [float(p) for p in parts[1:]]
    except ValueError:
        raise ConfigError(f"shape: non-numeric parameter in '{text}'") from None
    n_params = {"disk": 3, "rect": 4, "annulus": 4}[kind]
    if len(numbers) < n_params + 1:
        raise ConfigError(f"shape: '{kind}' needs {n_params} parameters and a level")
    params = tuple(numbers[:n_params])
    level = numbers[n_params]
    rest = numbers[n_params + 1 :]
    if len(rest) % 2 != 0:
        raise ConfigError("shape: gap sectors come in start,extent pairs")
    gaps = [(rest[i], rest[i + 1]) for i in range(0, len(rest), 2)]
    try:
        return Shape(kind=kind, params=params, level=level, gaps=gaps)
    except ValueError as exc:
        raise ConfigError(f"shape: {exc}") from None


def build_phantom_spec(values: Dict[str, object]) -> PhantomSpec:
    for key in ("width", "height"):
        if key not in values:
            raise ConfigError(f"phantom spec is missing '{key}'")
    shapes = [_parse_shape(s) for s in values.get("shape", [])]
    try:
        return PhantomSpec(
            width=int(values["width"]),
            height=int(values["height"]),
            background=float(values.get("background", 0.0)),
            shapes=shapes,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def parse_noise_chain(text: str) -> List[Tuple[str, float]]:
    chain = []
    for item in text.split(","):
        item = item.strip()
        if ":" not in item:
            raise ConfigError(f"noise: '{item}' is not kind:param")
        kind, param = item.split(":", 1)
        kind = kind.strip().lower()
        if kind not in NOISE_KINDS:
            raise ConfigError(f"noise: unknown kind '{kind}'")
        try:
            chain.append((kind, float(param)))
        except ValueError:
            raise ConfigError(f"noise: bad parameter in '{item}'") from None
    return chain


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(path, subcommand: str, cfg: SolverConfig, scenarios: Optional[ScenarioSet],
                   inputs: Dict[str, str], extras: Dict[str, str]) -> None:
    """Everything needed to reproduce the run bit-identically."""
    lines = [f"subcommand = {subcommand}", f"kernel_backend = {KERNEL_BACKEND}", "rng = PCG64"]
    for key, value in asdict(cfg).items():
        lines.append(f"{key} = {value}")
    if scenarios is not None:
        lines.append(
            "scenarios = " + ",".join(f"{k.value}:{p:g}" for k, p in scenarios)
        )
    for key, value in inputs.items():
        lines.append(f"{key} = {value}")
        lines.append(f"{key}_sha256 = {_sha256(value)}")
    for key, value in extras.items():
        lines.append(f"{key} = {value}")
    Path(path).write_text("\n".join(lines) + "\n")


def default_disk_init(height: int, width: int) -> np.ndarray:
    """Centered disk indicator of radius min(H, W) / 4."""
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    r = min(height, width) / 4.0
    return (
        (xx - (width - 1) / 2.0) ** 2 + (yy - (height - 1) / 2.0) ** 2 <= r**2
    ).astype(np.float64)


def _cmd_validate(args) -> int:
    values = parse_config(args.config)
    cfg, scenarios = build_solver_config(values)
    for key, value in asdict(cfg).items():
        print(f"{key} = {value}")
    print("scenarios = " + ",".join(f"{k.value}:{p:g}" for k, p in scenarios))
    return 0


def _cmd_segment(args) -> int:
    values = parse_config(args.config)
    cfg, scenarios = build_solver_config(values)
    f = core.load_image(args.input)
    if args.init:
        phi0 = core.load_image(args.init)[0]
    else:
        phi0 = default_disk_init(f.shape[1], f.shape[2])
    result = two_phase.segment_two_phase(f, scenarios, cfg, phi0)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    core.save_field(result.phi_agg, out / "phi.pgm")
    core.save_field(result.mask.astype(np.float64), out / "mask.pgm")
    write_diagnostics(result.diagnostics, out / "diagnostics.csv")
    inputs = {"input": args.input, "config": args.config}
    if args.init:
        inputs["init"] = args.init
    write_manifest(
        out / "manifest.txt", "segment", cfg, scenarios, inputs,
        {"out": str(out), "iterations": str(result.iterations),
         "converged": str(result.converged).lower()},
    )
    return 0 if result.converged else 2


def _cmd_depth(args) -> int:
    values = parse_config(args.config)
    cfg, scenarios = build_solver_config(values)
    f = core.load_image(args.input)
    n = args.objects
    data_weight = float(values.get("data_weight", 10.0))
    # short constant-weight warm start: a long refinement at low data
    # weight can eat thin objects before the main solve ever sees them
    phi0s = depth.init_multiphase(
        f, scenarios, n, cfg, max_outer=min(cfg.max_outer, 5), data_weight=2.0
    )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.ordering == "auto":
        ranked = depth.rank_orderings(f, scenarios, n, cfg, phi0s, data_weight=data_weight)
        with open(out / "orderings.csv", "w") as fh:
            fh.write("ordering,energy\n")
            for perm, energy in ranked:
                fh.write("-".join(str(i + 1) for i in perm) + f",{energy:.12g}\n")
        ordering = ranked[0][0]
    else:
        try:
            ordering = tuple(int(tok) - 1 for tok in args.ordering.split("-"))
        except ValueError:
            raise ConfigError(
                f"ordering: '{args.ordering}' is not 'auto' or like '1-2'"
            ) from None
    result = depth.segment_with_depth(f, scenarios, ordering, cfg, phi0s, data_weight=data_weight)

    for h, mask in enumerate(result.masks, start=1):
        core.save_field(mask.astype(np.float64), out / f"mask_{h}.pgm")
    (out / "energy.txt").write_text(f"{result.energy:.12g}\n")
    write_diagnostics(result.diagnostics, out / "diagnostics.csv")
    write_manifest(
        out / "manifest.txt", "depth", cfg, scenarios,
        {"input": args.input, "config": args.config},
        {"out": str(out), "objects": str(n),
         "ordering": "-".join(str(i + 1) for i in result.ordering),
         "iterations": str(result.iterations),
         "converged": str(result.converged).lower()},
    )
    return 0 if result.converged else 2


def _cmd_phantom(args) -> int:
    values = parse_config(args.spec)
    spec = build_phantom_spec(values)
    chain = parse_noise_chain(args.noise) if args.noise else []
    clean, masks = synth.make_phantom(spec)
    noisy = clean
    for step, (kind, param) in enumerate(chain):
        noisy = synth.add_noise(noisy, kind, param, args.seed + step)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    core.save_field(clean[0], out / "clean.pgm")
    core.save_field(noisy[0], out / "noisy.pgm")
    for h, mask in enumerate(masks, start=1):
        core.save_field(mask.astype(np.float64), out / f"truth_{h}.pgm")
    cfg = SolverConfig(seed=args.seed)
    write_manifest(
        out / "manifest.txt", "phantom", cfg, None, {"spec": args.spec},
        {"out": str(out), "noise": args.noise or "none", "noise_seed": str(args.seed)},
    )
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="elastiseg",
        description="Elastica-regularized segmentation of noisy images "
        "under noise-model uncertainty.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="two-phase segmentation")
    p.add_argument("--input", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--init", help="initial label field (PGM); default: centered disk")
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("depth", help="segmentation with depth / occlusion ordering")
    p.add_argument("--input", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--objects", type=int, required=True)
    p.add_argument("--ordering", default="auto", help="'auto' or e.g. '2-1' (nearest first)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_depth)

    p = sub.add_parser("phantom", help="generate a noisy phantom with ground truth")
    p.add_argument("--spec", required=True)
    p.add_argument("--noise", default="", help="e.g. 'gaussian:0.1,saltpepper:0.05'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_phantom)

    p = sub.add_parser("validate", help="parse a config and echo the resolved values")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_validate)

    return parser


def run(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    try:
        return args.func(args)
    except (ConfigError, core.MalformedImageError, FileNotFoundError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
