"""End-to-end command-line tests using temporary configs and images."""

import numpy as np
import pytest

from elastiseg import core, synth
from elastiseg.cli import (
    ConfigError,
    build_phantom_spec,
    build_solver_config,
    default_disk_init,
    parse_config,
    parse_scenarios,
    run,
)


def write(path, text):
    path.write_text(text)
    return str(path)


def test_parse_config_grammar(tmp_path):
    cfg = write(tmp_path / "run.cfg", "alpha = 3.0\nmax_outer = 50  # comment\n\n# full line\n")
    values = parse_config(cfg)
    assert values == {"alpha": 3.0, "max_outer": 50}
    bad = write(tmp_path / "bad.cfg", "alpha 3.0\n")
    with pytest.raises(ConfigError):
        parse_config(bad)
    unknown = write(tmp_path / "unk.cfg", "gamma = 1\n")
    with pytest.raises(ConfigError):
        parse_config(unknown)
    dup = write(tmp_path / "dup.cfg", "alpha = 1\nalpha = 2\n")
    with pytest.raises(ConfigError):
        parse_config(dup)


def test_build_solver_config_defaults(tmp_path):
    cfg_file = write(tmp_path / "run.cfg", "alpha = 2.5\n")
    cfg, scenarios = build_solver_config(parse_config(cfg_file))
    assert cfg.alpha == 2.5
    assert cfg.tau == 5.0  # untouched defaults materialize
    assert [k.value for k in scenarios.kinds] == ["gaussian", "rayleigh", "poisson", "gamma"]
    assert np.allclose(scenarios.probabilities, [0.4, 0.1, 0.3, 0.2])


def test_parse_scenarios_errors():
    with pytest.raises(ConfigError):
        parse_scenarios("gaussian=1.0")
    with pytest.raises(ConfigError):
        parse_scenarios("gaussian:0.5,gamma:0.6")
    scen = parse_scenarios("gaussian:1.0")
    assert len(scen) == 1


def test_build_phantom_spec(tmp_path):
    text = "width = 32\nheight = 32\nbackground = 0.2\nshape = disk, 16, 16, 8, 0.8\n"
    spec = build_phantom_spec(parse_config(write(tmp_path / "p.cfg", text)))
    assert spec.width == 32 and len(spec.shapes) == 1
    with pytest.raises(ConfigError):
        build_phantom_spec({"width": 32})
    with pytest.raises(ConfigError):
        build_phantom_spec({"width": 32, "height": 32, "shape": ["disk, 1, 2, 0.5"]})


def test_validate_subcommand(tmp_path, capsys):
    cfg = write(tmp_path / "run.cfg", "beta = 20\n")
    assert run(["validate", "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert "tau = 5.0" in out
    assert "beta = 20.0" in out
    assert "scenarios = gaussian:0.4" in out


def test_validate_rejects_bad_config(tmp_path, capsys):
    cfg = write(tmp_path / "run.cfg", "scenarios = gaussian:0.5,gamma:0.6\n")
    assert run(["validate", "--config", cfg]) == 1
    assert "scenarios" in capsys.readouterr().err


def test_phantom_subcommand(tmp_path):
    spec = write(
        tmp_path / "spec.cfg",
        "width = 48\nheight = 48\nbackground = 0.25\nshape = disk, 24, 24, 12, 0.75\n",
    )
    out = tmp_path / "phantom"
    code = run(["phantom", "--spec", spec, "--noise", "gaussian:0.05", "--seed", "3",
                "--out", str(out)])
    assert code == 0
    clean = core.load_image(out / "clean.pgm")
    noisy = core.load_image(out / "noisy.pgm")
    truth = core.load_image(out / "truth_1.pgm")
    assert clean.shape == noisy.shape == (1, 48, 48)
    assert not np.array_equal(clean, noisy)
    assert truth.max() == 1.0
    manifest = (out / "manifest.txt").read_text()
    assert "subcommand = phantom" in manifest
    assert "spec_sha256 =" in manifest


def test_segment_subcommand_end_to_end(tmp_path):
    spec = synth.PhantomSpec(48, 48, background=0.25,
                             shapes=[synth.Shape("disk", (24, 24, 12), 0.75)])
    clean, masks = synth.make_phantom(spec)
    core.save_field(clean[0], tmp_path / "input.pgm")
    cfg = write(tmp_path / "run.cfg",
                "beta = 0\nmax_outer = 100\nscenarios = gaussian:1.0\n")
    out = tmp_path / "seg"
    code = run(["segment", "--input", str(tmp_path / "input.pgm"),
                "--config", cfg, "--out", str(out)])
    assert code == 0
    mask = core.load_image(out / "mask.pgm")[0] > 0.5
    assert core.dice(mask, masks[0]) >= 0.99
    diag = (out / "diagnostics.csv").read_text().splitlines()
    assert diag[0].startswith("iter,")
    manifest = (out / "manifest.txt").read_text()
    assert "converged = true" in manifest
    assert "input_sha256 =" in manifest


def test_segment_nonconverged_exit_code(tmp_path):
    spec = synth.PhantomSpec(48, 48, background=0.25,
                             shapes=[synth.Shape("disk", (24, 24, 12), 0.75)])
    clean, _ = synth.make_phantom(spec)
    noisy = synth.add_noise(clean, "gaussian", 0.2, 0)
    core.save_field(noisy[0], tmp_path / "input.pgm")
    cfg = write(tmp_path / "run.cfg", "max_outer = 3\nscenarios = gaussian:1.0\n")
    out = tmp_path / "seg"
    code = run(["segment", "--input", str(tmp_path / "input.pgm"),
                "--config", cfg, "--out", str(out)])
    assert code == 2
    # partial results are still written for inspection
    assert (out / "phi.pgm").exists()
    assert (out / "diagnostics.csv").exists()


def test_depth_subcommand_auto_ordering(tmp_path):
    spec = synth.PhantomSpec(
        64, 64, background=0.2,
        shapes=[synth.Shape("disk", (26, 32, 12), 0.85),
                synth.Shape("disk", (40, 32, 12), 0.5)],
    )
    clean, _ = synth.make_phantom(spec)
    noisy = synth.add_noise(clean, "gaussian", 0.1, 1)
    core.save_field(noisy[0], tmp_path / "input.pgm")
    cfg = write(tmp_path / "run.cfg",
                "beta = 10\nmu = 30\nmax_outer = 60\nscenarios = gaussian:1.0\n")
    out = tmp_path / "depth"
    code = run(["depth", "--input", str(tmp_path / "input.pgm"), "--config", cfg,
                "--objects", "2", "--out", str(out)])
    assert code in (0, 2)
    orderings = (out / "orderings.csv").read_text().splitlines()
    assert orderings[0] == "ordering,energy"
    assert len(orderings) == 3
    assert (out / "mask_1.pgm").exists() and (out / "mask_2.pgm").exists()
    manifest = (out / "manifest.txt").read_text()
    assert "subcommand = depth" in manifest
    assert "ordering =" in manifest


def test_depth_explicit_ordering(tmp_path):
    spec = synth.PhantomSpec(
        100, 100, background=0.3,
        shapes=[synth.Shape("disk", (38, 50, 22), 0.85),
                synth.Shape("disk", (68, 50, 22), 0.55)],
    )
    clean, masks = synth.make_phantom(spec)
    noisy = clean
    for kind, param, seed in [("gaussian", 0.14, 21), ("rayleigh", 0.05, 22),
                              ("poisson", 1000, 23), ("gamma", 30, 24)]:
        noisy = synth.add_noise(noisy, kind, param, seed)
    core.save_field(noisy[0], tmp_path / "input.pgm")
    cfg = write(tmp_path / "run.cfg",
                "beta = 10\nmu = 30\nepsilon = 5\nmax_outer = 120\ndata_weight = 20\n"
                "scenarios = gaussian:0.5,rayleigh:0.1,poisson:0.2,gamma:0.2\n")
    out = tmp_path / "depth"
    code = run(["depth", "--input", str(tmp_path / "input.pgm"), "--config", cfg,
                "--objects", "2", "--ordering", "1-2", "--out", str(out)])
    assert code in (0, 2)
    m1 = core.load_image(out / "mask_1.pgm")[0] > 0.5
    m2 = core.load_image(out / "mask_2.pgm")[0] > 0.5
    assert core.dice(m1, masks[0]) >= 0.95
    assert core.dice(m2, masks[1]) >= 0.95


def test_missing_input_is_reported(tmp_path, capsys):
    cfg = write(tmp_path / "run.cfg", "alpha = 3\n")
    code = run(["segment", "--input", str(tmp_path / "nope.pgm"),
                "--config", cfg, "--out", str(tmp_path / "o")])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_default_disk_init_geometry():
    phi0 = default_disk_init(64, 64)
    assert phi0[32, 32] == 1.0
    assert phi0[0, 0] == 0.0
    assert set(np.unique(phi0)) == {0.0, 1.0}
