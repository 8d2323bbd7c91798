import json
import subprocess
import sys

import numpy as np
import pytest

from ghostimaging.cli import main
from ghostimaging.construction import random_kernels
from ghostimaging.matrix_io import write_matrix
from ghostimaging.runner import DEFAULTS, SCHEMA_ID, validate_config
from ghostimaging.errors import ConfigError

RHO0 = 1e-4
NEAR_SOURCE = {"P": 1.0, "a0": 0.01, "rho0": RHO0, "T0": 1e-12}
FAR_SOURCE = {"P": 1.0, "a0": 1e-3, "rho0": 1e-4, "T0": 1e-12}
FAR_GEOMETRY = {"L": 100.0, "wavelength": 1e-6}


def scenario(tmp_path, name, **sections):
    cfg = {"schema": SCHEMA_ID, **sections}
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(cfg))
    return path


def run_cli(*args):
    return main([str(a) for a in args])


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_near_thermal_psf_in_manifest(tmp_path):
    cfg = scenario(tmp_path, "near", source={"preset": "thermal_max", **NEAR_SOURCE}, mask={"type": "point"})
    assert run_cli("image", "--config", cfg, "--out", tmp_path / "r") == 0
    m = manifest(tmp_path / "r")
    assert m["psf"]["psf_e2_radius"] == pytest.approx(np.sqrt(2) * RHO0, rel=0.05)
    assert m["classification"] == "ClassicalPI"
    assert m["Ct"] == pytest.approx(1 / np.sqrt(1.25))
    # defaults are expanded into the manifest
    assert m["config"]["grid"]["n_points"] == DEFAULTS["grid"]["n_points"]
    assert m["config"]["detection"]["filter_width"] == NEAR_SOURCE["T0"]
    header = (tmp_path / "r" / "scan.csv").read_text().splitlines()[0]
    assert header == "position_m,C_total,C0,pi_term,ps_term,stderr"


def test_manifest_config_reproduces_run(tmp_path):
    cfg = scenario(tmp_path, "near", source={"preset": "classical_ps_max", **NEAR_SOURCE},
                   mask={"type": "double_slit", "width": 2e-4, "separation": 6e-4})
    run_cli("image", "--config", cfg, "--out", tmp_path / "a")
    replay = tmp_path / "replay.json"
    replay.write_text(json.dumps(manifest(tmp_path / "a")["config"]))
    run_cli("image", "--config", replay, "--out", tmp_path / "b")
    assert (tmp_path / "a" / "scan.csv").read_bytes() == (tmp_path / "b" / "scan.csv").read_bytes()


def test_compare_near_thermal_vs_classical_ps(tmp_path):
    for preset in ("thermal_max", "classical_ps_max"):
        cfg = scenario(tmp_path, preset, source={"preset": preset, **NEAR_SOURCE},
                       mask={"type": "slit", "width": 4e-4})
        assert run_cli("image", "--config", cfg, "--out", tmp_path / preset) == 0
    assert run_cli("compare", tmp_path / "thermal_max", tmp_path / "classical_ps_max", "--out", tmp_path / "cmp") == 0
    report = json.loads((tmp_path / "cmp" / "comparison.json").read_text())
    assert report["max_relative_difference"] < 1e-10


def test_compare_far_field_detects_inversion(tmp_path):
    for preset in ("thermal_max", "classical_ps_max"):
        cfg = scenario(tmp_path, preset, source={"preset": preset, **FAR_SOURCE}, geometry=FAR_GEOMETRY,
                       mask={"type": "point", "position": 0.05})
        assert run_cli("image", "--config", cfg, "--out", tmp_path / preset) == 0
    run_cli("compare", tmp_path / "thermal_max", tmp_path / "classical_ps_max", "--out", tmp_path / "cmp")
    report = json.loads((tmp_path / "cmp" / "comparison.json").read_text())
    assert report["peaks_mirrored"] is True
    assert report["peak_position_a"] > 0 > report["peak_position_b"]


def test_compare_classical_vs_quantum_psf_ratio(tmp_path):
    for preset in ("classical_ps_max", "quantum_ps_max"):
        cfg = scenario(tmp_path, preset, source={"preset": preset, **NEAR_SOURCE}, mask={"type": "point"})
        assert run_cli("image", "--config", cfg, "--out", tmp_path / preset) == 0
    run_cli("compare", tmp_path / "classical_ps_max", tmp_path / "quantum_ps_max", "--out", tmp_path / "cmp")
    report = json.loads((tmp_path / "cmp" / "comparison.json").read_text())
    assert report["psf_ratio"] == pytest.approx(np.sqrt(2), rel=0.05)


def test_compare_grid_mismatch(tmp_path, capsys):
    for n in (64, 128):
        cfg = scenario(tmp_path, f"g{n}", source=NEAR_SOURCE, grid={"n_points": n})
        run_cli("image", "--config", cfg, "--out", tmp_path / f"g{n}")
    assert run_cli("compare", tmp_path / "g64", tmp_path / "g128") == 2
    assert "GridMismatch" in capsys.readouterr().err


MC = {
    "source": {"preset": "thermal_max", "P": 1e4, "a0": 1.0, "rho0": 0.5, "T0": 1.0},
    "detection": {"filter_width": 1.0, "pinhole_area": 0.125},
    "grid": {"n_points": 16},
    "mask": {"type": "gaussian", "radius": 1.0},
    "montecarlo": {"n_samples": 200, "seed": 3, "time_points": 32},
}


def test_montecarlo_rerun_is_bit_identical(tmp_path):
    cfg = scenario(tmp_path, "mc", **MC)
    assert run_cli("montecarlo", "--config", cfg, "--out", tmp_path / "a") == 0
    assert run_cli("montecarlo", "--config", cfg, "--out", tmp_path / "b") == 0
    assert (tmp_path / "a" / "scan.csv").read_bytes() == (tmp_path / "b" / "scan.csv").read_bytes()
    run_cli("montecarlo", "--config", cfg, "--out", tmp_path / "c", "--seed", 4)
    assert (tmp_path / "a" / "scan.csv").read_bytes() != (tmp_path / "c" / "scan.csv").read_bytes()
    m = manifest(tmp_path / "c")
    assert m["config"]["montecarlo"]["seed"] == 4
    rows = (tmp_path / "a" / "scan.csv").read_text().splitlines()[1:]
    assert all(r.split(",")[5] != "" for r in rows)


def test_montecarlo_refuses_quantum_source(tmp_path, capsys):
    mc = json.loads(json.dumps(MC))
    mc["source"].update(preset="quantum_ps_max", P=0.1)
    cfg = scenario(tmp_path, "q", **mc)
    assert run_cli("montecarlo", "--config", cfg, "--out", tmp_path / "q") == 2
    assert "NonclassicalState" in capsys.readouterr().err


def test_construct_scenario(tmp_path):
    p = random_kernels(16, np.random.default_rng(0))
    write_matrix(tmp_path / "kn.ghostmat", p.Kn)
    write_matrix(tmp_path / "kp.ghostmat", p.Kp)
    cfg = scenario(tmp_path, "c", mode="construct", construct={"kn_path": "kn.ghostmat", "kp_path": "kp.ghostmat"})
    assert run_cli("construct", "--config", cfg, "--out", tmp_path / "out") == 0
    m = manifest(tmp_path / "out")
    assert m["reconstruction_error"] <= m["tolerance"] == 1e-8
    assert m["classical"] is True


def test_relay_scenario(tmp_path):
    cfg = scenario(tmp_path, "relay", source={"preset": "thermal_max", "P": 1.0, "a0": 1e-3, "rho0": 5e-5, "T0": 1.0},
                   geometry={"L": 1e-6, "wavelength": 1e-6}, relay={"L_R": 0.3, "f": 0.1, "magnification": -2},
                   grid={"n_points": 128}, mask={"type": "double_slit", "width": 1e-4, "separation": 4e-4})
    assert run_cli("relay", "--config", cfg, "--out", tmp_path / "r") == 0
    m = manifest(tmp_path / "r")
    assert m["parseval_discrepancy"] < 1e-2
    assert m["config"]["relay"]["d2"] == pytest.approx(2 * m["config"]["relay"]["d1"])


def test_propagate_scenario(tmp_path):
    cfg = scenario(tmp_path, "p", source=FAR_SOURCE, geometry=FAR_GEOMETRY, grid={"n_points": 128})
    assert run_cli("propagate", "--config", cfg, "--out", tmp_path / "p") == 0
    m = manifest(tmp_path / "p")
    for flavor in ("phase_insensitive", "phase_sensitive"):
        assert m["propagation"][flavor]["max_error_vs_closed_form"] < 0.01
    assert (tmp_path / "p" / "kernel_pi.ghostmat").exists()


def test_contrast_scenario(tmp_path):
    cfg = scenario(tmp_path, "c", source=NEAR_SOURCE, mask={"type": "cells", "width": RHO0, "centers": [-1e-3, 0, 1e-3]},
                   contrast={"binary_approximation": True})
    assert run_cli("contrast", "--config", cfg, "--out", tmp_path / "c") == 0
    m = manifest(tmp_path / "c")
    assert m["contrast_closed_form"]["spatial"] == pytest.approx(RHO0 / m["effective_area"])


def test_pgm_and_grid_override(tmp_path):
    cfg = scenario(tmp_path, "p", source=NEAR_SOURCE, mask={"type": "double_slit", "width": 2e-4, "separation": 6e-4},
                   grid={"image_2d_points": 32})
    assert run_cli("image", "--config", cfg, "--out", tmp_path / "o", "--format", "pgm", "--grid", 64) == 0
    assert (tmp_path / "o" / "image.pgm").read_bytes().startswith(b"P5\n32 32\n65535\n")
    assert len((tmp_path / "o" / "scan.csv").read_text().splitlines()) == 65


@pytest.mark.parametrize(
    "sections, path",
    [
        ({"source": {"P": -1, "a0": 1, "rho0": 1, "T0": 1}}, "source.P"),
        ({"source": {"P": 1, "a0": 1, "rho0": 1}}, "source"),
        ({"source": NEAR_SOURCE, "mask": {"type": "slit"}}, "mask.width"),
        ({"source": NEAR_SOURCE, "geometry": {"L": 1.0}}, "geometry"),
        ({"source": NEAR_SOURCE, "bogus": 1}, "<root>"),
        ({"source": NEAR_SOURCE, "mask": {"type": "bitmap", "path": "missing.pbm", "pixel_pitch": 1e-5}}, "mask.path"),
    ],
)
def test_config_errors_name_the_field(tmp_path, capsys, sections, path):
    cfg = scenario(tmp_path, "bad", **sections)
    assert run_cli("image", "--config", cfg, "--out", tmp_path / "x") == 2
    assert path in capsys.readouterr().err


def test_wrong_schema_rejected(tmp_path):
    with pytest.raises(ConfigError):
        validate_config({"schema": "something-else", "source": NEAR_SOURCE})


def test_invalid_json_is_config_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert run_cli("image", "--config", bad, "--out", tmp_path / "x") == 2


def test_intermediate_regime_exit_code(tmp_path, capsys):
    cfg = scenario(tmp_path, "mid", source={"P": 1, "a0": 1e-3, "rho0": 1e-4, "T0": 1}, geometry={"L": 1, "wavelength": 1e-6})
    assert run_cli("image", "--config", cfg, "--out", tmp_path / "x") == 3
    assert "IntermediateRegime" in capsys.readouterr().err


def test_io_error_exit_code(tmp_path):
    cfg = scenario(tmp_path, "ok", source=NEAR_SOURCE)
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert run_cli("image", "--config", cfg, "--out", blocker / "sub") == 4
    assert run_cli("image", "--config", tmp_path / "missing.json", "--out", tmp_path / "x") == 4


def test_console_entry_point(tmp_path):
    cfg = scenario(tmp_path, "ok", source=NEAR_SOURCE)
    proc = subprocess.run([sys.executable, "-m", "ghostimaging", "image", "--config", str(cfg), "--out", str(tmp_path / "o")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "o" / "manifest.json").exists()
