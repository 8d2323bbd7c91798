"""Scenario files, run orchestration and run comparison.

A scenario is a JSON document with a ``schema`` field; ``load_config``
validates it, fills in defaults and returns the resolved dictionary that is
also written verbatim into every run's ``manifest.json``.
"""

from __future__ import annotations

import copy
import csv
import json
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from . import __version__
from .construction import PrescribedKernels, construct
from .errors import ConfigError, GridMismatch, InvalidParams, NoPeak, RegionTooLarge
from .grid import TransverseGrid
from .image2d import analytic_image_2d, mask_2d, write_pgm
from .imaging import (
    DetectionSetup,
    ImageScan,
    analytic_image,
    contrast,
    contrast_closed_form,
    e2_radius,
    ghost_image,
    measure_psf,
    numeric_image,
    preset_temporal,
    source_constants,
    temporal_factor,
)
from .masks import (
    MaskSpec,
    bitmap_mask,
    cells_mask,
    double_slit_mask,
    gaussian_mask,
    load_bitmap,
    point_mask,
    slit_mask,
    uniform_mask,
)
from .matrix_io import read_matrix, write_matrix
from .montecarlo import run_montecarlo
from .propagation import PropagationGeometry, analytic_detection_kernel, fresnel_report, propagate_pi, propagate_ps
from .relay import RelayConfig, relay_image
from .source_models import Flavor, GaussianSchellParams, Preset, make_source

SCHEMA_ID = "ghostimaging/scenario-v1"
MODES = ("analytic", "numeric", "montecarlo", "construct", "contrast", "relay", "propagate")

_POS = {"type": "number", "exclusiveMinimum": 0}
_NUM = {"type": "number"}
_NULLABLE_POS = {"type": ["number", "null"], "exclusiveMinimum": 0}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["schema"],
    "additionalProperties": False,
    "properties": {
        "schema": {"const": SCHEMA_ID},
        "mode": {"enum": list(MODES)},
        "source": {
            "type": "object",
            "required": ["P", "a0", "rho0", "T0"],
            "additionalProperties": False,
            "properties": {
                "preset": {"enum": [p.value for p in Preset]},
                "P": _POS,
                "a0": _POS,
                "rho0": _POS,
                "T0": _POS,
            },
        },
        "geometry": {
            "type": ["object", "null"],
            "additionalProperties": False,
            "properties": {"L": _POS, "k0": _POS, "wavelength": _POS},
            "required": ["L"],
        },
        "relay": {
            "type": ["object", "null"],
            "additionalProperties": False,
            "required": ["L_R", "f"],
            "properties": {"L_R": _POS, "d1": _POS, "d2": _POS, "f": _POS, "magnification": {"type": "number", "exclusiveMaximum": 0}},
        },
        "mask": {
            "type": "object",
            "required": ["type"],
            "properties": {
                "type": {"enum": ["point", "slit", "double_slit", "cells", "gaussian", "uniform", "bitmap"]},
                "position": _NUM,
                "center": _NUM,
                "width": _POS,
                "separation": _POS,
                "centers": {"type": "array", "items": _NUM},
                "radius": _POS,
                "path": {"type": "string"},
                "pixel_pitch": _POS,
                "row": {"type": ["integer", "null"]},
            },
            "additionalProperties": False,
        },
        "detection": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "filter_width": _POS,
                "quantum_efficiency": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "pinhole_area": _POS,
                "charge": _POS,
                "bucket_half_width": _NULLABLE_POS,
                "ac_coupled": {"type": "boolean"},
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_points": {"type": "integer", "minimum": 8},
                "spacing": _NULLABLE_POS,
                "source_spacing": _NULLABLE_POS,
                "image_2d_points": {"type": "integer", "minimum": 8},
            },
        },
        "montecarlo": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_samples": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "shot_noise": {"type": "boolean"},
                "time_points": {"type": "integer", "minimum": 8},
            },
        },
        "construct": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kn_path", "kp_path"],
            "properties": {
                "kn_path": {"type": "string"},
                "kp_path": {"type": "string"},
                "cell_measure": _POS,
                "tol": {"type": "number", "minimum": 0},
            },
        },
        "contrast": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "region_half_width": _NULLABLE_POS,
                "binary_approximation": {"type": "boolean"},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"format": {"enum": ["csv", "pgm"]}},
        },
    },
}

DEFAULTS = {
    "mode": "analytic",
    "source": {"preset": "thermal_max"},
    "geometry": None,
    "relay": None,
    "mask": {"type": "point", "position": 0.0},
    "detection": {
        "filter_width": None,
        "quantum_efficiency": 1.0,
        "pinhole_area": 1.0,
        "charge": 1.0,
        "bucket_half_width": None,
        "ac_coupled": False,
    },
    "grid": {"n_points": 256, "spacing": None, "source_spacing": None, "image_2d_points": 128},
    "montecarlo": {"n_samples": 2000, "seed": 0, "shot_noise": True, "time_points": 64},
    "contrast": {"region_half_width": None, "binary_approximation": False},
    "output": {"format": "csv"},
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def validate_config(raw: dict, base_dir: Optional[Path] = None) -> dict:
    """Validate a scenario dictionary and return it with every default filled in."""
    if not isinstance(raw, dict):
        raise ConfigError("", "configuration must be a JSON object")
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = ".".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(path, err.message)
    cfg = _merge(DEFAULTS, raw)
    mode = cfg["mode"]
    if mode != "construct" and "source" not in raw:
        raise ConfigError("source", "required for this mode")
    if mode == "construct" and "construct" not in raw:
        raise ConfigError("construct", "required for construct mode")
    if mode == "relay" and not raw.get("relay"):
        raise ConfigError("relay", "required for relay mode")
    if mode == "propagate" and not raw.get("geometry"):
        raise ConfigError("geometry", "required for propagate mode")

    geom = cfg["geometry"]
    if geom is not None:
        if ("k0" in geom) == ("wavelength" in geom):
            raise ConfigError("geometry", "give exactly one of k0 or wavelength")
        if "wavelength" in geom:
            geom["k0"] = 2 * np.pi / geom.pop("wavelength")
    relay = cfg["relay"]
    if relay is not None:
        has_d = "d1" in relay and "d2" in relay
        if has_d == ("magnification" in relay):
            raise ConfigError("relay", "give either d1 and d2, or magnification")
        if "magnification" in relay:
            rc = RelayConfig.from_magnification(relay["L_R"], relay["f"], relay.pop("magnification"))
            relay["d1"], relay["d2"] = rc.d1, rc.d2
        try:
            RelayConfig(relay["L_R"], relay["d1"], relay["d2"], relay["f"])
        except InvalidParams as exc:
            raise ConfigError("relay", str(exc)) from exc
        if geom is None:
            raise ConfigError("geometry", "relay mode needs k0 (geometry.L is the source-to-object distance)")

    if "source" in cfg and mode != "construct":
        src = cfg["source"]
        if cfg["detection"]["filter_width"] is None:
            cfg["detection"]["filter_width"] = src["T0"]
        try:
            GaussianSchellParams(src["P"], src["a0"], src["rho0"], src["T0"])
        except InvalidParams as exc:
            raise ConfigError("source", str(exc)) from exc

    mask = cfg["mask"]
    required = {"slit": ["width"], "double_slit": ["width", "separation"], "cells": ["width", "centers"],
                "gaussian": ["radius"], "bitmap": ["path", "pixel_pitch"]}
    for key in required.get(mask["type"], []):
        if key not in mask:
            raise ConfigError(f"mask.{key}", f"required for mask type {mask['type']}")
    base_dir = Path(".") if base_dir is None else Path(base_dir)
    for section, key in (("mask", "path"), ("construct", "kn_path"), ("construct", "kp_path")):
        value = cfg.get(section, {}) and cfg[section].get(key)
        if value:
            resolved = (base_dir / value).resolve()
            if not resolved.exists():
                raise ConfigError(f"{section}.{key}", f"file not found: {resolved}")
            cfg[section][key] = str(resolved)
    if mode == "construct":
        cfg["construct"].setdefault("cell_measure", 1.0)
        cfg["construct"].setdefault("tol", 1e-8)
    return cfg


def load_config(path) -> dict:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path}: invalid JSON ({exc})") from exc
    return validate_config(raw, path.parent)


# --------------------------------------------------------------------------- building blocks


def _params(cfg) -> GaussianSchellParams:
    s = cfg["source"]
    return GaussianSchellParams(s["P"], s["a0"], s["rho0"], s["T0"])


def _geometry(cfg) -> Optional[PropagationGeometry]:
    g = cfg["geometry"]
    return None if g is None else PropagationGeometry(g["L"], g["k0"])


def _setup(cfg) -> DetectionSetup:
    d = cfg["detection"]
    return DetectionSetup(
        filter_width=d["filter_width"],
        quantum_efficiency=d["quantum_efficiency"],
        pinhole_area=d["pinhole_area"],
        charge=d["charge"],
        bucket_half_width=d["bucket_half_width"],
    )


def _regime(cfg, params, geom) -> str:
    if geom is None:
        return "near"
    report = fresnel_report(params, geom)
    preset = Preset(cfg["source"]["preset"])
    return report.regime_pi if preset is Preset.THERMAL_MAX else report.regime_ps


def _image_grid(cfg, params, geom) -> TransverseGrid:
    """Detection-plane grid: ``rho/4`` spacing by default, ``rho`` being the local coherence radius."""
    n = cfg["grid"]["n_points"]
    spacing = cfg["grid"]["spacing"]
    if spacing is None:
        if _regime(cfg, params, geom) == "far":
            report = fresnel_report(params, geom)
            spacing = min(report.rhoL / 4.0, 4.0 * report.aL / n)
        else:
            spacing = params.rho0 / 4.0
    return TransverseGrid(n, spacing)


def _source_grid(cfg, params) -> TransverseGrid:
    spacing = cfg["grid"]["source_spacing"] or params.rho0 / 4.0
    return TransverseGrid(cfg["grid"]["n_points"], spacing)


def _mask(cfg, grid: TransverseGrid) -> MaskSpec:
    m = cfg["mask"]
    kind = m["type"]
    if kind == "point":
        return point_mask(grid, m.get("position", 0.0))
    if kind == "slit":
        return slit_mask(grid, m["width"], m.get("center", 0.0))
    if kind == "double_slit":
        return double_slit_mask(grid, m["width"], m["separation"], m.get("center", 0.0))
    if kind == "cells":
        return cells_mask(grid, m["centers"], m["width"])
    if kind == "gaussian":
        return gaussian_mask(grid, m["radius"], m.get("center", 0.0))
    if kind == "uniform":
        return uniform_mask(grid)
    return bitmap_mask(grid, load_bitmap(m["path"]), m["pixel_pitch"], m.get("row"))


def write_scan_csv(path, scan: ImageScan) -> None:
    stderr = scan.stderr if scan.stderr is not None else [None] * len(scan.positions)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["position_m", "C_total", "C0", "pi_term", "ps_term", "stderr"])
        for row in zip(scan.positions, scan.total, scan.background, scan.pi_term, scan.ps_term, stderr):
            w.writerow([_fmt(v) for v in row])


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def read_scan_csv(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ConfigError(str(path), "scan file is empty")
    cols = {}
    for key in rows[0]:
        vals = [r[key] for r in rows]
        cols[key] = None if all(v == "" for v in vals) else np.array([float(v) for v in vals])
    return cols


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _psf_block(cfg, scan: ImageScan, envelope: Optional[ImageScan]):
    if cfg["mask"]["type"] != "point":
        return None
    try:
        m = measure_psf(scan, envelope)
    except NoPeak:
        # the envelope often extends past the scan window; keep the PSF alone
        try:
            m = measure_psf(scan)
        except NoPeak:
            return None
    return {"psf_e2_radius": m.e2_radius, "peak_position": m.peak_position, "envelope_radius": m.envelope_radius}


def _contrast_block(cfg, scan, params, setup):
    if scan.ac_coupled:
        return None
    try:
        return contrast(scan, params, setup, cfg["contrast"]["region_half_width"]).as_dict()
    except (RegionTooLarge, InvalidParams):
        return None
    except Exception as exc:  # background vanishes, etc.
        return {"error": str(exc)}


def _common_manifest(cfg, params, geom, setup):
    manifest = {"version": __version__, "config": cfg}
    if params is None:
        return manifest
    manifest["brightness"] = params.brightness
    if geom is not None:
        report = fresnel_report(params, geom)
        manifest["fresnel"] = report.as_dict()
        manifest["aL"] = report.aL
        manifest["rhoL"] = report.rhoL
    preset = Preset(cfg["source"]["preset"])
    pi_t, ps_t = preset_temporal(preset, params)
    t = pi_t if pi_t is not None else ps_t
    manifest["Ct"] = temporal_factor(t, setup.filter_width)
    return manifest


# --------------------------------------------------------------------------- modes


def _image_mode(cfg, out: Path, numeric: bool):
    params, geom, setup = _params(cfg), _geometry(cfg), _setup(cfg)
    preset = Preset(cfg["source"]["preset"])
    ac = cfg["detection"]["ac_coupled"]
    manifest = _common_manifest(cfg, params, geom, setup)
    grid = _image_grid(cfg, params, geom)
    mask = _mask(cfg, grid)
    if numeric:
        state = make_source(preset, params, _source_grid(cfg, params) if geom is not None else grid)
        manifest["classification"] = state.classification.value
        scan = numeric_image(state, geom, mask, setup, ac_coupled=ac)
        envelope = numeric_image(state, geom, uniform_mask(grid), setup) if cfg["mask"]["type"] == "point" else None
    else:
        state = make_source(preset, params, TransverseGrid(16, params.rho0 / 4))
        manifest["classification"] = state.classification.value
        scan = analytic_image(preset, params, geom, mask, setup, ac_coupled=ac)
        envelope = analytic_image(preset, params, geom, uniform_mask(grid), setup) if cfg["mask"]["type"] == "point" else None
    manifest.update({"Cn": scan.Cn, "Cp": scan.Cp, "regime": _regime(cfg, params, geom)})
    manifest["psf"] = _psf_block(cfg, scan, envelope)
    manifest["contrast"] = _contrast_block(cfg, scan, params, setup)
    write_scan_csv(out / "scan.csv", scan)
    files = ["scan.csv"]
    if cfg["output"]["format"] == "pgm":
        n2 = cfg["grid"]["image_2d_points"]
        g2 = TransverseGrid(n2, grid.spacing * grid.n_points / n2)
        bitmap = load_bitmap(cfg["mask"]["path"]) if cfg["mask"]["type"] == "bitmap" else None
        t2 = mask_2d(cfg["mask"], g2, bitmap)
        bg2, img2 = analytic_image_2d(preset, params, geom, t2, g2, setup)
        write_pgm(out / "image.pgm", img2)
        manifest["image_2d"] = {"file": "image.pgm", "content": "image-bearing term, peak-normalized",
                                "peak_value": float(img2.max()), "background_peak": float(bg2.max()),
                                "pixel_pitch_m": g2.spacing}
        files.append("image.pgm")
    return manifest, files


def _contrast_mode(cfg, out: Path):
    manifest, files = _image_mode(cfg, out, numeric=False)
    params, setup = _params(cfg), _setup(cfg)
    preset = Preset(cfg["source"]["preset"])
    grid = _image_grid(cfg, params, _geometry(cfg))
    mask = _mask(cfg, grid)
    c = cfg["contrast"]
    report = contrast_closed_form(
        preset, params, mask, setup, c["region_half_width"], binary_approximation=c["binary_approximation"]
    )
    manifest["contrast_closed_form"] = report.as_dict()
    manifest["effective_area"] = mask.effective_area
    return manifest, files


def _montecarlo_mode(cfg, out: Path):
    params, geom, setup = _params(cfg), _geometry(cfg), _setup(cfg)
    preset = Preset(cfg["source"]["preset"])
    mc = cfg["montecarlo"]
    manifest = _common_manifest(cfg, params, geom, setup)
    grid = _image_grid(cfg, params, geom)
    mask = _mask(cfg, grid)
    src_grid = _source_grid(cfg, params) if geom is not None else grid
    state = make_source(preset, params, src_grid)
    manifest["classification"] = state.classification.value
    from .grid import TimeGrid

    tg = TimeGrid(mc["time_points"], min(params.T0, setup.filter_width) / 8.0)
    scan = run_montecarlo(state, mask, setup, mc["n_samples"], mc["seed"], geom, tg, mc["shot_noise"])
    reference = numeric_image(state, geom, mask, setup)
    z = np.abs(scan.total - reference.total) / np.where(scan.stderr > 0, scan.stderr, np.inf)
    manifest.update({
        "Cn": reference.Cn,
        "Cp": reference.Cp,
        "n_samples": mc["n_samples"],
        "seed": mc["seed"],
        "fraction_within_3_stderr": float(np.mean(z <= 3.0)),
    })
    manifest["psf"] = _psf_block(cfg, scan, None)
    write_scan_csv(out / "scan.csv", scan)
    return manifest, ["scan.csv"]


def _propagate_mode(cfg, out: Path):
    params, geom, setup = _params(cfg), _geometry(cfg), _setup(cfg)
    manifest = _common_manifest(cfg, params, geom, setup)
    src = _source_grid(cfg, params)
    report = fresnel_report(params, geom)
    from .source_models import make_gaussian_schell_kernel

    files = []
    results = {}
    for flavor, prop, regime in (
        (Flavor.PHASE_INSENSITIVE, propagate_pi, report.regime_pi),
        (Flavor.PHASE_SENSITIVE, propagate_ps, report.regime_ps),
    ):
        kernel = make_gaussian_schell_kernel(params, src, flavor)
        out_grid = _image_grid({**cfg, "source": {**cfg["source"], "preset": "thermal_max" if flavor is Flavor.PHASE_INSENSITIVE else "classical_ps_max"}}, params, geom) if cfg["grid"]["spacing"] or regime == "far" else None
        k_out = prop(kernel, geom, out_grid=out_grid)
        name = "kernel_pi.ghostmat" if flavor is Flavor.PHASE_INSENSITIVE else "kernel_ps.ghostmat"
        write_matrix(out / name, k_out.values)
        files.append(name)
        entry = {"regime": regime, "output_spacing": k_out.grid.spacing, "output_points": k_out.grid.n_points}
        if regime != "intermediate":
            analytic = analytic_detection_kernel(params, geom, k_out.grid, flavor)
            peak = float(np.max(np.abs(analytic.values)))
            entry["max_error_vs_closed_form"] = float(np.max(np.abs(np.abs(k_out.values) - np.abs(analytic.values)))) / peak
        results[flavor.value] = entry
        results[flavor.value + "_profile"] = k_out
    manifest["propagation"] = {k: v for k, v in results.items() if not k.endswith("_profile")}
    with open(out / "profile.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["position_m", "pi_intensity", "ps_antidiagonal_abs"])
        kpi = results["phase_insensitive_profile"]
        kps = results["phase_sensitive_profile"]
        n = kps.grid.n_points
        anti = np.abs(kps.values[np.arange(n), (2 * (n // 2) - np.arange(n)) % n])
        for x, a, b in zip(kpi.grid.x, kpi.diagonal, anti if kps.grid.same_as(kpi.grid) else [None] * len(kpi.grid.x)):
            w.writerow([_fmt(x), _fmt(a), _fmt(b)])
    files.append("profile.csv")
    return manifest, files


def _relay_mode(cfg, out: Path):
    params, geom, setup = _params(cfg), _geometry(cfg), _setup(cfg)
    preset = Preset(cfg["source"]["preset"])
    r = cfg["relay"]
    relay = RelayConfig(r["L_R"], r["d1"], r["d2"], r["f"])
    manifest = _common_manifest(cfg, params, geom, setup)
    grid = _image_grid(cfg, params, geom)
    mask = _mask(cfg, grid)
    near = _regime(cfg, params, geom) == "near"
    state = make_source(preset, params, grid if near else _source_grid(cfg, params))
    manifest["classification"] = state.classification.value

    def obj(kernel):
        if kernel is None or near:
            return kernel
        prop = propagate_pi if kernel.flavor is Flavor.PHASE_INSENSITIVE else propagate_ps
        return prop(kernel, geom, out_grid=grid)

    auto = obj(state.auto_kernel)
    pi = auto if state.pi_cross is state.auto_kernel else obj(state.pi_cross)
    ps = obj(state.ps_cross)
    constants = source_constants(state, setup)
    scan = relay_image(auto, mask, relay, geom.k0, setup, constants, pi, ps, bucket_half_width="large")
    direct = ghost_image(auto, mask, setup, constants, pi, ps)
    m = relay.magnification
    order = np.argsort(grid.x / m)
    expected = m**2 * direct.total[order]
    manifest.update({
        "Cn": scan.Cn,
        "Cp": scan.Cp,
        "magnification": m,
        "bucket_half_width": scan.meta["bucket_half_width"],
        "parseval_discrepancy": float(np.max(np.abs(scan.total - expected)) / np.max(np.abs(expected))),
    })
    manifest["psf"] = _psf_block(cfg, scan, None)
    write_scan_csv(out / "scan.csv", scan)
    return manifest, ["scan.csv"]


def _construct_mode(cfg, out: Path):
    c = cfg["construct"]
    prescribed = PrescribedKernels(read_matrix(c["kn_path"]), read_matrix(c["kp_path"]), c["cell_measure"])
    decomp, state, report, err = construct(prescribed, c["tol"])
    from .construction import reconstruct_cross_correlations

    kn, kp = reconstruct_cross_correlations(state, decomp)
    write_matrix(out / "kn_reconstructed.ghostmat", kn)
    write_matrix(out / "kp_reconstructed.ghostmat", kp)
    with open(out / "modes.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mode", "eta", "mu"])
        for i in range(decomp.n_modes):
            eta = decomp.eta[i] if i < decomp.rank_n else 0.0
            mu = decomp.mu[i] if i < decomp.rank_p else 0.0
            w.writerow([i, _fmt(eta), _fmt(mu)])
    manifest = {
        "version": __version__,
        "config": cfg,
        "reconstruction_error": err,
        "tolerance": c["tol"],
        "classical": report.classical,
        "offending_modes": report.offending_modes,
        "n_modes": decomp.n_modes,
        "rank_pi": decomp.rank_n,
        "rank_ps": decomp.rank_p,
        "rank_deficient": decomp.rank_deficient,
        "truncated": decomp.truncated,
        "total_signal_population": state.total_signal_population,
    }
    return manifest, ["kn_reconstructed.ghostmat", "kp_reconstructed.ghostmat", "modes.csv"]


def run(cfg: dict, out_dir, mode: Optional[str] = None) -> dict:
    """Execute a resolved scenario and write its artifacts into ``out_dir``; returns the manifest."""
    mode = mode or cfg["mode"]
    cfg = copy.deepcopy(cfg)
    cfg["mode"] = mode
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if mode in ("analytic", "numeric"):
        manifest, files = _image_mode(cfg, out, numeric=mode == "numeric")
    elif mode == "contrast":
        manifest, files = _contrast_mode(cfg, out)
    elif mode == "montecarlo":
        manifest, files = _montecarlo_mode(cfg, out)
    elif mode == "propagate":
        manifest, files = _propagate_mode(cfg, out)
    elif mode == "relay":
        manifest, files = _relay_mode(cfg, out)
    elif mode == "construct":
        manifest, files = _construct_mode(cfg, out)
    else:
        raise ConfigError("mode", f"unknown mode {mode!r}")
    manifest["files"] = files + ["manifest.json"]
    (out / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")
    return manifest


# --------------------------------------------------------------------------- comparison


def _load_run(run_dir):
    run_dir = Path(run_dir)
    scan = read_scan_csv(run_dir / "scan.csv")
    manifest_path = run_dir / "manifest.json"
    manifest = json.loads(manifest_path.read_text()) if manifest_path.exists() else {}
    return scan, manifest


def _psf_from(scan, manifest):
    psf = manifest.get("psf") or {}
    if psf.get("psf_e2_radius") is not None:
        return psf["psf_e2_radius"], psf.get("peak_position"), psf.get("envelope_radius")
    try:
        radius, peak = e2_radius(scan["position_m"], scan["pi_term"] + scan["ps_term"])
        return radius, peak, None
    except NoPeak:
        return None, None, None


def compare(run_a, run_b) -> dict:
    """Compare two runs that share a position grid.

    Reports the max and mean pointwise relative difference of ``C_total``,
    the PSF-radius ratio ``a / b``, the peak-position difference (and whether
    the peaks are mirror images), and the field-of-view ratio.
    """
    scan_a, man_a = _load_run(run_a)
    scan_b, man_b = _load_run(run_b)
    xa, xb = scan_a["position_m"], scan_b["position_m"]
    scale = max(float(np.max(np.abs(xa))), float(np.max(np.abs(xb))), 1e-300)
    if xa.shape != xb.shape or np.max(np.abs(xa - xb)) > 1e-9 * scale:
        raise GridMismatch("the two runs use different position grids")
    a, b = scan_a["C_total"], scan_b["C_total"]
    denom = np.maximum(np.abs(a), np.abs(b))
    rel = np.where(denom > 0, np.abs(a - b) / np.where(denom > 0, denom, 1.0), 0.0)
    ra, pa, fa = _psf_from(scan_a, man_a)
    rb, pb, fb = _psf_from(scan_b, man_b)
    spacing = float(xa[1] - xa[0])
    report = {
        "max_relative_difference": float(rel.max()),
        "mean_relative_difference": float(rel.mean()),
        "psf_ratio": None if not (ra and rb) else ra / rb,
        "peak_position_a": pa,
        "peak_position_b": pb,
        "peak_position_difference": None if pa is None or pb is None else pa - pb,
        "peaks_mirrored": None if pa is None or pb is None else bool(abs(pa + pb) <= spacing and abs(pa) > spacing),
        "fov_ratio": None if not (fa and fb) else fa / fb,
    }
    return report
