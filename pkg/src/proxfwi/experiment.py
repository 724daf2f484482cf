"""Synthetic models and data, and end-to-end inversion runs.

An experiment is described by a JSON config (see :data:`CONFIG_SCHEMA`):
a synthetic or file model, an acquisition layout, frequencies, the
penalty/regularizer/transform triple, solver options, a noise model and a
seed. :func:`run_experiment` writes the true, initial and final models, the
observed data, a convergence CSV, a config echo and a summary JSON.
"""

from __future__ import annotations

import copy
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np
from scipy.ndimage import gaussian_filter

from . import io
from .helmholtz import AcquisitionGeometry, FrequencyData, Grid, GridModel2D, predict_data
from .objective import CompositeProblem
from .penalties import make_penalty
from .pqn import SolverConfig, minimize
from .regularizers import make_regularizer
from .transforms import make_transform

__all__ = [
    "CONFIG_SCHEMA",
    "DEFAULT_CONFIG",
    "SUMMARY_KEYS",
    "ConfigError",
    "ExperimentConfig",
    "RunArtifacts",
    "load_config",
    "synth_model",
    "synth_data",
    "build_geometry",
    "initial_model",
    "run_experiment",
]

log = logging.getLogger(__name__)

V_MIN, V_MAX = 1500.0, 4500.0

SUMMARY_KEYS = (
    "status",
    "converged",
    "outer_iterations",
    "initial_phi",
    "final_phi",
    "best_phi",
    "initial_ls_residual",
    "final_ls_residual",
    "initial_model_rmse",
    "final_model_rmse",
    "final_model_rel_error",
    "zero_coefficients",
    "pde_solves",
    "skipped_pairs",
    "wall_time_s",
)

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_idx_list = {"type": "array", "items": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2}}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "model": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["layered", "file"]},
                "nz": {"type": "integer", "minimum": 8},
                "nx": {"type": "integer", "minimum": 8},
                "h": _pos,
                "path": {"type": "string"},
                "layers": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "properties": {"top": {"type": "integer", "minimum": 0}, "v": _pos},
                        "required": ["top", "v"],
                        "additionalProperties": False,
                    },
                },
                "blobs": {
                    "type": "object",
                    "properties": {
                        "count": {"type": "integer", "minimum": 0},
                        "amplitude": _num,
                        "radius": _pos,
                    },
                    "additionalProperties": False,
                },
                "sponge_width": {"type": "integer", "minimum": 0},
                "sponge_gamma": {"type": "number", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "geometry": {
            "type": "object",
            "properties": {
                "sources": {"oneOf": [_idx_list, {"type": "object"}]},
                "receivers": {"oneOf": [_idx_list, {"type": "object"}]},
                "frequencies_hz": {"type": "array", "items": _pos, "minItems": 1},
                "omegas": {"type": "array", "items": _pos, "minItems": 1},
            },
            "additionalProperties": False,
        },
        "penalty": {
            "type": "object",
            "properties": {"kind": {"enum": ["ls", "huber", "student_t"]}, "kappa": _pos, "nu": _pos},
            "required": ["kind"],
            "additionalProperties": False,
        },
        "regularizer": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["zero", "box", "l1", "l1_ball", "tv1d", "tv2d"]},
                "lam": {"type": "number", "minimum": 0},
                "tau": _pos,
                "tau_from_start": {"type": "number", "exclusiveMinimum": 0},
                "lo": {"type": ["number", "array"]},
                "hi": {"type": ["number", "array"]},
                "max_iter": {"type": "integer", "minimum": 1},
                "tol": _pos,
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
        "transform": {
            "type": "object",
            "properties": {"kind": {"enum": ["identity", "haar"]}, "levels": {"type": "integer", "minimum": 1}},
            "required": ["kind"],
            "additionalProperties": False,
        },
        "solver": {"type": "object"},
        "noise": {
            "type": "object",
            "properties": {
                "snr_db": {"type": ["number", "null"]},
                "outlier_fraction": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "outlier_amplitude": _pos,
            },
            "additionalProperties": False,
        },
        "start": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["blur", "file", "run", "true"]},
                "sigma": {"type": "number", "minimum": 0},
                "path": {"type": "string"},
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
        "model_scale": {"oneOf": [_pos, {"const": "auto"}]},
        "velocity_bounds": {"type": "array", "items": _pos, "minItems": 2, "maxItems": 2},
        "freq_weights": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "threads": {"type": "integer", "minimum": 1},
        "record_wall_time": {"type": "boolean"},
        "output_dir": {"type": "string"},
    },
}

DEFAULT_CONFIG = {
    "model": {
        "kind": "layered",
        "nz": 32,
        "nx": 32,
        "h": 10.0,
        "layers": [{"top": 0, "v": 2000.0}, {"top": 16, "v": 2500.0}],
        "sponge_width": 6,
        "sponge_gamma": 1.0,
    },
    "geometry": {
        "sources": {"row": "top", "count": 4},
        "receivers": {"rows": ["top", "bottom"]},
        "frequencies_hz": [4.0, 6.0, 8.0],
    },
    "penalty": {"kind": "ls"},
    "regularizer": {"kind": "zero"},
    "transform": {"kind": "identity"},
    "solver": {"max_iter": 25},
    "noise": {"snr_db": None, "outlier_fraction": 0.0, "outlier_amplitude": 5.0},
    "start": {"kind": "blur", "sigma": 3.0},
    "model_scale": "auto",
    "seed": 0,
    "threads": 1,
    "record_wall_time": False,
    "output_dir": "run",
}


class ConfigError(ValueError):
    """Config failed validation; ``errors`` lists ``(field_path, message)`` pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{p or '<root>'}: {m}" for p, m in self.errors))


def _merge(base, override):
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("regularizer", "penalty", "transform", "start"):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class ExperimentConfig:
    """Validated experiment description (defaults filled in)."""

    raw: dict

    def __getitem__(self, key):
        return self.raw[key]

    @classmethod
    def from_dict(cls, d):
        validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
        errors = sorted(validator.iter_errors(d), key=lambda e: list(e.absolute_path))
        if errors:
            raise ConfigError(("/".join(str(p) for p in e.absolute_path), e.message) for e in errors)
        cfg = _merge(DEFAULT_CONFIG, d)
        model = cfg["model"]
        if model["kind"] == "file" and "path" not in model:
            raise ConfigError([("model/path", "required for file models")])
        try:
            SolverConfig.from_dict(cfg["solver"])
        except (TypeError, ValueError) as exc:
            raise ConfigError([("solver", str(exc))]) from exc
        noise = cfg["noise"]
        if noise.get("snr_db") is not None and not np.isfinite(noise["snr_db"]):
            raise ConfigError([("noise/snr_db", "must be finite")])
        return cls(cfg)

    @property
    def seed(self):
        return int(self.raw["seed"])

    @property
    def solver(self):
        return SolverConfig.from_dict(self.raw["solver"])

    def with_overrides(self, **kw):
        d = copy.deepcopy(self.raw)
        for k, v in kw.items():
            if v is None:
                continue
            if k == "max_iter":
                d["solver"]["max_iter"] = v
            else:
                d[k] = v
        return ExperimentConfig.from_dict(d)


def load_config(path, **overrides):
    with open(path) as fh:
        d = json.load(fh)
    cfg = ExperimentConfig.from_dict(d)
    return cfg.with_overrides(**overrides) if overrides else cfg


def _rng(seed, stream):
    return np.random.default_rng([int(seed), stream])


def synth_model(spec, seed=0):
    """Layered velocity model with optional Gaussian anomalies, as squared slowness.

    ``spec["layers"]`` lists ``{"top": iz, "v": m/s}`` (rows from ``top``
    downward get ``v``); ``spec["blobs"] = {"count", "amplitude", "radius"}``
    adds seeded Gaussian velocity perturbations of +/- ``amplitude`` m/s
    and standard deviation ``radius`` cells. Velocities stay in
    [1500, 4500] m/s.
    """
    spec = _merge(DEFAULT_CONFIG["model"], spec)
    grid = Grid(int(spec["nz"]), int(spec["nx"]), float(spec["h"]), int(spec["sponge_width"]), float(spec["sponge_gamma"]))
    layers = sorted(spec["layers"], key=lambda l: l["top"])
    for layer in layers:
        if not V_MIN <= layer["v"] <= V_MAX:
            raise ValueError(f"layer velocity {layer['v']} outside [{V_MIN}, {V_MAX}] m/s")
    v = np.full(grid.shape, float(layers[0]["v"]))
    for layer in layers:
        v[layer["top"] :, :] = layer["v"]
    blobs = spec.get("blobs") or {}
    count = int(blobs.get("count", 0))
    if count:
        rng = _rng(seed, 1)
        amp = float(blobs.get("amplitude", 300.0))
        radius = float(blobs.get("radius", 3.0))
        w = grid.sponge_width
        zz, xx = np.meshgrid(np.arange(grid.nz), np.arange(grid.nx), indexing="ij")
        for _ in range(count):
            cz = rng.uniform(w, grid.nz - 1 - w)
            cx = rng.uniform(w, grid.nx - 1 - w)
            sign = rng.choice([-1.0, 1.0])
            v += sign * amp * np.exp(-((zz - cz) ** 2 + (xx - cx) ** 2) / (2 * radius**2))
        v = np.clip(v, V_MIN, V_MAX)
    return GridModel2D.from_velocity(grid, v)


def _spread(lo, hi, count):
    if count == 1:
        return np.array([(lo + hi) // 2])
    return np.unique(np.round(np.linspace(lo, hi, count)).astype(int))


def _row_index(grid, row):
    w = grid.sponge_width
    if row == "top":
        return w
    if row == "bottom":
        return grid.nz - 1 - w
    return int(row)


def build_geometry(spec, grid):
    """Acquisition from explicit ``[iz, ix]`` lists or row layouts.

    Row layouts: ``{"row": "top"|"bottom"|iz, "count": k}`` spreads ``k``
    points across the interior of that row; ``{"rows": [...]}`` without a
    count uses every interior node of each row.
    """
    w = grid.sponge_width

    def points(s):
        if isinstance(s, list):
            return np.asarray(s, dtype=int)
        rows = s.get("rows", [s.get("row", "top")])
        pts = []
        for row in rows:
            iz = _row_index(grid, row)
            xs = _spread(w, grid.nx - 1 - w, int(s["count"])) if "count" in s else np.arange(w, grid.nx - w)
            pts.extend((iz, ix) for ix in xs)
        return np.asarray(pts, dtype=int)

    if "omegas" in spec:
        omegas = np.asarray(spec["omegas"], dtype=float)
    else:
        omegas = 2 * np.pi * np.asarray(spec["frequencies_hz"], dtype=float)
    geom = AcquisitionGeometry(points(spec["sources"]), points(spec["receivers"]), omegas)
    geom.validate(grid)
    return geom


def synth_data(m_true, geom, noise=None, seed=0, threads=1):
    """Observed data ``D = S H(m_true)^{-1} Q + eps``.

    ``noise["snr_db"]`` adds circular complex Gaussian noise rescaled so
    that, per frequency, ``||D_clean||_F^2 / ||eps||_F^2`` is exactly the
    requested SNR. ``noise["outlier_fraction"] = p`` then replaces
    ``round(p * n)`` distinct entries (chosen uniformly over all
    frequencies) by spikes of modulus ``outlier_amplitude * max|D_clean|``
    (per frequency) with uniform random phase.
    """
    noise = noise or {}
    clean = predict_data(m_true, geom, threads)
    values = clean.values.copy()
    snr = noise.get("snr_db")
    if snr is not None:
        rng = _rng(seed, 2)
        for k in range(values.shape[0]):
            eps = rng.standard_normal(values[k].shape) + 1j * rng.standard_normal(values[k].shape)
            target = np.linalg.norm(clean.values[k]) / np.sqrt(10.0 ** (snr / 10.0))
            values[k] += eps * (target / np.linalg.norm(eps))
    p = float(noise.get("outlier_fraction", 0.0))
    if p > 0:
        rng = _rng(seed, 3)
        n = values.size
        n_bad = int(round(p * n))
        flat = rng.choice(n, size=n_bad, replace=False)
        k_idx = np.unravel_index(flat, values.shape)[0]
        peak = np.abs(clean.values).reshape(len(values), -1).max(axis=1)
        amp = float(noise.get("outlier_amplitude", 5.0)) * peak[k_idx]
        phase = rng.uniform(0.0, 2 * np.pi, size=n_bad)
        values.reshape(-1)[flat] = amp * np.exp(1j * phase)
    return FrequencyData(clean.omegas, values)


def initial_model(spec, m_true):
    kind = spec["kind"]
    grid = m_true.grid
    if kind == "true":
        return GridModel2D(grid, m_true.m.copy())
    if kind == "blur":
        img = gaussian_filter(m_true.as_image(), float(spec.get("sigma", 3.0)), mode="nearest")
        return GridModel2D(grid, img)
    if kind == "file":
        return io.read_model(spec["path"], grid.sponge_width, grid.sponge_gamma)
    if kind == "run":
        return io.read_model(Path(spec["path"]) / "final_model.bin", grid.sponge_width, grid.sponge_gamma)
    raise ValueError(f"unknown start kind {kind!r}")


@dataclass
class RunArtifacts:
    output_dir: Path
    summary: dict
    result: object = None
    files: dict = field(default_factory=dict)

    @property
    def exit_code(self):
        return 3 if self.summary["status"] == "line_search_failed" else 0


def _true_model(cfg):
    spec = cfg["model"]
    if spec["kind"] == "file":
        return io.read_model(spec["path"], int(spec["sponge_width"]), float(spec["sponge_gamma"]))
    return synth_model(spec, cfg.seed)


def build_problem(cfg, m_true=None, data=None, m_start=None):
    """Assemble the :class:`CompositeProblem` and start coefficients for ``cfg``."""
    if not isinstance(cfg, ExperimentConfig):
        cfg = ExperimentConfig.from_dict(cfg)
    m_true = m_true or _true_model(cfg)
    grid = m_true.grid
    geom = build_geometry(cfg["geometry"], grid)
    if data is None:
        data = synth_data(m_true, geom, cfg["noise"], cfg.seed, cfg["threads"])
    m_start = m_start or initial_model(cfg["start"], m_true)
    scale = cfg["model_scale"]
    scale = float(np.mean(m_start.m)) if scale == "auto" else float(scale)
    transform = make_transform(cfg["transform"], grid.shape)
    y0 = transform.adjoint(m_start.m) / scale
    reg_spec = dict(cfg["regularizer"])
    if "tau_from_start" in reg_spec:
        reg_spec["tau"] = reg_spec.pop("tau_from_start") * float(np.abs(y0).sum())
    bounds = None
    if "velocity_bounds" in cfg.raw:
        vlo, vhi = sorted(cfg["velocity_bounds"])
        bounds = (1.0 / vhi**2, 1.0 / vlo**2)
    problem = CompositeProblem(
        grid,
        geom,
        data,
        make_penalty(cfg["penalty"]),
        make_regularizer(reg_spec, grid.shape),
        transform,
        model_scale=scale,
        bounds=bounds,
        freq_weights=cfg.raw.get("freq_weights"),
        threads=int(cfg["threads"]),
    )
    return problem, y0, m_true, m_start


def run_experiment(cfg, write=True):
    """Run one configured inversion and (optionally) write its artifacts."""
    if not isinstance(cfg, ExperimentConfig):
        cfg = ExperimentConfig.from_dict(cfg)
    t0 = time.perf_counter()
    problem, y0, m_true, m_start = build_problem(cfg)
    result = minimize(problem, y0, cfg.solver)
    m_final = GridModel2D(m_true.grid, problem.to_model(result.y))

    def rmse(m):
        return float(np.sqrt(np.mean((m - m_true.m) ** 2)))

    trace = result.trace
    summary = {
        "status": result.status,
        "converged": result.converged,
        "outer_iterations": len(trace) - 1,
        "initial_phi": trace[0].phi,
        "final_phi": trace[-1].phi,
        "best_phi": result.best_phi,
        "initial_ls_residual": trace[0].ls_residual,
        "final_ls_residual": trace[-1].ls_residual,
        "initial_model_rmse": rmse(m_start.m),
        "final_model_rmse": rmse(m_final.m),
        "final_model_rel_error": float(np.linalg.norm(m_final.m - m_true.m) / np.linalg.norm(m_true.m)),
        "zero_coefficients": int(np.count_nonzero(result.y == 0)),
        "pde_solves": trace[-1].pde_solves,
        "skipped_pairs": result.n_skipped_pairs,
        "wall_time_s": time.perf_counter() - t0,
    }
    art = RunArtifacts(Path(cfg["output_dir"]), summary, result)
    if write:
        out = art.output_dir
        out.mkdir(parents=True, exist_ok=True)
        art.files = {
            "true_model": io.write_model(out / "true_model.bin", m_true),
            "initial_model": io.write_model(out / "initial_model.bin", m_start),
            "final_model": io.write_model(out / "final_model.bin", m_final),
            "data": io.write_data(out / "data.bin", problem.data),
            "convergence": io.write_trace_csv(out / "convergence.csv", trace, cfg["record_wall_time"]),
        }
        (out / "config.json").write_text(json.dumps(cfg.raw, indent=2, sort_keys=True) + "\n")
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
        art.files["config"] = out / "config.json"
        art.files["summary"] = out / "summary.json"
    log.info("run finished: %s", summary)
    return art
