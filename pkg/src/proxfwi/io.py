"""Binary model/data files with JSON sidecar headers, and run logs.

Model file
    raw little-endian float64, z fastest (``iz + nz*ix``); header
    ``{"nz", "nx", "h", "units"}`` in ``<stem>.json`` next to it.
Data file
    raw little-endian float64 with real and imaginary parts interleaved,
    ordered frequency, receiver, source (source fastest); header
    ``{"n_recv", "n_src", "omegas"}``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import astuple, fields
from pathlib import Path

import numpy as np

from .helmholtz import FrequencyData, Grid, GridModel2D
from .pqn import IterationRecord

__all__ = [
    "CSV_HEADER",
    "header_path",
    "write_model",
    "read_model",
    "write_data",
    "read_data",
    "write_trace_csv",
    "read_trace_csv",
]

CSV_HEADER = [f.name for f in fields(IterationRecord)]
MODEL_UNITS = "s^2/m^2"


def header_path(path):
    return Path(path).with_suffix(".json")


def _write_header(path, header):
    header_path(path).write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")


def _read_header(path, keys):
    hp = header_path(path)
    header = json.loads(hp.read_text())
    missing = [k for k in keys if k not in header]
    if missing:
        raise ValueError(f"{hp}: header lacks {missing}")
    return header


def write_model(path, model):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    model.m.astype("<f8").tofile(path)
    g = model.grid
    _write_header(path, {"nz": g.nz, "nx": g.nx, "h": g.h, "units": MODEL_UNITS})
    return path


def read_model(path, sponge_width=10, sponge_gamma=1.0):
    """Load a model file. Headers with ``units == "m/s"`` hold velocities."""
    path = Path(path)
    header = _read_header(path, ("nz", "nx", "h", "units"))
    grid = Grid(int(header["nz"]), int(header["nx"]), float(header["h"]), sponge_width, sponge_gamma)
    values = np.fromfile(path, dtype="<f8")
    if values.size != grid.size:
        raise ValueError(f"{path}: {values.size} values, header implies {grid.size}")
    units = header["units"]
    if units == MODEL_UNITS:
        return GridModel2D(grid, values.astype(float))
    if units == "m/s":
        return GridModel2D.from_velocity(grid, values)
    raise ValueError(f"{path}: unsupported units {units!r}")


def write_data(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    v = np.ascontiguousarray(data.values, dtype=np.complex128)
    v.view(np.float64).astype("<f8").tofile(path)
    _write_header(path, {"n_recv": data.n_recv, "n_src": data.n_src, "omegas": [float(w) for w in data.omegas]})
    return path


def read_data(path):
    path = Path(path)
    header = _read_header(path, ("n_recv", "n_src", "omegas"))
    omegas = np.asarray(header["omegas"], dtype=float)
    raw = np.fromfile(path, dtype="<f8")
    shape = (len(omegas), int(header["n_recv"]), int(header["n_src"]))
    if raw.size != 2 * np.prod(shape):
        raise ValueError(f"{path}: {raw.size} floats, header implies {2 * np.prod(shape)}")
    values = (raw[0::2] + 1j * raw[1::2]).reshape(shape)
    return FrequencyData(omegas, values)


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_trace_csv(path, trace, wall_time=True):
    """Write the convergence log; ``wall_time=False`` zeroes ``wall_ms`` for reproducible output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for rec in trace:
            row = list(astuple(rec))
            if not wall_time:
                row[-1] = 0.0
            w.writerow([_fmt(v) for v in row])
    return path


def read_trace_csv(path):
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        IterationRecord(**{k: (int(v) if k in ("iter", "inner_iters", "pde_solves") else float(v)) for k, v in r.items()})
        for r in rows
    ]
