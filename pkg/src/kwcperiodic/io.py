"""Serialization: JSON reports, CSV time series, binary field snapshots.

Snapshots are flat files of 8-byte little-endian floats in row-major order,
shape ``(m + 1, *grid.shape)``, with a JSON sidecar describing the layout.
"""
import csv
import json
import math
from pathlib import Path

import numpy as np

from .grid import total_variation
from .periodic import x_value

CSV_COLUMNS = ("step", "energy", "X", "TV", "eta_residual", "theta_residual",
               "dissipation_lhs", "dissipation_rhs")


def to_jsonable(obj):
    """Recursively convert numpy values; non-finite floats become ``None``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def _write_text(path, text):
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def trajectory_rows(traj, R_star):
    """One record per state (``m + 1`` in total); step 0 has no solver data."""
    s, p, grid = traj.scheme, traj.model, traj.grid
    energies = traj.energies()
    rows = []
    for i, st in enumerate(traj.states):
        d = traj.diagnostics[i - 1] if i > 0 else None
        rows.append({
            "step": i,
            "energy": float(energies[i]),
            "X": float(x_value(grid, st, R_star, p.kappa, s.tau)),
            "TV": float(total_variation(grid, st.theta)),
            "eta_residual": d.eta_residual if d else math.nan,
            "theta_residual": d.theta_residual if d else math.nan,
            "dissipation_lhs": d.dissipation_lhs if d else math.nan,
            "dissipation_rhs": d.dissipation_rhs if d else math.nan,
        })
    return rows


def write_csv(path, rows):
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            writer.writeheader()
            for row in rows:
                writer.writerow({k: ("" if isinstance(v, float) and math.isnan(v) else repr(v))
                                 for k, v in row.items()})
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def read_csv(path):
    with open(path, newline="") as fh:
        return [{k: (float(v) if v != "" else math.nan) for k, v in row.items()}
                for row in csv.DictReader(fh)]


def write_snapshot(path, field, grid, name):
    """Write ``field`` (any shape) to ``path`` plus ``<path>.json``; returns the sidecar path."""
    path = Path(path)
    arr = np.ascontiguousarray(field, dtype="<f8")
    try:
        arr.tofile(path)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    sidecar = path.with_name(path.name + ".json")
    meta = {
        "field": name,
        "file": path.name,
        "dtype": "<f8",
        "order": "C",
        "shape": list(arr.shape),
        "grid": {"cells": list(grid.cells), "spacing": list(grid.spacing),
                 "extents": list(grid.extents)},
    }
    _write_text(sidecar, json.dumps(meta, indent=2))
    return sidecar


def read_snapshot(sidecar):
    sidecar = Path(sidecar)
    meta = json.loads(sidecar.read_text())
    data = np.fromfile(sidecar.with_name(meta["file"]), dtype=meta["dtype"])
    return data.reshape(meta["shape"], order=meta["order"])


def write_reports(outputs, out_dir, snapshots=False):
    """Write everything in ``outputs`` under ``out_dir``; returns the list of paths.

    ``outputs`` holds ``command``, ``config_hash``, ``report`` (a mapping),
    and optionally ``trajectory`` and ``R_star`` for the time series.  File
    names are ``<command>-<hash prefix>.<ext>``.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out_dir}: {exc}") from exc
    stem = f"{outputs['command']}-{outputs['config_hash'][:12]}"
    written = []
    traj = outputs.get("trajectory")
    report = dict(outputs.get("report", {}))
    report["config_hash"] = outputs["config_hash"]
    if traj is not None:
        rows = trajectory_rows(traj, outputs.get("R_star", 0.0))
        report["trajectory"] = {"steps": len(rows), "records": rows}
        csv_path = out_dir / f"{stem}.csv"
        write_csv(csv_path, rows)
        written.append(csv_path)
        if snapshots:
            for name, data in (("eta", traj.eta), ("theta", traj.theta)):
                bin_path = out_dir / f"{stem}-{name}.f8"
                written += [bin_path, write_snapshot(bin_path, data, traj.grid, name)]
    json_path = out_dir / f"{stem}.json"
    _write_text(json_path, json.dumps(to_jsonable(report), indent=2, sort_keys=True))
    written.insert(0, json_path)
    if "plot_data" in outputs:
        plot_path = out_dir / f"{stem}-plot.json"
        _write_text(plot_path, json.dumps(to_jsonable(outputs["plot_data"]), indent=2))
        written.append(plot_path)
    return written
