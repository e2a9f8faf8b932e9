"""CSV and VTK serialization of trajectories and sweeps."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .integrator import Trajectory
from .mesh import Mesh, write_vtk_mesh
from .sweeps import SweepResult

__all__ = [
    "TRAJECTORY_COLUMNS",
    "SWEEP_COLUMNS",
    "write_csv",
    "read_csv",
    "write_thresholds_csv",
    "write_fits_csv",
    "write_vtk_snapshot",
]

TRAJECTORY_COLUMNS = ("step", "time", "energy", "dissipation_increment", "identity_residual",
                      "iterations", "max_dev", "min_dev")
SWEEP_COLUMNS = ("mode", "N", "h", "k", "eps", "feasible", "iterations", "linear_iterations",
                 "max_dev", "min_dev")
_TEXT_COLUMNS = ("mode", "fit")
_INT_COLUMNS = ("step", "iterations", "N", "feasible", "linear_iterations", "n_points")


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    if value is None:
        return ""
    return str(value)


def _write_rows(path, header, rows) -> None:
    path = Path(path)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write CSV file {path}: {exc}") from exc


def write_csv(obj, path) -> None:
    """Write a trajectory (one row per step) or a sweep (one row per grid point)."""
    if isinstance(obj, Trajectory):
        rows = ((r.index, r.time, r.energy, r.dissipation_increment, r.identity_residual,
                 r.iterations, r.max_dev, r.min_dev) for r in obj.records)
        _write_rows(path, TRAJECTORY_COLUMNS, rows)
    elif isinstance(obj, SweepResult):
        rows = ((p.mode, p.N, p.h, p.k, p.eps, p.feasible, p.iterations, p.linear_iterations,
                 p.max_dev, p.min_dev) for p in obj.points)
        _write_rows(path, SWEEP_COLUMNS, rows)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__} to CSV")


def write_thresholds_csv(sweep: SweepResult, path) -> None:
    rows = ((mode, t.N, t.h, t.k_feasible, t.k_infeasible, t.k_thresh)
            for (mode, _), t in sorted(sweep.thresholds.items()))
    _write_rows(path, ("mode", "N", "h", "k_feasible", "k_infeasible", "k_thresh"), rows)


def write_fits_csv(sweep: SweepResult, path) -> None:
    rows = ((" ".join(str(part) for part in key), f.slope, f.intercept, f.residual, f.n_points)
            for key, f in sweep.fits.items())
    _write_rows(path, ("fit", "slope", "intercept", "rms_log_residual", "n_points"), rows)


def read_csv(path) -> list[dict]:
    """Read a CSV written by this module; numeric columns become int or float."""
    out = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            parsed = {}
            for key, value in row.items():
                if key in _TEXT_COLUMNS or value == "":
                    parsed[key] = value
                elif key in _INT_COLUMNS:
                    parsed[key] = int(value)
                else:
                    parsed[key] = float(value)
            out.append(parsed)
    return out


def write_vtk_snapshot(mesh: Mesh, m, path, title: str = "magnetization") -> None:
    """Legacy ASCII VTK grid with the nodal field as point vectors ``m``."""
    write_vtk_mesh(mesh, path, point_vectors={"m": m}, title=title)
