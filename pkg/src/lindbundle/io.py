"""CSV and manifest writers.

Column order is part of the contract:

* trajectory: ``t,energy,position,purity``
* statistics: ``t,rmse,bias,std``
* scaling: ``N,N_B,mode,seconds_per_step``

Floats are written with 17 significant digits so values round-trip.
"""

from __future__ import annotations

import csv
import json
import platform
from importlib import metadata
from pathlib import Path

import numpy as np

TRAJECTORY_COLUMNS = ("t", "energy", "position", "purity")
STATS_COLUMNS = ("t", "rmse", "bias", "std")
SCALING_COLUMNS = ("N", "N_B", "mode", "seconds_per_step")
CONVERGENCE_COLUMNS = ("s", "M", "mode", "observable", "max_rmse", "t_max", "bias_at_max", "std_at_max")
FIT_COLUMNS = ("s", "mode", "observable", "exponent", "prefactor", "r_squared")


def fmt(v) -> str:
    if isinstance(v, (str, bool)):
        return str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_rows(path, columns, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def write_trajectory(path, traj) -> Path:
    rows = zip(traj.times, traj.energy, traj.position, traj.purity)
    return write_rows(path, TRAJECTORY_COLUMNS, rows)


def write_stats(path, stats) -> Path:
    return write_rows(path, STATS_COLUMNS, zip(stats.times, stats.rmse, stats.bias, stats.std))


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [row for row in r]


def read_trajectory(path) -> dict[str, np.ndarray]:
    header, rows = read_csv(path)
    if tuple(header) != TRAJECTORY_COLUMNS:
        raise ValueError(f"{path}: unexpected columns {header}")
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def software_versions() -> dict:
    out = {"python": platform.python_version()}
    for pkg in ("artifact", "numpy", "scipy"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def write_manifest(path, manifest: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")
