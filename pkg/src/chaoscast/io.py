"""CSV and JSON readers/writers for trajectories, losses and forecasts.

Floats are written with ``repr`` so every value round-trips exactly.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .dde import Trajectory


def write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def read_csv(path) -> dict[str, np.ndarray]:
    """Column name -> float array."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def write_trajectory(path, traj: Trajectory) -> None:
    write_csv(path, ["t", "truth", "observed"], zip(traj.times, traj.truth, traj.observed))


def read_trajectory(path, sigma: float, delta_t: float | None = None) -> Trajectory:
    cols = read_csv(path)
    t = cols["t"]
    if delta_t is None:
        delta_t = float(t[1] - t[0])
    return Trajectory(t0=float(t[0]), delta_t=delta_t, truth=cols["truth"], observed=cols["observed"], sigma=sigma)


def write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())
