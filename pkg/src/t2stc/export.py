"""Trajectory CSV files.

Wide format has one row per sample with the columns in :data:`CSV_COLUMNS`.
Long format has ``t,column,value`` rows, which suits plotting tools that
group by a key column.
"""

from __future__ import annotations

import csv
import os

import numpy as np

from .sim import Trajectory

CSV_COLUMNS = ("t", "x1", "x2", "x1_meas", "x2_meas", "yd", "yd_dot", "e1", "e2", "s", "u",
               "norm_thf", "norm_th1", "norm_th2")


def _fmt(v: float) -> str:
    return "%.17g" % v


def trajectory_table(traj: Trajectory) -> np.ndarray:
    """``(N, 14)`` array in :data:`CSV_COLUMNS` order (first two state channels)."""
    if traj.x.shape[1] < 2:
        raise ValueError("CSV layout needs at least two state channels")
    return np.column_stack([
        traj.t, traj.x[:, 0], traj.x[:, 1], traj.x_meas[:, 0], traj.x_meas[:, 1],
        traj.yd, traj.yd_dot, traj.e[:, 0], traj.e[:, 1], traj.s, traj.u,
        traj.theta_norms[:, 0], traj.theta_norms[:, 1], traj.theta_norms[:, 2],
    ]) if len(traj) else np.zeros((0, len(CSV_COLUMNS)))


def write_csv(traj: Trajectory, path, long_format: bool = False) -> None:
    """Write ``traj``; every value keeps 17 significant digits so it parses back exactly."""
    table = trajectory_table(traj)
    parent = os.path.dirname(os.fspath(path))
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", newline="") as fh:
        if long_format:
            fh.write("t,column,value\n")
            for row in table:
                t = _fmt(row[0])
                for name, v in zip(CSV_COLUMNS[1:], row[1:]):
                    fh.write(f"{t},{name},{_fmt(v)}\n")
        else:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for row in table:
                fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_csv(path) -> dict[str, np.ndarray]:
    """Columns of a wide-format trajectory CSV."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected header {header}")
        rows = [[float(v) for v in r] for r in reader]
    data = np.array(rows, dtype=float).reshape(-1, len(CSV_COLUMNS))
    return {name: data[:, i] for i, name in enumerate(CSV_COLUMNS)}
