"""CSV export with a fixed, diffable format.

All floats are written with 17 significant digits; the +inf sentinel is
emitted literally as ``inf``.  Node ordering is the producing grid's
row-major order, so repeated runs are byte-identical.
"""

from __future__ import annotations

import numpy as np

from .common import fmt17
from .dynamics import Trajectory
from .epi_hj import GridFunction, HJReport
from .kernels import GridSpec, TimeField


def _write_rows(path, header, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt17(v) for v in row) + "\n")


def write_trajectory(path, traj: Trajectory):
    header = ["t"] + [f"x{i+1}" for i in range(traj.dim)]
    rows = (np.concatenate([[t], x]) for t, x in zip(traj.times, traj.states))
    _write_rows(path, header, rows)


def write_timefield(path, tf: TimeField):
    nodes = tf.grid.nodes()
    header = [f"x{i+1}" for i in range(tf.grid.dim)] + ["value"]
    rows = (np.concatenate([x, [v]]) for x, v in zip(nodes, tf.values))
    _write_rows(path, header, rows)


def write_boolfield(path, grid: GridSpec, mask):
    nodes = grid.nodes()
    header = [f"x{i+1}" for i in range(grid.dim)] + ["member"]
    rows = (np.concatenate([x, [1.0 if m else 0.0]]) for x, m in zip(nodes, mask))
    _write_rows(path, header, rows)


def write_points(path, points):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    header = [f"x{i+1}" for i in range(points.shape[1])]
    _write_rows(path, header, points)


def write_values(path, xs, values, label: str = "value"):
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    header = [f"x{i+1}" for i in range(xs.shape[1])] + [label]
    rows = (np.concatenate([x, [v]]) for x, v in zip(xs, values))
    _write_rows(path, header, rows)


def write_gridfunction(path, gf: GridFunction):
    write_values(path, gf.grid.nodes(), gf.values)


def write_hj_report(path, report: HJReport):
    dim = report.samples.shape[1]
    header = [f"x{i+1}" for i in range(dim)] + \
        ["residual_fwd", "residual_bwd", "complementarity"]
    rows = (np.concatenate([x, [f, b, c]]) for x, f, b, c in
            zip(report.samples, report.residual_fwd, report.residual_bwd,
                report.complementarity))
    _write_rows(path, header, rows)


def write_graphcloud(path, cloud):
    n, p = cloud.state_dim, cloud.out_dim
    header = ["t"] + [f"x{i+1}" for i in range(n)] + [f"y{i+1}" for i in range(p)]
    _write_rows(path, header, cloud.points)


def write_solution_field(path, ts, xs, us):
    """Rows (t, x..., u...) of a solution sampled on an evaluation lattice."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    us = np.atleast_2d(np.asarray(us, dtype=float))
    header = ["t"] + [f"x{i+1}" for i in range(xs.shape[1])] + \
        [f"u{i+1}" for i in range(us.shape[1])]
    rows = (np.concatenate([[t], x, u]) for t, x, u in zip(ts, xs, us))
    _write_rows(path, header, rows)
