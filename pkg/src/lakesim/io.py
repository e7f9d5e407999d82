"""Snapshot, monitor and study-report writers (CSV + JSON manifest).

Floats are written with %.17g so that re-reading reproduces the binary
values exactly; the `diag` command relies on this for bit-identical
monitor recomputation.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os

import numpy as np

FLOAT_FMT = "%.17g"


def _fmt(x):
    return FLOAT_FMT % float(x)


def write_snapshot(path, domain, state):
    """Cell rows x, y, omega, h, H, u, v (h averaged from nodes)."""
    g = domain.grid
    xc, yc = np.meshgrid(g.xc, g.yc, indexing="ij")
    hn = state.h
    h_cells = 0.25 * (hn[:-1, :-1] + hn[1:, :-1] + hn[:-1, 1:] + hn[1:, 1:])
    ii, jj = np.nonzero(domain.mask)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["x", "y", "omega", "h", "H", "u", "v"])
        for i, j in zip(ii, jj):
            w.writerow([_fmt(xc[i, j]), _fmt(yc[i, j]),
                        _fmt(state.omega[i, j]), _fmt(h_cells[i, j]),
                        _fmt(state.H[i, j]),
                        _fmt(state.velocity.cell[i, j, 0]),
                        _fmt(state.velocity.cell[i, j, 1])])


def write_boundary_snapshot(path, domain, state, a_arc):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["s", "x", "y", "a", "omega_bc"])
        b = domain.boundary
        for k in range(b.m):
            w.writerow([_fmt(b.s[k]), _fmt(b.xy[k, 0]), _fmt(b.xy[k, 1]),
                        _fmt(a_arc[k]), _fmt(state.omega_bc[k])])


def read_snapshot(path):
    """Columns of a snapshot file as a dict of float arrays."""
    with open(path, newline="") as f:
        r = csv.reader(f)
        header = next(r)
        cols = {name: [] for name in header}
        for row in r:
            for name, val in zip(header, row):
                cols[name].append(float(val))
    return {k: np.asarray(v) for k, v in cols.items()}


def restore_cell_field(domain, xs, ys, values):
    """Scatter snapshot rows back onto the masked cell grid."""
    g = domain.grid
    i = np.rint((xs - g.x0) / g.dx - 0.5).astype(np.intp)
    j = np.rint((ys - g.y0) / g.dx - 0.5).astype(np.intp)
    out = np.zeros((g.n, g.n))
    out[i, j] = values
    return out


def write_monitor_csv(path, columns):
    """columns: ordered dict name -> sequence (equal lengths)."""
    names = list(columns)
    rows = zip(*[columns[n] for n in names])
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(names)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (int, float, np.floating))
                        else str(v) for v in row])


def read_monitor_csv(path):
    return read_snapshot(path)


def config_hash(text):
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def write_manifest(directory, meta, complete):
    meta = dict(meta)
    meta["complete"] = bool(complete)
    meta["files"] = sorted(fn for fn in os.listdir(directory)
                           if fn != "MANIFEST.json")
    with open(os.path.join(directory, "MANIFEST.json"), "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")


def write_study_csv(path, param_name, report):
    """One row per run: parameter, sup/norm columns, pairwise differences."""
    params = report[param_name]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        norm_key = "sup_omega" if "sup_omega" in report else "linf_lp"
        extra = ["gronwall_bound"] if "gronwall_bound" in report else []
        w.writerow([param_name, norm_key, "pairwise_l2_to_next"] + extra)
        for k, p in enumerate(params):
            diff = report["pairwise_l2"][k] if k < len(params) - 1 else ""
            row = [_fmt(p), _fmt(report[norm_key][k]),
                   _fmt(diff) if diff != "" else ""]
            for e in extra:
                row.append(_fmt(report[e][k]))
            w.writerow(row)
