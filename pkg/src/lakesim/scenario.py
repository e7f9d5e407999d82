"""Scenario data: physical fields on the grid and their regularization.

A scenario bundles the bathymetry b, boundary through-flow a, slip
coefficients alpha/eta, friction kappa, interior source A, forcing curl
rot(G/b) and the initial vorticity, each accepted as a constant, an array
already on the right mesh, or a callable of (x, y) / (s,) with an optional
trailing time argument.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from scipy import ndimage

from .geometry import Domain


def _cell_eval(domain, spec, t):
    g = domain.grid
    xc, yc = np.meshgrid(g.xc, g.yc, indexing="ij")
    if callable(spec):
        try:
            out = spec(xc, yc, t)
        except TypeError:
            out = spec(xc, yc)
        return np.broadcast_to(np.asarray(out, dtype=float), xc.shape).copy()
    arr = np.asarray(spec, dtype=float)
    if arr.ndim == 0:
        return np.full(xc.shape, float(arr))
    return arr.copy()


def _arc_eval(domain, spec, t):
    s = domain.boundary.s
    xy = domain.boundary.xy
    if callable(spec):
        try:
            out = spec(s, t)
        except TypeError:
            out = spec(s)
        return np.broadcast_to(np.asarray(out, dtype=float), s.shape).copy()
    arr = np.asarray(spec, dtype=float)
    if arr.ndim == 0:
        return np.full(s.shape, float(arr))
    return arr.copy()


@dataclasses.dataclass
class ScenarioData:
    """Materialized scenario fields over a fixed domain.

    Time-dependent data are stored as evaluator closures; static data are
    evaluated once.  ``rotGb`` is rot(G/b) at cell centers (supplied
    directly or derived from G by the factory).
    """

    domain: Domain
    b_cells: np.ndarray
    b_nodes: np.ndarray
    b_arc: np.ndarray
    omega0: np.ndarray
    p: float
    _a: object
    _alpha: object
    _eta: object
    _kappa: object
    _A: object
    _rotGb: object

    def a_at(self, t):
        return _arc_eval(self.domain, self._a, t)

    def alpha_at(self, t):
        return _arc_eval(self.domain, self._alpha, t)

    def eta_at(self, t):
        return _arc_eval(self.domain, self._eta, t)

    def kappa_at(self, t):
        return np.where(self.domain.mask, _cell_eval(self.domain, self._kappa, t), 0.0)

    def A_at(self, t):
        return np.where(self.domain.mask, _cell_eval(self.domain, self._A, t), 0.0)

    def rotGb_at(self, t):
        return np.where(self.domain.mask, _cell_eval(self.domain, self._rotGb, t), 0.0)


def make_scenario(domain, b=1.0, a=0.0, alpha=0.0, eta=0.0, kappa=0.0,
                  A=0.0, G=None, rotGb=None, omega0=0.0, p=2.0):
    """Build ScenarioData; b must be strictly positive and static."""
    from .transport import rot_over_b

    b_cells = _cell_eval(domain, b, 0.0)
    if np.any(b_cells[domain.mask] <= 0):
        raise ValueError("bathymetry b must be strictly positive on the domain")
    g = domain.grid
    xn, yn = np.meshgrid(g.xn, g.yn, indexing="ij")
    if callable(b):
        try:
            b_nodes = np.asarray(b(xn, yn, 0.0), dtype=float)
        except TypeError:
            b_nodes = np.asarray(b(xn, yn), dtype=float)
        b_nodes = np.broadcast_to(b_nodes, xn.shape).copy()
    elif np.ndim(b) == 0:
        b_nodes = np.full(xn.shape, float(b))
    else:
        b_nodes = _cells_to_nodes(domain, b_cells, fill=float(np.mean(b_cells)))
    xy = domain.boundary.xy
    if callable(b):
        try:
            b_arc = np.broadcast_to(np.asarray(
                b(xy[:, 0], xy[:, 1], 0.0), dtype=float), xy[:, 0].shape).copy()
        except TypeError:
            b_arc = np.broadcast_to(np.asarray(
                b(xy[:, 0], xy[:, 1]), dtype=float), xy[:, 0].shape).copy()
    elif np.ndim(b) == 0:
        b_arc = np.full(domain.boundary.m, float(b))
    else:
        from .geometry import interp_cell_field
        b_arc = interp_cell_field(domain, b_cells, xy)

    if rotGb is None and G is not None:
        # G given as a pair of component specs (each constant/array/callable)
        Gx = _cell_eval(domain, G[0], 0.0)
        Gy = _cell_eval(domain, G[1], 0.0)
        Gc = np.stack([Gx, Gy], axis=-1)
        rotGb = rot_over_b(domain, Gc, b_cells)
    elif rotGb is None:
        rotGb = 0.0

    om0 = np.where(domain.mask, _cell_eval(domain, omega0, 0.0), 0.0)
    return ScenarioData(domain=domain, b_cells=b_cells, b_nodes=b_nodes,
                        b_arc=b_arc, omega0=om0, p=float(p), _a=a,
                        _alpha=alpha, _eta=eta, _kappa=kappa, _A=A,
                        _rotGb=rotGb)


def _cells_to_nodes(domain, f_cells, fill=0.0):
    """Average of adjacent interior cells at each node (fill if none)."""
    n = domain.grid.n
    m = domain.mask.astype(float)
    fm = np.where(domain.mask, f_cells, 0.0)
    acc = np.zeros((n + 1, n + 1))
    cnt = np.zeros((n + 1, n + 1))
    for di in (0, 1):
        for dj in (0, 1):
            acc[di:n + di, dj:n + dj] += fm
            cnt[di:n + di, dj:n + dj] += m
    out = np.full((n + 1, n + 1), float(fill))
    nz = cnt > 0
    out[nz] = acc[nz] / cnt[nz]
    return out


# ---------------------------------------------------------------------------
# mollification


def mollify_data(domain, f, theta, mode="interior"):
    """Tent-kernel smoothing at scale theta.

    ``mode='interior'`` smooths a cell field with a mass-normalized
    (separable) tent kernel of radius theta, renormalized over interior
    cells so constants are preserved.  ``mode='initial'`` additionally
    ramps the result to zero inside the boundary tube d(x) < theta.
    ``mode='boundary'`` smooths an arc field along the (periodic) boundary;
    the accompanying time ramp for boundary data is `time_ramp`.
    """
    if theta <= 0:
        raise ValueError("smoothing scale theta must be positive")
    if mode == "boundary":
        f = np.asarray(f, dtype=float)
        ds = domain.boundary.length / domain.boundary.m
        r = max(1, int(round(theta / ds)))
        w = 1.0 - np.abs(np.arange(-r, r + 1)) / (r + 1)
        w /= w.sum()
        return ndimage.convolve1d(f, w, mode="wrap")
    if mode not in ("interior", "initial"):
        raise ValueError("mode must be interior, boundary or initial")
    f = np.asarray(f, dtype=float)
    dx = domain.grid.dx
    r = int(round(theta / dx))
    if r < 1:
        import warnings
        warnings.warn("smoothing scale below grid spacing; returning input")
        sm = np.where(domain.mask, f, 0.0)
    else:
        w = 1.0 - np.abs(np.arange(-r, r + 1)) / (r + 1)
        mask = domain.mask.astype(float)
        fm = np.where(domain.mask, f, 0.0)
        num = ndimage.convolve1d(ndimage.convolve1d(fm, w, axis=0, mode="constant"),
                                 w, axis=1, mode="constant")
        den = ndimage.convolve1d(ndimage.convolve1d(mask, w, axis=0, mode="constant"),
                                 w, axis=1, mode="constant")
        sm = np.zeros_like(f)
        nz = den > 0
        sm[nz] = num[nz] / den[nz]
        sm[~domain.mask] = 0.0
    if mode == "initial":
        d = domain.sdf_cells
        ramp = np.clip((d - theta) / theta, 0.0, 1.0)
        sm = sm * ramp
    return sm


def time_ramp(theta, t):
    """Smooth factor: 0 on [0, theta], ramps to 1 over [theta, 2 theta]."""
    x = np.clip((np.asarray(t, dtype=float) - theta) / theta, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)
