"""Vorticity dynamics: boundary law, source assembly, upwind transport step,
and the time-lag/cutoff regularization of the coupled problem.

The advection step is first-order monotone upwind in flux form, written so
that a uniform vorticity field is an exact steady state whenever the
divergence source A vanishes (the measured flux divergence is subtracted
cell by cell before the A term is added back).  Diffusion is implicit
backward Euler with the boundary value imposed through ghost cells, which
keeps the whole step monotone: the discrete maximum principle holds to
round-off.
"""

from __future__ import annotations

import collections
import dataclasses

import numpy as np

from . import kernels
from .elliptic import _cg, SolverError  # noqa: F401  (re-export path)
from .geometry import trace_to_boundary

CFL_MAX = 0.9


class CFLError(ValueError):
    """Time step too large for the explicit advection stage."""


# ---------------------------------------------------------------------------
# boundary vorticity law


@dataclasses.dataclass
class BoundaryVorticityData:
    """Coefficients of the slip-to-vorticity conversion on the arc mesh.

    gamma = (2k - alpha)/b and g = (eta - 2 a'_s)/b, so that the boundary
    vorticity generated by the tangential slip velocity is
    omega_Gamma(v) = gamma * (v.s) + g.
    """

    gamma: np.ndarray
    g: np.ndarray

    def omega_gamma(self, v_tangential):
        return self.gamma * v_tangential + self.g


def make_boundary_vorticity_data(domain, b_arc, a_arc, alpha_arc, eta_arc):
    k = domain.boundary.curvature
    a_s = domain.boundary.arc_derivative(a_arc)
    return BoundaryVorticityData(gamma=(2.0 * k - alpha_arc) / b_arc,
                                 g=(eta_arc - 2.0 * a_s) / b_arc)


def tangential_trace(domain, velocity, depth=2.0):
    """v.s at the boundary arc nodes (one-sided extrapolated trace)."""
    ut = trace_to_boundary(domain, velocity.cell[:, :, 0], depth=depth)
    wt = trace_to_boundary(domain, velocity.cell[:, :, 1], depth=depth)
    tg = domain.boundary.tangent
    return ut * tg[:, 0] + wt * tg[:, 1]


def boundary_vorticity(domain, velocity, data, depth=2.0):
    """omega_Gamma(v) = gamma * (v.s) + g on the arc mesh."""
    return data.omega_gamma(tangential_trace(domain, velocity, depth=depth))


# ---------------------------------------------------------------------------
# source assembly


def masked_gradient(domain, f_cells):
    """(d_x f, d_y f) at cell centers; one-sided at the embedded boundary."""
    m = domain.mask
    dx = domain.grid.dx
    f = np.where(m, f_cells, 0.0)
    gx = np.zeros_like(f)
    gy = np.zeros_like(f)
    oke = np.zeros_like(m)
    okw = np.zeros_like(m)
    okn = np.zeros_like(m)
    oks = np.zeros_like(m)
    oke[:-1, :] = m[:-1, :] & m[1:, :]
    okw[1:, :] = m[1:, :] & m[:-1, :]
    okn[:, :-1] = m[:, :-1] & m[:, 1:]
    oks[:, 1:] = m[:, 1:] & m[:, :-1]
    fe = np.zeros_like(f)
    fw = np.zeros_like(f)
    fn = np.zeros_like(f)
    fs = np.zeros_like(f)
    fe[:-1, :] = f[1:, :]
    fw[1:, :] = f[:-1, :]
    fn[:, :-1] = f[:, 1:]
    fs[:, 1:] = f[:, :-1]
    both_x = oke & okw
    gx[both_x] = (fe[both_x] - fw[both_x]) / (2 * dx)
    only_e = oke & ~okw
    only_w = okw & ~oke
    gx[only_e] = (fe[only_e] - f[only_e]) / dx
    gx[only_w] = (f[only_w] - fw[only_w]) / dx
    both_y = okn & oks
    gy[both_y] = (fn[both_y] - fs[both_y]) / (2 * dx)
    only_n = okn & ~oks
    only_s = oks & ~okn
    gy[only_n] = (fn[only_n] - f[only_n]) / dx
    gy[only_s] = (f[only_s] - fs[only_s]) / dx
    gx[~m] = 0.0
    gy[~m] = 0.0
    return gx, gy


def rot_over_b(domain, G_cells, b_cells):
    """rot(G/b) at cell centers from a 2-vector forcing G."""
    g1x, g1y = masked_gradient(domain, G_cells[:, :, 0] / b_cells)
    g2x, g2y = masked_gradient(domain, G_cells[:, :, 1] / b_cells)
    return g2x - g1y


def assemble_source(domain, omega, velocity, b_cells, kappa_cells, A_cells,
                    rotGb_cells, variant="kappa"):
    """S = -kappa*omega - (v . grad^perp)(q/b) + rot(G/b), q in {kappa, A}.

    ``variant`` selects which field enters the gradient term; the friction
    form matches the curl of the momentum balance and is the default.
    """
    if variant not in ("kappa", "A"):
        raise ValueError("variant must be 'kappa' or 'A'")
    q = kappa_cells if variant == "kappa" else A_cells
    fx, fy = masked_gradient(domain, q / b_cells)
    # (v . grad^perp) f = -u f_y + w f_x   with grad^perp = (-d_y, d_x)
    adv = -velocity.cell[:, :, 0] * fy + velocity.cell[:, :, 1] * fx
    S = -kappa_cells * omega - adv + rotGb_cells
    return np.where(domain.mask, S, 0.0)


# ---------------------------------------------------------------------------
# transport step


def _interior_fluxes(domain, velocity):
    """Mass fluxes restricted to faces between two interior cells."""
    m = domain.mask
    fx = np.zeros_like(velocity.bu)
    fy = np.zeros_like(velocity.bw)
    fx[1:-1, :] = np.where(m[:-1, :] & m[1:, :], velocity.bu[1:-1, :], 0.0)
    fy[:, 1:-1] = np.where(m[:, :-1] & m[:, 1:], velocity.bw[:, 1:-1], 0.0)
    return fx, fy


def check_cfl(domain, velocity, nu, dt, cfl_max=CFL_MAX):
    dx = domain.grid.dx
    c = dt * (velocity.max_speed() / dx + 4.0 * nu / dx ** 2)
    if c > cfl_max:
        raise CFLError(f"CFL number {c:.3f} exceeds {cfl_max} "
                       f"(dt={dt:g}, dx={dx:g}, nu={nu:g})")
    return c


def step_vorticity(domain, omega, velocity, b_cells, S_cells, A_cells,
                   nu, dt, b_arc=None, a_arc=None, bc_arc=None,
                   tol=1e-11, diff_op=None):
    """One step of d_t(b omega) + div(b omega v) = S + nu*Lap(omega).

    Explicit first-order upwind advection (with the measured flux
    divergence subtracted so uniform fields are exact steady states when
    A = 0), then implicit diffusion with the Dirichlet value ``bc_arc``
    imposed on the whole boundary (nu > 0).  For nu = 0, ``bc_arc``
    supplies only the upwind value on inflow boundary faces.
    """
    check_cfl(domain, velocity, nu, dt)
    g = domain.grid
    dx = g.dx
    m = domain.mask
    om = np.where(m, omega, 0.0)

    fx, fy = _interior_fluxes(domain, velocity)
    adv, divv = kernels.upwind_divergence(om, fx, fy, dx)
    adv = np.asarray(adv).copy()
    divv = np.asarray(divv).copy()

    # stair-step boundary faces: prescribed through-flow only
    if a_arc is not None:
        f = domain.faces
        if b_arc is None:
            b_arc = np.ones(domain.boundary.m)
        flux_out = b_arc[f.arc_index] * a_arc[f.arc_index] * f.proj
        up = om[f.cell[:, 0], f.cell[:, 1]].copy()
        if bc_arc is not None:
            inflow = flux_out < 0.0
            up[inflow] = bc_arc[f.arc_index[inflow]]
        np.add.at(adv, (f.cell[:, 0], f.cell[:, 1]), flux_out * up / dx)
        np.add.at(divv, (f.cell[:, 0], f.cell[:, 1]), flux_out / dx)

    # skew-corrected flux form: div(b omega v) = [adv - omega*divv] + omega*A
    rate = -(adv - om * divv) - om * A_cells + S_cells
    omega_star = om + dt * rate / b_cells
    omega_star[~m] = 0.0

    if nu <= 0.0:
        return omega_star

    # implicit diffusion: (b/dt) w - nu Lap w = (b/dt) omega_star,
    # Dirichlet bc through ghost cells across boundary faces
    n = g.n
    if diff_op is None:
        diff_op = build_diffusion_operator(domain, b_cells, nu, dt)
    diag, cx, cy, bcell_arc = diff_op
    rhs = np.where(m, b_cells / dt * omega_star, 0.0)
    if bc_arc is not None:
        f = domain.faces
        np.add.at(rhs, (f.cell[:, 0], f.cell[:, 1]),
                  2.0 * nu * bc_arc[f.arc_index] / dx ** 2)
    w, it, res = _cg(diag, cx, cy, rhs, m, tol, x0=omega_star)
    w[~m] = 0.0
    return w


def build_diffusion_operator(domain, b_cells, nu, dt):
    """Helmholtz operator (b/dt) - nu*Lap with ghost Dirichlet rows."""
    n = domain.grid.n
    dx2 = domain.grid.dx ** 2
    m = domain.mask
    diag = np.ones((n, n))
    diag[m] = b_cells[m] / dt
    cx = np.zeros((n - 1, n))
    cy = np.zeros((n, n - 1))
    both = m[:-1, :] & m[1:, :]
    cx[both] = nu / dx2
    diag[:-1, :][both] += nu / dx2
    diag[1:, :][both] += nu / dx2
    bothy = m[:, :-1] & m[:, 1:]
    cy[bothy] = nu / dx2
    diag[:, :-1][bothy] += nu / dx2
    diag[:, 1:][bothy] += nu / dx2
    # ghost value across each boundary face: mirror distance dx/2 + dx/2
    f = domain.faces
    np.add.at(diag, (f.cell[:, 0], f.cell[:, 1]), 2.0 * nu / dx2)
    return diag, cx, cy, f.arc_index


# ---------------------------------------------------------------------------
# time-lag / cutoff regularization


class VorticityHistory:
    """Ring buffer of vorticity snapshots over the trailing lag window.

    Snapshots are pushed at the uniform step dt; entries older than
    t - theta (with one spare) are dropped.  The field is treated as zero
    for times before the start of the simulation.
    """

    def __init__(self, theta, dt):
        if theta <= 0:
            raise ValueError("lag theta must be positive")
        self.theta = float(theta)
        self.dt = float(dt)
        self.times = collections.deque()
        self.snaps = collections.deque()

    def push(self, t, omega):
        if self.times and t <= self.times[-1]:
            raise ValueError("history times must increase")
        self.times.append(float(t))
        self.snaps.append(np.array(omega, copy=True))
        while len(self.times) > 2 and \
                self.times[1] <= self.times[-1] - self.theta:
            self.times.popleft()
            self.snaps.popleft()

    def __len__(self):
        return len(self.times)


def timelag_cutoff_average(history, theta, R, t=None, extra=None):
    """<omega>(t) = (1/theta) * integral_{t-theta}^{t} [omega]_R ds.

    Trapezoidal rule over the stored snapshots, clipping each to
    [-R, R]; the field is zero before time 0, so early times are damped
    by the empty part of the window.  ``extra`` = (t_new, omega_new)
    appends a tentative snapshot (used inside the fixed-point iteration).
    """
    times = list(history.times)
    snaps = list(history.snaps)
    if extra is not None:
        times.append(float(extra[0]))
        snaps.append(extra[1])
    if not times:
        return 0.0
    if t is None:
        t = times[-1]
    lo = t - theta
    acc = None
    prev_t = prev_f = None
    for tk, sk in zip(times, snaps):
        if tk < lo - 1e-12 or tk > t + 1e-12:
            prev_t, prev_f = tk, sk
            continue
        fk = np.clip(sk, -R, R)
        if prev_t is not None and prev_t < lo - 1e-12:
            # partial first interval: interpolate the snapshot at lo
            w = (lo - prev_t) / (tk - prev_t)
            f_lo = np.clip((1 - w) * prev_f + w * sk, -R, R)
            acc = 0.5 * (tk - lo) * (f_lo + fk)
        elif acc is None:
            acc = np.zeros_like(fk)
        else:
            acc = acc + 0.5 * (tk - prev_tk) * (prev_fk + fk)
        prev_tk, prev_fk = tk, fk
        prev_t, prev_f = tk, sk
    if acc is None:
        return 0.0
    return acc / theta
