"""Weighted Poisson solves, velocity reconstruction, discrete Green kernel.

Stream potential h lives on grid nodes, flux potential H on cell centers,
velocity components on faces.  The face/edge coefficients of the two
operators reappear verbatim in the velocity reconstruction, so the discrete
curl and weighted-divergence identities hold to linear-solver tolerance.

Two boundary treatments exist for the Dirichlet solve on embedded (non
grid-aligned) boundaries:

* ``mode="ghost"`` rescales cut edges by the boundary-intercept fraction
  (symmetric ghost treatment), giving second-order accuracy in the max
  norm;
* ``mode="node"`` zeroes h at every node outside the domain with unscaled
  edges (first-order at Gamma) and is fully compatible with the plain face
  gradients used for the velocity, so the curl identity holds at every
  interior node.

On grid-aligned rectangles the two coincide.
"""

from __future__ import annotations

import dataclasses

import numpy as np
import scipy.linalg

from . import kernels
from .geometry import Domain, signed_distance


class SolverError(RuntimeError):
    """Linear solver failed to converge."""


class CompatibilityError(ValueError):
    """Neumann data violates the flux balance between Gamma and the interior."""


DEFAULT_TOL = 1e-9
THETA_MIN = 1e-3  # cut-edge fraction clamp; avoids singular diagonal scaling


# ---------------------------------------------------------------------------
# conjugate gradients (matrix-free, Jacobi preconditioned, deterministic)


def _cg(diag, cx, cy, rhs, active, tol, x0=None, project=False, maxiter=20000):
    x = np.zeros_like(rhs) if x0 is None else x0.copy()
    x[~active] = 0.0

    def mean_free(z):
        z = z.copy()
        z[~active] -= z[~active]
        z[active] -= z[active].mean()
        return z

    if project:
        rhs = mean_free(rhs)
        x = mean_free(x)
    r = rhs - kernels.apply_five_point(diag, cx, cy, x)
    r[~active] = 0.0
    if project:
        r = mean_free(r)
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        return np.zeros_like(rhs), 0, 0.0
    minv = np.where(np.abs(diag) > 0, 1.0 / np.where(diag == 0, 1.0, diag), 1.0)
    minv[~active] = 0.0
    z = minv * r
    p = z.copy()
    rz = float(np.sum(r * z))
    for it in range(maxiter):
        rnorm = np.linalg.norm(r)
        if rnorm <= tol * bnorm:
            return x, it, rnorm / bnorm
        ap = kernels.apply_five_point(diag, cx, cy, p)
        ap[~active] = 0.0
        if project:
            ap = mean_free(ap)
        pap = float(np.sum(p * ap))
        if pap <= 0.0:
            raise SolverError("operator lost positive definiteness")
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        if project:
            x = mean_free(x)
            r = mean_free(r)
        z = minv * r
        rz_new = float(np.sum(r * z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(f"CG stalled at relative residual "
                      f"{np.linalg.norm(r) / bnorm:.3e} after {maxiter} iterations")


# ---------------------------------------------------------------------------
# Dirichlet problem for the stream potential (nodal)


@dataclasses.dataclass
class DirichletOperator:
    """-div((1/b) grad h) on the node grid with h = 0 on Gamma."""

    domain: Domain
    mode: str
    diag: np.ndarray
    cx: np.ndarray   # (n, n+1) couplings (i,j)-(i+1,j), already / dx^2
    cy: np.ndarray   # (n+1, n) couplings (i,j)-(i,j+1)
    beta_x: np.ndarray  # unscaled edge coefficients 1/b for the velocity
    beta_y: np.ndarray

    def apply(self, h):
        out = kernels.apply_five_point(self.diag, self.cx, self.cy, h)
        out[~self.domain.node_mask] = 0.0
        return out


def _edge_betas(domain, b_cells):
    """1/b on node-grid edges (adjacent-cell arithmetic mean of b)."""
    n = domain.grid.n
    bx = np.empty((n, n + 1))   # horizontal edges (i,j)-(i+1,j), j node row
    bx[:, 1:-1] = 0.5 * (b_cells[:, :-1] + b_cells[:, 1:])
    bx[:, 0] = b_cells[:, 0]
    bx[:, -1] = b_cells[:, -1]
    by = np.empty((n + 1, n))   # vertical edges (i,j)-(i,j+1), i node column
    by[1:-1, :] = 0.5 * (b_cells[:-1, :] + b_cells[1:, :])
    by[0, :] = b_cells[0, :]
    by[-1, :] = b_cells[-1, :]
    return 1.0 / bx, 1.0 / by


def _cut_fraction(domain, p_in, p_out):
    """Fraction along [p_in, p_out] where the boundary is crossed."""
    lo, hi = 0.0, 1.0
    d_lo = signed_distance(domain, p_in)
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        pm = p_in + mid * (p_out - p_in)
        if signed_distance(domain, pm) > 0.0:
            lo = mid
        else:
            hi = mid
    theta = 0.5 * (lo + hi)
    if d_lo <= 0:
        theta = 1.0
    return max(theta, THETA_MIN)


def build_dirichlet_operator(domain, b_cells, mode="ghost"):
    if mode not in ("ghost", "node"):
        raise ValueError("mode must be 'ghost' or 'node'")
    g = domain.grid
    n = g.n
    dx2 = g.dx * g.dx
    beta_x, beta_y = _edge_betas(domain, b_cells)
    nm = domain.node_mask
    xn, yn = g.xn, g.yn

    diag = np.ones((n + 1, n + 1))
    diag[nm] = 0.0
    cx = np.zeros((n, n + 1))
    cy = np.zeros((n + 1, n))

    # horizontal edges
    both = nm[:-1, :] & nm[1:, :]
    cx[both] = beta_x[both] / dx2
    diag[:-1, :][both] += beta_x[both] / dx2
    diag[1:, :][both] += beta_x[both] / dx2
    # vertical edges
    bothy = nm[:, :-1] & nm[:, 1:]
    cy[bothy] = beta_y[bothy] / dx2
    diag[:, :-1][bothy] += beta_y[bothy] / dx2
    diag[:, 1:][bothy] += beta_y[bothy] / dx2

    # cut edges: interior endpoint gets a (scaled) diagonal contribution
    for (ii, jj), horizontal in (
            (np.nonzero(nm[:-1, :] & ~nm[1:, :]), True),
            (np.nonzero(~nm[:-1, :] & nm[1:, :]), False),
            (np.nonzero(nm[:, :-1] & ~nm[:, 1:]), None),
            (np.nonzero(~nm[:, :-1] & nm[:, 1:]), "rev_y")):
        for i, j in zip(ii, jj):
            if horizontal is True:
                p_in, p_out = (xn[i], yn[j]), (xn[i + 1], yn[j])
                beta = beta_x[i, j]
            elif horizontal is False:
                p_in, p_out = (xn[i + 1], yn[j]), (xn[i], yn[j])
                beta = beta_x[i, j]
            elif horizontal is None:
                p_in, p_out = (xn[i], yn[j]), (xn[i], yn[j + 1])
                beta = beta_y[i, j]
            else:
                p_in, p_out = (xn[i], yn[j + 1]), (xn[i], yn[j])
                beta = beta_y[i, j]
            if mode == "ghost":
                theta = _cut_fraction(domain, np.asarray(p_in), np.asarray(p_out))
            else:
                theta = 1.0
            ti, tj = (i, j) if horizontal in (True, None) else \
                ((i + 1, j) if horizontal is False else (i, j + 1))
            diag[ti, tj] += beta / (theta * dx2)
    return DirichletOperator(domain=domain, mode=mode, diag=diag, cx=cx, cy=cy,
                             beta_x=beta_x, beta_y=beta_y)


@dataclasses.dataclass
class SolveInfo:
    iterations: int
    residual: float


def solve_dirichlet_weighted(domain, b_cells, rhs_nodes, mode="ghost",
                             tol=DEFAULT_TOL, operator=None, x0=None):
    """Solve -div((1/b) grad h) = rhs with h = 0 on Gamma.

    ``rhs_nodes`` is the nodal source (typically b * <omega> sampled at
    nodes).  Returns (h, SolveInfo); h vanishes on exterior nodes.
    """
    if np.any(b_cells <= 0):
        raise ValueError("bathymetry b must be strictly positive")
    op = operator if operator is not None else \
        build_dirichlet_operator(domain, b_cells, mode=mode)
    rhs = np.where(domain.node_mask, rhs_nodes, 0.0)
    h, it, res = _cg(op.diag, op.cx, op.cy, rhs, domain.node_mask, tol, x0=x0)
    return h, SolveInfo(iterations=it, residual=res)


# ---------------------------------------------------------------------------
# Neumann problem for the flux potential (cell centers)


@dataclasses.dataclass
class NeumannOperator:
    """-div(b grad H) on interior cells; boundary fluxes enter the rhs."""

    domain: Domain
    diag: np.ndarray
    cx: np.ndarray   # (n-1, n) couplings between cells (i,j)-(i+1,j)
    cy: np.ndarray
    bface_x: np.ndarray  # b on interior x-faces (n+1, n); 0 where inactive
    bface_y: np.ndarray

    def apply(self, H):
        out = kernels.apply_five_point(self.diag, self.cx, self.cy, H)
        out[~self.domain.mask] = 0.0
        return out


def build_neumann_operator(domain, b_cells):
    g = domain.grid
    n = g.n
    dx2 = g.dx * g.dx
    mask = domain.mask
    diag = np.ones((n, n))
    diag[mask] = 0.0
    cx = np.zeros((n - 1, n))
    cy = np.zeros((n, n - 1))
    bfx = np.zeros((n + 1, n))
    bfy = np.zeros((n, n + 1))

    both = mask[:-1, :] & mask[1:, :]
    bmean = 0.5 * (b_cells[:-1, :] + b_cells[1:, :])
    cx[both] = bmean[both] / dx2
    diag[:-1, :][both] += bmean[both] / dx2
    diag[1:, :][both] += bmean[both] / dx2
    bfx[1:-1, :][both] = bmean[both]

    bothy = mask[:, :-1] & mask[:, 1:]
    bmeany = 0.5 * (b_cells[:, :-1] + b_cells[:, 1:])
    cy[bothy] = bmeany[bothy] / dx2
    diag[:, :-1][bothy] += bmeany[bothy] / dx2
    diag[:, 1:][bothy] += bmeany[bothy] / dx2
    bfy[:, 1:-1][bothy] = bmeany[bothy]
    return NeumannOperator(domain=domain, diag=diag, cx=cx, cy=cy,
                           bface_x=bfx, bface_y=bfy)


def boundary_flux_sum(domain, b_arc, a_arc):
    """Arc-mesh quadrature of b*a over Gamma."""
    return domain.boundary.integrate(b_arc * a_arc)


def compatibility_residual_fields(domain, b_arc, a_arc, A_cells):
    flux = boundary_flux_sum(domain, b_arc, a_arc)
    vol = float(np.sum(A_cells[domain.mask]) * domain.grid.cell_area)
    return abs(flux - vol)


def solve_neumann_weighted(domain, b_cells, A_cells, a_arc, b_arc=None,
                           tol=DEFAULT_TOL, tol_comp=1e-8, operator=None,
                           x0=None, check_compatibility=True):
    """Solve div(b grad H) = A with b-weighted flux bc dH/dn = a.

    ``a_arc`` is sampled on the boundary arc mesh; boundary faces pick the
    value at their nearest arc node, weighted by the true-normal projection
    so that the stair-step flux sum approximates the arc integral.  Returns
    mean-zero H (over interior cells) and SolveInfo.
    """
    if np.any(b_cells <= 0):
        raise ValueError("bathymetry b must be strictly positive")
    if b_arc is None:
        b_arc = np.ones(domain.boundary.m)
    scale = float(np.sum(np.abs(A_cells[domain.mask])) * domain.grid.cell_area
                  + domain.boundary.integrate(np.abs(b_arc * a_arc)))
    resid = compatibility_residual_fields(domain, b_arc, a_arc, A_cells)
    if check_compatibility and resid > tol_comp * max(scale, 1e-300) and scale > 0:
        raise CompatibilityError(
            f"incompatible Neumann data: |int_G b a - int_O A| = {resid:.6e}")

    op = operator if operator is not None else build_neumann_operator(domain, b_cells)
    g = domain.grid
    rhs = np.where(domain.mask, -A_cells, 0.0)
    f = domain.faces
    bf = b_arc[f.arc_index] * a_arc[f.arc_index] * f.proj
    np.add.at(rhs, (f.cell[:, 0], f.cell[:, 1]), bf / g.dx)
    H, it, res = _cg(op.diag, op.cx, op.cy, rhs, domain.mask, tol, x0=x0,
                     project=True)
    return H, SolveInfo(iterations=it, residual=res)


# ---------------------------------------------------------------------------
# velocity reconstruction


@dataclasses.dataclass
class Velocity:
    """Face-staggered velocity with a cell-centered average for output.

    ``u`` sits on x-faces (n+1, n), ``w`` on y-faces (n, n+1); faces
    touching no interior cell carry zero.  ``bu``/``bw`` are the b-weighted
    mass-flux densities used by the transport step and divergence identity.
    """

    u: np.ndarray
    w: np.ndarray
    bu: np.ndarray
    bw: np.ndarray
    cell: np.ndarray  # (n, n, 2)

    def max_speed(self):
        return max(float(np.max(np.abs(self.u))), float(np.max(np.abs(self.w))))


def reconstruct_velocity(domain, b_cells, h_nodes, H_cells, dir_op=None,
                         neu_op=None, a_arc=None, b_arc=None):
    """v = -(1/b) grad^perp h + grad H on faces.

    Plain compatible face gradients: the h-part of div(b v) telescopes to
    zero exactly on every cell, and curl of the H-part vanishes at every
    node, so rot(v) = b*omega and div(b v) = A hold to solver tolerance.
    Boundary (stair-step) faces carry the prescribed through-flow a in
    their H-part.
    """
    g = domain.grid
    n = g.n
    dx = g.dx
    if dir_op is None:
        dir_op = build_dirichlet_operator(domain, b_cells, mode="ghost")
    if neu_op is None:
        neu_op = build_neumann_operator(domain, b_cells)
    h = np.where(domain.node_mask, h_nodes, 0.0)

    # h-part: u = (1/b) d_y h on x-faces, w = -(1/b) d_x h on y-faces
    u = np.zeros((n + 1, n))
    w = np.zeros((n, n + 1))
    u += dir_op.beta_y * (h[:, 1:] - h[:, :-1]) / dx
    w -= dir_op.beta_x * (h[1:, :] - h[:-1, :]) / dx
    bu = u / dir_op.beta_y
    bw = w / dir_op.beta_x

    # H-part on interior faces
    Hm = np.where(domain.mask, H_cells, 0.0)
    gx = np.zeros((n + 1, n))
    gy = np.zeros((n, n + 1))
    gx[1:-1, :] = (Hm[1:, :] - Hm[:-1, :]) / dx
    gy[:, 1:-1] = (Hm[:, 1:] - Hm[:, :-1]) / dx
    ix = neu_op.bface_x > 0
    iy = neu_op.bface_y > 0
    u[ix] += gx[ix]
    w[iy] += gy[iy]
    bu[ix] += neu_op.bface_x[ix] * gx[ix]
    bw[iy] += neu_op.bface_y[iy] * gy[iy]

    # stair-step boundary faces: prescribed through-flow
    if a_arc is not None:
        if b_arc is None:
            b_arc = np.ones(domain.boundary.m)
        f = domain.faces
        aval = a_arc[f.arc_index] * f.proj * f.sign
        bval = b_arc[f.arc_index]
        xsel = f.axis == 0
        fi = f.cell[:, 0] + (f.sign > 0).astype(np.intp)
        fj = f.cell[:, 1] + (f.sign > 0).astype(np.intp)
        u[fi[xsel], f.cell[xsel, 1]] += aval[xsel]
        bu[fi[xsel], f.cell[xsel, 1]] += bval[xsel] * aval[xsel]
        w[f.cell[~xsel, 0], fj[~xsel]] += aval[~xsel]
        bw[f.cell[~xsel, 0], fj[~xsel]] += bval[~xsel] * aval[~xsel]

    # zero faces with no interior neighbor
    mask = domain.mask
    ext = np.zeros((n + 2, n + 2), dtype=bool)
    ext[1:-1, 1:-1] = mask
    keep_x = ext[:-1, 1:-1] | ext[1:, 1:-1]
    keep_y = ext[1:-1, :-1] | ext[1:-1, 1:]
    u[~keep_x] = 0.0
    bu[~keep_x] = 0.0
    w[~keep_y] = 0.0
    bw[~keep_y] = 0.0

    cell = np.zeros((n, n, 2))
    cell[:, :, 0] = 0.5 * (u[:-1, :] + u[1:, :])
    cell[:, :, 1] = 0.5 * (w[:, :-1] + w[:, 1:])
    cell[~mask] = 0.0
    return Velocity(u=u, w=w, bu=bu, bw=bw, cell=cell)


def regular_nodes(domain):
    """Nodes whose full velocity stencil (4 cells, 4 nodes) is interior.

    The discrete curl identity is checked there; at stair-step nodes the
    prescribed through-flow faces legitimately break it.
    """
    nm = domain.node_mask
    cm = domain.mask
    reg = np.zeros_like(nm)
    reg[1:-1, 1:-1] = (nm[1:-1, 1:-1]
                       & nm[2:, 1:-1] & nm[:-2, 1:-1]
                       & nm[1:-1, 2:] & nm[1:-1, :-2]
                       & cm[:-1, :-1] & cm[1:, :-1]
                       & cm[:-1, 1:] & cm[1:, 1:])
    return reg


def curl_residual(domain, dir_op, velocity, rhs_nodes):
    """rot(v) - b*omega at full-stencil nodes (zero to solver tolerance)."""
    dx = domain.grid.dx
    rot = np.zeros_like(rhs_nodes)
    rot[1:-1, 1:-1] = (velocity.w[1:, 1:-1] - velocity.w[:-1, 1:-1]) / dx \
        - (velocity.u[1:-1, 1:] - velocity.u[1:-1, :-1]) / dx
    return np.where(regular_nodes(domain), rot - rhs_nodes, 0.0)


def divergence_residual(domain, velocity, A_cells):
    """div(b v) - A at interior cells (zero to solver tolerance)."""
    dx = domain.grid.dx
    div = (velocity.bu[1:, :] - velocity.bu[:-1, :]
           + velocity.bw[:, 1:] - velocity.bw[:, :-1]) / dx
    return np.where(domain.mask, div - A_cells, 0.0)


# ---------------------------------------------------------------------------
# discrete Green kernel


@dataclasses.dataclass
class GreenKernel:
    """Dense inverse of the Dirichlet operator over interior nodes.

    ``K[i][j]`` approximates K1(x_i, x_j) * cell_area; symmetric because the
    operator is.  ``index`` maps row number -> (i, j) node, ``points`` holds
    the node coordinates.
    """

    K: np.ndarray
    index: np.ndarray
    points: np.ndarray
    domain: Domain

    def apply(self, rhs_nodes):
        """Equivalent of the Dirichlet solve for the packed rhs."""
        v = rhs_nodes[self.index[:, 0], self.index[:, 1]]
        out = np.zeros_like(rhs_nodes)
        out[self.index[:, 0], self.index[:, 1]] = self.K @ v
        return out


def greens_kernel(domain, b_cells, mode="ghost", cell_cap=1600):
    """Dense Dirichlet inverse; refuses grids above ``cell_cap`` unknowns."""
    nuk = int(domain.node_mask.sum())
    if nuk > cell_cap:
        raise ValueError(f"{nuk} interior nodes exceed the Green-kernel cap "
                         f"({cell_cap}); use a coarser grid")
    op = build_dirichlet_operator(domain, b_cells, mode=mode)
    idx = np.argwhere(domain.node_mask)
    L = np.zeros((nuk, nuk))
    num = -np.ones(domain.node_mask.shape, dtype=np.intp)
    num[idx[:, 0], idx[:, 1]] = np.arange(nuk)
    for r, (i, j) in enumerate(idx):
        L[r, r] = op.diag[i, j]
        if i + 1 <= domain.grid.n and num[i + 1, j] >= 0:
            L[r, num[i + 1, j]] = -op.cx[i, j]
        if i - 1 >= 0 and num[i - 1, j] >= 0:
            L[r, num[i - 1, j]] = -op.cx[i - 1, j]
        if j + 1 <= domain.grid.n and num[i, j + 1] >= 0:
            L[r, num[i, j + 1]] = -op.cy[i, j]
        if j - 1 >= 0 and num[i, j - 1] >= 0:
            L[r, num[i, j - 1]] = -op.cy[i, j - 1]
    c, low = scipy.linalg.cho_factor(L, lower=True)
    K = scipy.linalg.cho_solve((c, low), np.eye(nuk))
    xn, yn = domain.grid.xn, domain.grid.yn
    pts = np.stack([xn[idx[:, 0]], yn[idx[:, 1]]], axis=1)
    return GreenKernel(K=K, index=idx, points=pts, domain=domain)
