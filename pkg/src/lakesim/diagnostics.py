"""Monitors for the a priori estimates: weighted norms, the Gronwall
balance, the maximum principle, weak-form residuals (classical and
Green-kernel), boundary-trace quantities, and exponent bookkeeping.

All monitors are pure functions of a trajectory plus its scenario; they
assert nothing themselves but return report objects with PASS flags where
the underlying estimate has an assertable discrete counterpart.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from . import transport
from .geometry import nearest_arc_index, partition_boundary, trace_to_boundary
from .scenario import _cells_to_nodes
from .transport import masked_gradient


# ---------------------------------------------------------------------------
# norms and exponents


def weighted_lp_norm(omega, b, p, cell_area):
    """(sum b |omega|^p dA)^(1/p); p = inf returns the max norm."""
    if not p > 1:
        raise ValueError("exponent p must exceed 1")
    omega = np.asarray(omega, dtype=float)
    if np.isinf(p):
        return float(np.max(np.abs(omega))) if omega.size else 0.0
    return float(np.sum(np.asarray(b) * np.abs(omega) ** p)
                 * cell_area) ** (1.0 / p)


@dataclasses.dataclass(frozen=True)
class ExponentTable:
    p: float
    p_tilde: float
    p1: float
    p2: float
    p3: float
    p_star: float


def exponent_table(p, eps=0.5):
    """Integrability bookkeeping for the vorticity exponent p.

    p_tilde is the working exponent (p above 2, bumped to 2+eps at p=2,
    conjugated below 2); p1..p3 form a Holder triple with
    1/p1 + 1/p2 + 1/p3 = 1; p_star is the plain conjugate.
    """
    if not p > 1:
        raise ValueError("exponent p must exceed 1")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if np.isinf(p):
        p_tilde = np.inf
        p2 = np.inf
        p3 = 1.0
        p_star = 1.0
    elif p > 2:
        p_tilde = p
        p2 = np.inf
        p3 = p / (p - 1.0)
        p_star = p / (p - 1.0)
    elif p == 2:
        p_tilde = 2.0 + eps
        p2 = 2.0 + 4.0 / eps
        p3 = 2.0
        p_star = 2.0
    else:
        p_tilde = p / (p - 1.0)
        p2 = p / (2.0 - p)
        p3 = p / (p - 1.0)
        p_star = p / (p - 1.0)
    p1 = p_tilde
    inv = (0.0 if np.isinf(p1) else 1.0 / p1) \
        + (0.0 if np.isinf(p2) else 1.0 / p2) \
        + (0.0 if np.isinf(p3) else 1.0 / p3)
    if abs(inv - 1.0) > 1e-12:
        raise AssertionError(f"Holder identity violated: {inv!r}")
    return ExponentTable(p=p, p_tilde=p_tilde, p1=p1, p2=p2, p3=p3,
                         p_star=p_star)


def sobolev_proxy_norm(domain, field, q, order=2, where="nodes"):
    """Discrete W^order_q proxy: Lq norm of the field and its difference
    quotients up to ``order`` over the interior (nodes or cells)."""
    dx = domain.grid.dx
    mask = domain.node_mask if where == "nodes" else domain.mask
    f = np.where(mask, field, 0.0)
    terms = [f]
    if order >= 1:
        gx = np.zeros_like(f)
        gy = np.zeros_like(f)
        gx[1:-1, :] = (f[2:, :] - f[:-2, :]) / (2 * dx)
        gy[:, 1:-1] = (f[:, 2:] - f[:, :-2]) / (2 * dx)
        terms += [gx, gy]
    if order >= 2:
        hxx = np.zeros_like(f)
        hyy = np.zeros_like(f)
        hxy = np.zeros_like(f)
        hxx[1:-1, :] = (f[2:, :] - 2 * f[1:-1, :] + f[:-2, :]) / dx ** 2
        hyy[:, 1:-1] = (f[:, 2:] - 2 * f[:, 1:-1] + f[:, :-2]) / dx ** 2
        hxy[1:-1, 1:-1] = (f[2:, 2:] - f[2:, :-2] - f[:-2, 2:]
                           + f[:-2, :-2]) / (4 * dx ** 2)
        terms += [hxx, hyy, hxy]
    # restrict to points whose full stencil is interior
    core = mask.copy()
    if order >= 1:
        core[1:-1, 1:-1] &= (mask[2:, 1:-1] & mask[:-2, 1:-1]
                             & mask[1:-1, 2:] & mask[1:-1, :-2])
        core[[0, -1], :] = False
        core[:, [0, -1]] = False
    if order >= 2:
        core[1:-1, 1:-1] &= (mask[2:, 2:] & mask[2:, :-2]
                             & mask[:-2, 2:] & mask[:-2, :-2])
    area = domain.grid.cell_area
    acc = sum(np.sum(np.abs(t[core]) ** q) for t in terms)
    return float(acc * area) ** (1.0 / q)


# ---------------------------------------------------------------------------
# compatibility and Gronwall


def compatibility_residual(scenario, t):
    """|boundary flux integral - interior source integral| at time t."""
    from .elliptic import compatibility_residual_fields
    return compatibility_residual_fields(scenario.domain, scenario.b_arc,
                                         scenario.a_at(t), scenario.A_at(t))


@dataclasses.dataclass
class GronwallReport:
    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    slack: np.ndarray
    scale: float
    passed: bool


def _perp_advection(domain, velocity, f_cells):
    """(v . grad^perp) f at cell centers."""
    fx, fy = masked_gradient(domain, f_cells)
    return -velocity.cell[:, :, 0] * fy + velocity.cell[:, :, 1] * fx


def _gronwall_integrands(traj, q, k):
    """Interior and boundary integrands of the growth estimate at stamp k."""
    sc = traj.scenario
    dom = sc.domain
    st = traj.states[k]
    t = traj.times[k]
    m = dom.mask
    area = dom.grid.cell_area
    om = np.abs(st.omega)
    A = sc.A_at(t)
    kap = sc.kappa_at(t)
    E = np.abs(sc.rotGb_at(t))
    F = np.abs(_perp_advection(dom, st.velocity, A / sc.b_cells))
    interior = (q * np.sum(((np.abs(A) + np.abs(kap)) * om ** q)[m])
                + q * np.sum((E * om ** (q - 1))[m])
                + np.sum((F * om ** (q - 1))[m])) * area
    a = sc.a_at(t)
    part = partition_boundary(dom, a)
    bnd = 0.0
    if part.minus.size:
        w = dom.boundary.ds[part.minus]
        bnd = float(np.sum(sc.b_arc[part.minus] * a[part.minus]
                           * np.abs(st.omega_bc[part.minus]) ** q * w))
    return interior + bnd


def gronwall_monitor(traj, q, tol_slack=1e-8):
    """Slack of the weighted L_q growth estimate along the trajectory.

    LHS(t) is the change of the weighted vorticity norm; RHS(t) collects
    the data terms (friction/source growth, forcing, source gradient, and
    the inflow boundary term, which is non-positive).  PASS iff
    slack = RHS - LHS >= -tol_slack * scale at every stamp.
    """
    sc = traj.scenario
    dom = sc.domain
    m = dom.mask
    area = dom.grid.cell_area
    times = np.asarray(traj.times)
    y = np.array([np.sum((sc.b_cells * np.abs(s.omega) ** q)[m]) * area
                  for s in traj.states])
    lhs = y - y[0]
    g = np.array([_gronwall_integrands(traj, q, k)
                  for k in range(len(traj.states))])
    rhs = np.concatenate([[0.0], np.cumsum(
        0.5 * np.diff(times) * (g[:-1] + g[1:]))])
    slack = rhs - lhs
    scale = max(float(np.max(np.abs(lhs))), float(np.max(np.abs(rhs))),
                float(y[0]), 1e-300)
    passed = bool(np.all(slack >= -tol_slack * scale))
    return GronwallReport(times=times, lhs=lhs, rhs=rhs, slack=slack,
                          scale=scale, passed=passed)


def gronwall_data_series(traj, q):
    """(times, D, B, y0): measured coefficients turning the growth estimate
    into y' <= D y + B for y the weighted L_q power integral."""
    sc = traj.scenario
    dom = sc.domain
    m = dom.mask
    area = dom.grid.cell_area
    binf = float(np.min(sc.b_cells[m]))
    vol = float(np.sum(m) * area)
    times = np.asarray(traj.times)
    D = np.empty_like(times)
    B = np.empty_like(times)
    for k, (t, st) in enumerate(zip(traj.times, traj.states)):
        A = sc.A_at(t)
        kap = sc.kappa_at(t)
        supAk = float(np.max((np.abs(A) + np.abs(kap))[m]))
        supE = float(np.max(np.abs(sc.rotGb_at(t))[m]))
        supF = float(np.max(np.abs(
            _perp_advection(dom, st.velocity, A / sc.b_cells))[m]))
        D[k] = (q * supAk + (q - 1.0) * supE
                + (q - 1.0) / q * supF) / binf
        B[k] = supE * vol + supF * vol / q
    y0 = float(np.sum((sc.b_cells * np.abs(traj.states[0].omega) ** q)[m])
               * area)
    return times, D, B, y0


# ---------------------------------------------------------------------------
# maximum principle


@dataclasses.dataclass
class MaxPrincipleReport:
    times: np.ndarray
    sup_omega: np.ndarray
    reference: np.ndarray
    clean: bool
    passed: bool


def max_principle_monitor(traj, tol=1e-10):
    """sup|omega(t)| against the running data bound k(t).

    k(t) = max(sup|omega0|, sup|gamma| max|v| + sup|g|); in the clean case
    (no forcing, no interior source, friction >= 0) the monotone scheme
    keeps sup|omega| below the running max of k, and PASS is asserted.
    """
    sc = traj.scenario
    dom = sc.domain
    times = np.asarray(traj.times)
    sup0 = float(np.max(np.abs(traj.states[0].omega)))
    sup = np.empty_like(times)
    ref = np.empty_like(times)
    clean = True
    for k, (t, st) in enumerate(zip(traj.times, traj.states)):
        sup[k] = float(np.max(np.abs(st.omega)))
        bvd = transport.make_boundary_vorticity_data(
            dom, sc.b_arc, sc.a_at(t), sc.alpha_at(t), sc.eta_at(t))
        vmax = float(np.max(np.abs(st.velocity.cell)))
        ref[k] = max(sup0, float(np.max(np.abs(bvd.gamma))) * vmax
                     + float(np.max(np.abs(bvd.g))))
        if np.any(sc.rotGb_at(t)) or np.any(sc.A_at(t)) \
                or np.any(sc.kappa_at(t) < 0):
            clean = False
    run_ref = np.maximum.accumulate(ref)
    passed = bool(np.all(sup <= run_ref + tol)) if clean else True
    return MaxPrincipleReport(times=times, sup_omega=sup, reference=run_ref,
                              clean=clean, passed=passed)


# ---------------------------------------------------------------------------
# test functions


@dataclasses.dataclass
class TestFunction:
    """Smooth space-time test function with the required support.

    ``values(x, y, t)``, ``dt(x, y, t)`` and ``grad(x, y, t)`` are vectorized
    callables; the spatial factor vanishes outside its bump and the time
    factor vanishes at t = T.
    """

    values: object
    dt: object
    grad: object
    T: float
    interior: bool


def _bump(r2):
    """C^inf bump of the squared radial coordinate r2 = |x|^2/R^2."""
    out = np.zeros_like(r2)
    inside = r2 < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
    return out


def _bump_prime(r2):
    out = np.zeros_like(r2)
    inside = r2 < 1.0
    u = 1.0 - r2[inside]
    out[inside] = -np.exp(1.0 - 1.0 / u) / u ** 2
    return out


def interior_test_function(center, radius, T):
    """psi = bump(|x-c|/radius) * cos^2(pi t / (2T)); supported in the open
    ball, vanishing at t = T."""
    cx, cy = center

    def tau(t):
        return np.cos(np.pi * t / (2 * T)) ** 2

    def dtau(t):
        return -np.pi / (2 * T) * np.sin(np.pi * t / T)

    def values(x, y, t):
        r2 = ((x - cx) ** 2 + (y - cy) ** 2) / radius ** 2
        return _bump(r2) * tau(t)

    def dt(x, y, t):
        r2 = ((x - cx) ** 2 + (y - cy) ** 2) / radius ** 2
        return _bump(r2) * dtau(t)

    def grad(x, y, t):
        r2 = ((x - cx) ** 2 + (y - cy) ** 2) / radius ** 2
        dpsi = _bump_prime(r2) * tau(t) * 2.0 / radius ** 2
        return dpsi * (x - cx), dpsi * (y - cy)

    return TestFunction(values=values, dt=dt, grad=grad, T=T, interior=True)


def inflow_test_function(domain, arc_point, radius, T):
    """Bump centered at a boundary arc point (for inflow-window tests);
    its support meets Gamma only inside the ball around that point."""
    tf = interior_test_function(arc_point, radius, T)
    return dataclasses.replace(tf, interior=False)


# ---------------------------------------------------------------------------
# weak residual


def _cell_quad(domain, f_cells):
    return float(np.sum(f_cells[domain.mask]) * domain.grid.cell_area)


def _classical_space_term(traj, k, tf):
    sc = traj.scenario
    dom = sc.domain
    st = traj.states[k]
    t = traj.times[k]
    g = dom.grid
    xc, yc = np.meshgrid(g.xc, g.yc, indexing="ij")
    psi = tf.values(xc, yc, t)
    psit = tf.dt(xc, yc, t)
    gx, gy = tf.grad(xc, yc, t)
    vdotgrad = st.velocity.cell[:, :, 0] * gx + st.velocity.cell[:, :, 1] * gy
    A = sc.A_at(t)
    bracket = (sc.kappa_at(t) * st.omega
               + _perp_advection(dom, st.velocity, A / sc.b_cells)
               - sc.rotGb_at(t))
    lhs_t = _cell_quad(dom, sc.b_cells * st.omega * (psit + vdotgrad)
                       - bracket * psi)
    return lhs_t


def _kernel_space_term(traj, k, tf, kernel):
    """Kernel form of the space term: the advective part is split into a
    potential part and the stream part represented through the Green
    kernel, h = K1 * (b <omega>).

    The double integral F[omega, K_psi] is evaluated by contracting one
    argument through the kernel first; by bilinearity and the symmetry of
    K1 this equals the symmetrized double sum exactly, while avoiding an
    independent rediscretization of grad K1 (which would only agree with
    the classical form to quadrature order).
    """
    from .elliptic import reconstruct_velocity

    sc = traj.scenario
    dom = sc.domain
    st = traj.states[k]
    t = traj.times[k]
    g = dom.grid
    xc, yc = np.meshgrid(g.xc, g.yc, indexing="ij")
    psi = tf.values(xc, yc, t)
    psit = tf.dt(xc, yc, t)
    gx, gy = tf.grad(xc, yc, t)
    A = sc.A_at(t)
    bracket = (sc.kappa_at(t) * st.omega
               + _perp_advection(dom, st.velocity, A / sc.b_cells)
               - sc.rotGb_at(t))
    # stream part of the velocity through the kernel representation
    avg = st.avg if st.avg is not None else st.omega
    rhs = np.where(dom.node_mask, sc.b_nodes * _cells_to_nodes(dom, avg), 0.0)
    h_k = kernel.apply(rhs)
    zero_a = np.zeros(dom.boundary.m)
    v_h = reconstruct_velocity(dom, sc.b_cells, h_k,
                               np.zeros_like(st.omega), a_arc=zero_a,
                               b_arc=sc.b_arc).cell
    F = _cell_quad(dom, sc.b_cells * st.omega
                   * (v_h[:, :, 0] * gx + v_h[:, :, 1] * gy))
    # potential part rebuilt from H alone (including the through-flow
    # boundary correction), independent of the stored velocity
    n = dom.grid.n
    v_H = reconstruct_velocity(dom, sc.b_cells, np.zeros((n + 1, n + 1)),
                               st.H, a_arc=sc.a_at(t), b_arc=sc.b_arc).cell
    base = _cell_quad(dom, sc.b_cells * st.omega
                      * (psit + v_H[:, :, 0] * gx + v_H[:, :, 1] * gy)
                      - bracket * psi)
    return base + F


def _boundary_term(traj, k, tf):
    sc = traj.scenario
    dom = sc.domain
    st = traj.states[k]
    t = traj.times[k]
    a = sc.a_at(t)
    part = partition_boundary(dom, a)
    if not part.minus.size:
        return 0.0
    xy = dom.boundary.xy[part.minus]
    psi = tf.values(xy[:, 0], xy[:, 1], t)
    w = dom.boundary.ds[part.minus]
    return float(np.sum(sc.b_arc[part.minus] * a[part.minus]
                        * st.omega_bc[part.minus] * psi * w))


def weak_residual(traj, tf, form="classical", kernel=None):
    """|LHS - RHS| of the space-time weak identity for one test function.

    ``form='classical'`` uses the advective term with the reconstructed
    velocity; ``form='kernel'`` replaces the stream-function part by the
    symmetrized Green-kernel double sum (requires ``kernel``).
    """
    if form not in ("classical", "kernel"):
        raise ValueError("form must be 'classical' or 'kernel'")
    if form == "kernel" and kernel is None:
        raise ValueError("kernel form requires a GreenKernel")
    sc = traj.scenario
    dom = sc.domain
    times = np.asarray(traj.times)
    vals = np.empty_like(times)
    bvals = np.empty_like(times)
    for k in range(times.size):
        if form == "classical":
            vals[k] = _classical_space_term(traj, k, tf)
        else:
            vals[k] = _kernel_space_term(traj, k, tf, kernel)
        bvals[k] = _boundary_term(traj, k, tf)
    lhs = float(np.trapezoid(vals, times))
    g = dom.grid
    xc, yc = np.meshgrid(g.xc, g.yc, indexing="ij")
    psi0 = tf.values(xc, yc, 0.0)
    rhs = -_cell_quad(dom, sc.b_cells * traj.states[0].omega * psi0) \
        + float(np.trapezoid(bvals, times))
    return abs(lhs - rhs)


# ---------------------------------------------------------------------------
# boundary trace monitor


@dataclasses.dataclass
class TraceReport:
    sigma: list
    bo: list
    to: list
    non_increasing: bool


def _extension_field(traj, k):
    """Normal-characteristic extension: the inflow boundary value where the
    foot is on the inflow part, the traced interior value elsewhere."""
    sc = traj.scenario
    dom = sc.domain
    st = traj.states[k]
    t = traj.times[k]
    a = sc.a_at(t)
    part = partition_boundary(dom, a)
    tr = trace_to_boundary(dom, st.omega)
    ext = tr.copy()
    if part.minus.size:
        ext[part.minus] = st.omega_bc[part.minus]
    g = dom.grid
    xc, yc = np.meshgrid(g.xc, g.yc, indexing="ij")
    pts = np.stack([xc[dom.mask], yc[dom.mask]], axis=1)
    foot_s = dom.project_to_boundary(pts)[1]
    foot_idx = nearest_arc_index(dom, foot_s)
    out = np.zeros_like(st.omega)
    out[dom.mask] = ext[foot_idx]
    return out


def boundary_trace_monitor(traj, sigma_list, q, tf):
    """Trend of the near-boundary and initial-layer trace quantities.

    Per sigma: (1/sigma) * int over the shell sigma < d < 2 sigma of
    b (v.grad d) |omega - ext|^q psi, time-integrated; and the initial
    analogue over t in [0, sigma].  Reports whether both sequences are
    non-increasing down the sigma list.
    """
    sc = traj.scenario
    dom = sc.domain
    g = dom.grid
    dx = g.dx
    sig0 = dom.sigma0
    for s in sigma_list:
        if s < 2 * dx or s > 0.5 * sig0:
            raise ValueError(f"sigma {s} outside resolved band "
                             f"({2 * dx}, {0.5 * sig0})")
    d = dom.sdf_cells
    ddx, ddy = masked_gradient(dom, np.where(dom.mask, d, 0.0))
    times = np.asarray(traj.times)
    xc, yc = np.meshgrid(g.xc, g.yc, indexing="ij")
    exts = [_extension_field(traj, k) for k in range(times.size)]
    bo_list, to_list = [], []
    for sig in sigma_list:
        shell = dom.mask & (d > sig) & (d < 2 * sig)
        vals = np.empty_like(times)
        tvals = np.empty_like(times)
        for k, st in enumerate(traj.states):
            t = traj.times[k]
            psi = tf.values(xc, yc, t)
            vgd = (st.velocity.cell[:, :, 0] * ddx
                   + st.velocity.cell[:, :, 1] * ddy)
            f = sc.b_cells * vgd * np.abs(st.omega - exts[k]) ** q * psi
            vals[k] = np.sum(f[shell]) * g.cell_area
            f0 = sc.b_cells * np.abs(st.omega - exts[k]) ** q * psi
            tvals[k] = np.sum(f0[dom.mask]) * g.cell_area
        bo_list.append(abs(float(np.trapezoid(vals, times))) / sig)
        inlayer = times <= sig + 1e-12
        if np.sum(inlayer) >= 2:
            to_list.append(float(np.trapezoid(tvals[inlayer],
                                              times[inlayer])) / sig)
        else:
            to_list.append(tvals[0] * min(sig, times[-1]) / sig)
    tol = 1e-12 + 1e-6 * max(bo_list + to_list)
    mono = all(b2 <= b1 + tol for b1, b2 in zip(bo_list, bo_list[1:])) \
        and all(t2 <= t1 + tol for t1, t2 in zip(to_list, to_list[1:]))
    return TraceReport(sigma=list(sigma_list), bo=bo_list, to=to_list,
                       non_increasing=mono)
