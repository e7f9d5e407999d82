"""Coupled fixed-point driver: the regularized lake problem in time.

Each step performs a Picard iteration between the elliptic solves (driven
by the time-lagged, clipped vorticity average) and the upwind transport
step, then advances the history buffer.  Study helpers run the vanishing
viscosity and vanishing-lag parameter sweeps, and the discrete Gronwall
utility provides the growth bound used by the lag study.
"""

from __future__ import annotations

import dataclasses
import os
import concurrent.futures

import numpy as np

from . import elliptic, transport
from .scenario import ScenarioData, _cells_to_nodes, mollify_data, time_ramp


class FixedPointError(RuntimeError):
    """Picard iteration failed to converge; carries the residual history."""

    def __init__(self, message, residuals):
        super().__init__(message)
        self.residuals = residuals


@dataclasses.dataclass
class SolverConfig:
    nu: float = 0.0
    theta: float = 0.1
    R: object = "auto"
    p: float = 2.0
    T: float = 1.0
    dt: float = 1e-2
    adaptive_dt: bool = False
    cfl_target: float = 0.45
    tol_fp: float = 1e-10
    max_fp_iter: int = 60
    relax: float = 1.0
    tol_lin: float = 1e-9
    tol_comp: float = 1e-8
    dirichlet_mode: str = "ghost"
    source_variant: str = "kappa"
    output_every: int = 1

    def __post_init__(self):
        if self.nu < 0 or self.theta <= 0 or self.tol_fp <= 0:
            raise ValueError("require nu >= 0, theta > 0, tol_fp > 0")
        if not (self.R == "auto" or float(self.R) > 0):
            raise ValueError("cutoff R must be positive or 'auto'")


@dataclasses.dataclass
class StateFields:
    t: float
    omega: np.ndarray
    h: np.ndarray
    H: np.ndarray
    velocity: elliptic.Velocity
    avg: np.ndarray
    omega_bc: np.ndarray
    picard_residuals: list


@dataclasses.dataclass
class Trajectory:
    times: list
    states: list
    scenario: ScenarioData
    config: SolverConfig


class _Workspace:
    """Per-run operators and warm starts (b is static, so both elliptic
    operators and the diffusion operator are assembled once)."""

    def __init__(self, scenario, config):
        dom = scenario.domain
        self.dir_op = elliptic.build_dirichlet_operator(
            dom, scenario.b_cells, mode=config.dirichlet_mode)
        self.neu_op = elliptic.build_neumann_operator(dom, scenario.b_cells)
        self.h0 = None
        self.H0 = None
        self.diff_op = None
        self.diff_dt = None

    def diffusion(self, scenario, config, dt):
        if config.nu <= 0:
            return None
        if self.diff_op is None or self.diff_dt != dt:
            self.diff_op = transport.build_diffusion_operator(
                scenario.domain, scenario.b_cells, config.nu, dt)
            self.diff_dt = dt
        return self.diff_op


def _elliptic_solve(scenario, config, ws, avg_cells, t):
    """Both potentials and the velocity for a given lagged average."""
    dom = scenario.domain
    avg_nodes = _cells_to_nodes(dom, avg_cells)
    rhs_nodes = np.where(dom.node_mask, scenario.b_nodes * avg_nodes, 0.0)
    h, _ = elliptic.solve_dirichlet_weighted(
        dom, scenario.b_cells, rhs_nodes, mode=config.dirichlet_mode,
        tol=config.tol_lin, operator=ws.dir_op, x0=ws.h0)
    a = scenario.a_at(t)
    A = scenario.A_at(t)
    H, _ = elliptic.solve_neumann_weighted(
        dom, scenario.b_cells, A, a, b_arc=scenario.b_arc, tol=config.tol_lin,
        tol_comp=config.tol_comp, operator=ws.neu_op, x0=ws.H0)
    ws.h0, ws.H0 = h, H
    vel = elliptic.reconstruct_velocity(dom, scenario.b_cells, h, H,
                                        dir_op=ws.dir_op, neu_op=ws.neu_op,
                                        a_arc=a, b_arc=scenario.b_arc)
    return h, H, vel, a, A


def _boundary_bc(scenario, t, vel):
    bvd = transport.make_boundary_vorticity_data(
        scenario.domain, scenario.b_arc, scenario.a_at(t),
        scenario.alpha_at(t), scenario.eta_at(t))
    return transport.boundary_vorticity(scenario.domain, vel, bvd)


def solve_viscous_step(scenario, config, ws, state, history, dt, R):
    """Advance one step of the coupled problem by Picard iteration.

    The lag average at the new time includes the tentative new snapshot
    (weight dt/theta), so the map is a contraction for small steps.
    """
    t_new = state.t + dt
    omega_new = state.omega
    v_prev = None
    residuals = []
    result = None
    for _ in range(config.max_fp_iter):
        avg = transport.timelag_cutoff_average(
            history, config.theta, R, t=t_new, extra=(t_new, omega_new))
        if np.ndim(avg) == 0:
            avg = np.zeros_like(state.omega)
        h, H, vel, a, A = _elliptic_solve(scenario, config, ws, avg, t_new)
        bc = _boundary_bc(scenario, t_new, vel)
        S = transport.assemble_source(
            scenario.domain, state.omega, vel, scenario.b_cells,
            scenario.kappa_at(t_new), A, scenario.rotGb_at(t_new),
            variant=config.source_variant)
        cand = transport.step_vorticity(
            scenario.domain, state.omega, vel, scenario.b_cells, S, A,
            config.nu, dt, b_arc=scenario.b_arc, a_arc=a, bc_arc=bc,
            tol=min(config.tol_lin, 1e-11),
            diff_op=ws.diffusion(scenario, config, dt))
        omega_new = state.omega + config.relax * (cand - state.omega) \
            if config.relax != 1.0 else cand
        result = StateFields(t=t_new, omega=omega_new, h=h, H=H, velocity=vel,
                             avg=avg, omega_bc=bc,
                             picard_residuals=residuals)
        if v_prev is not None:
            res = max(float(np.max(np.abs(vel.u - v_prev[0]))),
                      float(np.max(np.abs(vel.w - v_prev[1]))))
            residuals.append(res)
            if res <= config.tol_fp:
                return result
        v_prev = (vel.u.copy(), vel.w.copy())
    raise FixedPointError(
        f"Picard iteration did not reach {config.tol_fp:g} "
        f"(last residual {residuals[-1] if residuals else float('nan')})",
        residuals)


def _estimate_cutoff(scenario, config):
    """Pilot run estimating the sup bound B, then R := 2B."""
    pilot = dataclasses.replace(config, R=1e300,
                                T=min(config.T, max(config.theta,
                                                    10 * config.dt)))
    traj = run_simulation(scenario, pilot)
    B = max(float(np.max(np.abs(s.omega))) for s in traj.states)
    B = max([B] + [float(np.max(np.abs(s.omega_bc))) for s in traj.states
                   if s.omega_bc is not None])
    return 2.0 * max(B, 1e-12)


def run_simulation(scenario, config):
    """Time loop from 0 to T; returns the trajectory at output cadence."""
    if config.R == "auto":
        R = _estimate_cutoff(scenario, config)
    else:
        R = float(config.R)
    dom = scenario.domain
    ws = _Workspace(scenario, config)
    omega = np.where(dom.mask, scenario.omega0, 0.0)
    history = transport.VorticityHistory(config.theta, config.dt)
    history.push(0.0, omega)
    avg0 = transport.timelag_cutoff_average(history, config.theta, R, t=0.0)
    if np.ndim(avg0) == 0:
        avg0 = np.zeros_like(omega)
    h, H, vel, a, A = _elliptic_solve(scenario, config, ws, avg0, 0.0)
    bc0 = _boundary_bc(scenario, 0.0, vel)
    state = StateFields(t=0.0, omega=omega, h=h, H=H, velocity=vel, avg=avg0,
                        omega_bc=bc0, picard_residuals=[])
    times = [0.0]
    states = [state]
    step = 0
    t = 0.0
    while t < config.T - 1e-12:
        dt = min(config.dt, config.T - t)
        if config.adaptive_dt:
            dx = dom.grid.dx
            vmax = max(state.velocity.max_speed(), 1e-14)
            dt_cfl = config.cfl_target / (2 * vmax / dx
                                          + 4 * config.nu / dx ** 2)
            dt = min(dt, dt_cfl)
        state = solve_viscous_step(scenario, config, ws, state, history, dt, R)
        history.push(state.t, state.omega)
        t = state.t
        step += 1
        if step % config.output_every == 0 or t >= config.T - 1e-12:
            times.append(t)
            states.append(state)
    return Trajectory(times=times, states=states, scenario=scenario,
                      config=config)


# ---------------------------------------------------------------------------
# parameter studies


def _max_workers():
    try:
        return max(1, int(os.environ.get("LAKESIM_THREADS", "1")))
    except ValueError:
        return 1


def _final_omega(traj):
    return traj.states[-1].omega


def viscosity_study(scenario, config, nu_list):
    """Runs at each nu; reports sup norms and pairwise final-time L2 gaps."""
    nu_list = list(nu_list)
    if any(b >= a for a, b in zip(nu_list, nu_list[1:])):
        raise ValueError("nu_list must be strictly decreasing")

    def one(nu):
        return run_simulation(scenario, dataclasses.replace(config, nu=nu))

    with concurrent.futures.ThreadPoolExecutor(_max_workers()) as ex:
        trajs = list(ex.map(one, nu_list))
    dom = scenario.domain
    area = dom.grid.cell_area
    sup = [max(float(np.max(np.abs(s.omega))) for s in tr.states)
           for tr in trajs]
    diffs = []
    for t1, t2 in zip(trajs, trajs[1:]):
        d = _final_omega(t1) - _final_omega(t2)
        diffs.append(float(np.sqrt(np.sum(d[dom.mask] ** 2) * area)))
    return {"nu": nu_list, "sup_omega": sup, "pairwise_l2": diffs,
            "sup_variation": (max(sup) - min(sup)) / max(max(sup), 1e-300),
            "trajectories": trajs}


def _mollified_scenario(scenario, theta):
    """Data regularized at scale theta: smoothed interior fields, initial
    vorticity ramped to zero near Gamma, boundary data ramped in time."""
    dom = scenario.domain
    om0 = mollify_data(dom, scenario.omega0, theta, mode="initial")
    kap = mollify_data(dom, scenario.kappa_at(0.0), theta)
    rgb = mollify_data(dom, scenario.rotGb_at(0.0), theta)
    def ramp_arc(spec):
        def f(s, t=0.0):
            from .scenario import _arc_eval
            return time_ramp(theta, t) * _arc_eval(dom, spec, t)
        return f

    def A_ramped(x, y, t=0.0):
        # keep the compatibility balance: A scales with the same time ramp
        del x, y
        return time_ramp(theta, t) * scenario.A_at(t)

    return dataclasses.replace(
        scenario, omega0=om0, _kappa=kap, _rotGb=rgb,
        _a=ramp_arc(scenario._a), _alpha=ramp_arc(scenario._alpha),
        _eta=ramp_arc(scenario._eta), _A=A_ramped)


def theta_study(scenario, config, theta_list, q=None):
    """Runs with lag/mollification scale theta; checks the uniform bound.

    Reports the L_infty(0,T; L_p) vorticity norm per theta, the pairwise
    final-time L2 differences and the discrete Gronwall bound derived from
    measured data sizes.
    """
    from .diagnostics import weighted_lp_norm, gronwall_data_series

    theta_list = list(theta_list)
    if any(b >= a for a, b in zip(theta_list, theta_list[1:])):
        raise ValueError("theta_list must be strictly decreasing")
    q = float(q if q is not None else scenario.p)

    def one(theta):
        sc = _mollified_scenario(scenario, theta)
        cfg = dataclasses.replace(config, theta=theta)
        return run_simulation(sc, cfg)

    with concurrent.futures.ThreadPoolExecutor(_max_workers()) as ex:
        trajs = list(ex.map(one, theta_list))
    dom = scenario.domain
    area = dom.grid.cell_area
    norms = [max(weighted_lp_norm(s.omega[dom.mask], scenario.b_cells[dom.mask],
                                  q, area) for s in tr.states)
             for tr in trajs]
    diffs = []
    for t1, t2 in zip(trajs, trajs[1:]):
        d = _final_omega(t1) - _final_omega(t2)
        diffs.append(float(np.sqrt(np.sum(d[dom.mask] ** 2) * area)))
    bounds = []
    for theta, tr in zip(theta_list, trajs):
        times, D, B, y0 = gronwall_data_series(tr, q)
        series = discrete_gronwall_bound(y0, D, B, theta, times)
        bounds.append(float(np.max(series)) ** (1.0 / q))
    return {"theta": theta_list, "linf_lp": norms, "pairwise_l2": diffs,
            "gronwall_bound": bounds, "trajectories": trajs}


# ---------------------------------------------------------------------------
# discrete Gronwall lemma


def discrete_gronwall_bound(y0, D, B, theta, times):
    """Bound series 2 exp(int D) [y0 + int B exp(-int D)] on ``times``.

    Valid for lagged integral inequalities y(t) <= y0 + int (D u + B) with
    u the trailing theta-average of y, under 2 theta sup D <= 1/2.
    """
    D = np.asarray(D, dtype=float)
    B = np.asarray(B, dtype=float)
    times = np.asarray(times, dtype=float)
    if np.any(D < 0) or np.any(B < 0):
        raise ValueError("D and B must be non-negative")
    if y0 < 0:
        raise ValueError("y0 must be non-negative")
    if D.size and 2.0 * theta * float(np.max(D)) > 0.5:
        raise ValueError("lag too large: require 2*theta*sup(D) <= 1/2")
    dts = np.diff(times)
    intD = np.concatenate([[0.0], np.cumsum(0.5 * dts * (D[:-1] + D[1:]))])
    g = B * np.exp(-intD)
    intB = np.concatenate([[0.0], np.cumsum(0.5 * dts * (g[:-1] + g[1:]))])
    return 2.0 * np.exp(intD) * (y0 + intB)


def lagged_integral_solution(y0, D, B, theta, times):
    """Brute-force solution of y(t) = y0 + int_0^t (D u + B), the equality
    case of the lagged inequality; the oracle for the bound above."""
    times = np.asarray(times, dtype=float)
    D = np.asarray(D, dtype=float)
    B = np.asarray(B, dtype=float)
    y = np.empty_like(times)
    y[0] = y0
    for k in range(1, times.size):
        dt = times[k] - times[k - 1]
        # trailing average of y over [t - theta, t] with y = y0 before 0
        def u_of(idx):
            t = times[idx]
            lo = t - theta
            ts = times[: idx + 1]
            ys = y[: idx + 1]
            if lo <= ts[0]:
                # y extends flat at y0 for negative times... no: y = 0 for
                # times < 0 is the convention used by the transported field,
                # but the lemma's u averages y itself over the clipped window
                grid = ts[ts >= lo]
                vals = ys[ts >= lo]
                if lo < 0:
                    acc = np.trapezoid(vals, grid)
                    return acc / theta  # zero contribution before t=0
                return np.trapezoid(vals, grid) / max(t - lo, 1e-300)
            j = np.searchsorted(ts, lo)
            gr = np.concatenate([[lo], ts[j:]])
            vl = np.concatenate([[np.interp(lo, ts, ys)], ys[j:]])
            return np.trapezoid(vl, gr) / theta
        u_prev = u_of(k - 1)
        # predictor-corrector on the integral equation
        y[k] = y[k - 1] + dt * (D[k - 1] * u_prev + B[k - 1])
        u_new = u_of(k)
        y[k] = y[k - 1] + 0.5 * dt * (D[k - 1] * u_prev + B[k - 1]
                                      + D[k] * u_new + B[k])
    return y
