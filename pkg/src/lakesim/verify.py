"""Built-in verification suite: analytic and manufactured oracles.

Each case returns (passed, detail); `run_all` prints one PASS/FAIL line
per case and returns the number of failures.  The whole suite is sized to
finish in well under five minutes.
"""

from __future__ import annotations

import time

import numpy as np

from . import diagnostics, elliptic, transport
from .driver import (SolverConfig, discrete_gronwall_bound,
                     lagged_integral_solution, run_simulation)
from .geometry import Disk, Rectangle, build_domain
from .scenario import make_scenario, mollify_data


def _zero_velocity(n):
    return elliptic.Velocity(u=np.zeros((n + 1, n)), w=np.zeros((n, n + 1)),
                             bu=np.zeros((n + 1, n)), bw=np.zeros((n, n + 1)),
                             cell=np.zeros((n, n, 2)))


def case_disk_poisson():
    errs = []
    for res in (64, 128):
        dom = build_domain(Disk(radius=1.0), res)
        h, _ = elliptic.solve_dirichlet_weighted(
            dom, np.ones((res, res)), np.ones((res + 1, res + 1)))
        xn, yn = np.meshgrid(dom.grid.xn, dom.grid.yn, indexing="ij")
        errs.append(float(np.max(np.abs(h - (1 - xn ** 2 - yn ** 2) / 4)
                                 [dom.node_mask])))
    ratio = errs[0] / errs[1]
    return 3.2 <= ratio <= 4.8, f"error ratio 64->128: {ratio:.2f}"


def case_neumann_mms():
    res = 64
    dom = build_domain(Rectangle(width=2.0, height=2.0), res)
    a = dom.boundary.normal[:, 0]
    H, _ = elliptic.solve_neumann_weighted(dom, np.ones((res, res)),
                                           np.zeros((res, res)), a)
    xc, _ = np.meshgrid(dom.grid.xc, dom.grid.yc, indexing="ij")
    err = float(np.max(np.abs(H - (xc - xc[dom.mask].mean()))[dom.mask]))
    ok = err < 1e-8
    dom2 = build_domain(Disk(radius=1.0), 64)
    try:
        elliptic.solve_neumann_weighted(dom2, np.ones((64, 64)),
                                        np.zeros((64, 64)),
                                        np.ones(dom2.boundary.m))
        return False, "incompatible data not rejected"
    except elliptic.CompatibilityError:
        pass
    resid = elliptic.compatibility_residual_fields(
        dom2, np.ones(dom2.boundary.m), np.ones(dom2.boundary.m),
        np.zeros((64, 64)))
    ok = ok and abs(resid - 2 * np.pi) <= 1e-6
    return ok, f"square H*=x err {err:.2e}; disk residual {resid:.8f}"


def case_velocity_identities():
    res = 64
    dom = build_domain(Disk(radius=1.0), res)
    xc, yc = np.meshgrid(dom.grid.xc, dom.grid.yc, indexing="ij")
    xn, yn = np.meshgrid(dom.grid.xn, dom.grid.yn, indexing="ij")
    b = 1.5 + 0.3 * np.sin(2 * xc) * np.cos(yc)
    rhs = (1.5 + 0.3 * np.sin(2 * xn) * np.cos(yn)) \
        * np.cos(3 * xn) * np.sin(2 * yn)
    A = 0.2 * np.sin(xc + yc)
    barc = 1.5 + 0.3 * np.sin(2 * dom.boundary.xy[:, 0]) \
        * np.cos(dom.boundary.xy[:, 1])
    c = float(np.sum(A[dom.mask]) * dom.grid.cell_area
              / dom.boundary.integrate(barc))
    a = np.full(dom.boundary.m, c)
    worst = 0.0
    for mode in ("node", "ghost"):
        dop = elliptic.build_dirichlet_operator(dom, b, mode=mode)
        nop = elliptic.build_neumann_operator(dom, b)
        h, _ = elliptic.solve_dirichlet_weighted(dom, b, rhs, operator=dop)
        H, _ = elliptic.solve_neumann_weighted(dom, b, A, a, b_arc=barc,
                                               operator=nop, tol_comp=1e-6)
        vel = elliptic.reconstruct_velocity(dom, b, h, H, dir_op=dop,
                                            neu_op=nop, a_arc=a, b_arc=barc)
        cr = np.linalg.norm(elliptic.curl_residual(dom, dop, vel, rhs)) \
            / np.linalg.norm(rhs[dom.node_mask])
        dr = np.linalg.norm(elliptic.divergence_residual(dom, vel, A)) \
            / np.linalg.norm(A[dom.mask])
        worst = max(worst, cr, dr)
    return worst <= 1e-8, f"worst relative identity residual {worst:.2e}"


def case_rigid_rotation():
    dom = build_domain(Disk(radius=1.0), 48)
    sc = make_scenario(dom, b=1.0, omega0=2.0)
    traj = run_simulation(sc, SolverConfig(theta=0.1, R=10.0, T=0.3,
                                           dt=5e-3, output_every=20))
    drift = max(float(np.max(np.abs(s.omega[dom.mask] - 2.0)))
                for s in traj.states)
    bc = max(float(np.max(np.abs(s.omega_bc - 2.0)))
             for s in traj.states if s.t >= 0.1)
    return drift <= 1e-6 and bc <= 5e-3, \
        f"drift {drift:.2e}, boundary vorticity err {bc:.2e}"


def case_friction_decay():
    res = 48
    dom = build_domain(Disk(radius=1.0), res)
    xc, yc = np.meshgrid(dom.grid.xc, dom.grid.yc, indexing="ij")
    om0 = np.where(dom.mask, np.exp(-2 * (xc ** 2 + yc ** 2)), 0.0)
    om = om0.copy()
    vel = _zero_velocity(res)
    b = np.ones((res, res))
    A = np.zeros((res, res))
    for _ in range(1000):
        om = transport.step_vorticity(dom, om, vel, b, -om, A, 0.0, 1e-3)
    err = float(np.max(np.abs(om - om0 * np.exp(-1.0))[dom.mask]))
    return err <= 1e-3, f"decay error at t=1: {err:.2e}"


def case_green_kernel():
    dom = build_domain(Disk(radius=1.0), 16)
    b = 1.5 + 0.3 * np.cos(np.add.outer(dom.grid.xc, dom.grid.yc))
    gk = elliptic.greens_kernel(dom, b)
    sym = float(np.max(np.abs(gk.K - gk.K.T)))
    rng = np.random.default_rng(3)
    rhs = np.where(dom.node_mask,
                   rng.standard_normal(dom.node_mask.shape), 0.0)
    h1 = gk.apply(rhs)
    h2, _ = elliptic.solve_dirichlet_weighted(dom, b, rhs, tol=1e-12)
    rel = float(np.max(np.abs(h1 - h2)) / np.max(np.abs(h2)))
    return sym <= 1e-10 and rel <= 1e-8, \
        f"symmetry {sym:.1e}, solve equivalence {rel:.1e}"


def case_gronwall_lemma():
    rng = np.random.default_rng(7)
    worst = -np.inf
    for _ in range(20):
        times = np.linspace(0.0, rng.uniform(0.5, 3.0), 400)
        D = rng.uniform(0.0, 2.0) * (1 + 0.5 * np.sin(
            rng.uniform(1, 5) * times))
        B = rng.uniform(0.0, 1.0) * (1 + 0.5 * np.cos(
            rng.uniform(1, 5) * times))
        theta = min(rng.uniform(0.01, 0.2), 0.25 / max(D.max(), 1e-9))
        y0 = rng.uniform(0.0, 2.0)
        bound = discrete_gronwall_bound(y0, D, B, theta, times)
        y = lagged_integral_solution(y0, D, B, theta, times)
        worst = max(worst, float(np.max(y - bound)))
    return worst <= 0.0, f"max(solution - bound) = {worst:.3e}"


def case_exponent_table():
    t3 = diagnostics.exponent_table(3.0)
    t2 = diagnostics.exponent_table(2.0, eps=0.5)
    t15 = diagnostics.exponent_table(1.5)
    ok = (t3.p_tilde == 3.0 and np.isinf(t3.p2) and t3.p3 == 1.5
          and t2.p_tilde == 2.5 and t2.p2 == 10.0 and t2.p3 == 2.0
          and abs(t15.p_tilde - 3.0) < 1e-12 and abs(t15.p2 - 3.0) < 1e-12)
    return ok, "tabulated exponents match the three reference cases"


def case_max_principle():
    rng = np.random.default_rng(11)
    dom = build_domain(Disk(radius=1.0), 32)
    ok = True
    worst = 0.0
    for _ in range(3):
        xc, yc = np.meshgrid(dom.grid.xc, dom.grid.yc, indexing="ij")
        cx, cy = rng.uniform(-0.4, 0.4, 2)
        om0 = np.sin(3 * (xc - cx)) * np.cos(2 * (yc - cy))
        k2 = dom.boundary.curvature * 2.0
        sc = make_scenario(dom, b=1.0, omega0=om0, kappa=rng.uniform(0, 1),
                           alpha=k2, eta=0.0)
        traj = run_simulation(sc, SolverConfig(
            theta=0.1, R=5.0, T=0.2, dt=5e-3, nu=rng.choice([0.0, 1e-4]),
            output_every=5))
        sup = max(float(np.max(np.abs(s.omega))) for s in traj.states)
        worst = max(worst, sup)
        ok = ok and sup <= 1.0 + 1e-10
    return ok, f"max sup|omega| {worst:.12f} (bound 1)"


def case_mollifier():
    dom = build_domain(Disk(radius=1.0), 32)
    c = mollify_data(dom, np.full((32, 32), 3.0), 0.2)
    ok = float(np.max(np.abs(c[dom.mask] - 3.0))) <= 1e-12
    rng = np.random.default_rng(5)
    f = np.where(dom.mask, rng.standard_normal((32, 32)), 0.0)
    area = dom.grid.cell_area
    n0 = np.sqrt(np.sum(f[dom.mask] ** 2) * area)
    sm = mollify_data(dom, f, 0.2)
    n1 = np.sqrt(np.sum(sm[dom.mask] ** 2) * area)
    ok = ok and n1 <= n0
    init = mollify_data(dom, np.ones((32, 32)), 0.15, mode="initial")
    ok = ok and float(np.max(np.abs(init[dom.sdf_cells < 0.15]))) == 0.0
    return ok, f"constant preserved, L2 {n1:.3f} <= {n0:.3f}, tube zeroed"


CASES = [
    ("disk Poisson second order", case_disk_poisson),
    ("Neumann MMS + compatibility", case_neumann_mms),
    ("velocity identities", case_velocity_identities),
    ("rigid rotation steady state", case_rigid_rotation),
    ("friction decay", case_friction_decay),
    ("Green kernel", case_green_kernel),
    ("lagged Gronwall bound", case_gronwall_lemma),
    ("exponent table", case_exponent_table),
    ("maximum principle", case_max_principle),
    ("mollifier", case_mollifier),
]


def run_all(verbose=True):
    failures = 0
    t0 = time.time()
    for name, fn in CASES:
        t1 = time.time()
        try:
            ok, detail = fn()
        except Exception as exc:  # noqa: BLE001 - report, don't crash
            ok, detail = False, f"exception: {exc!r}"
        failures += not ok
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  {name:32s} "
                  f"[{time.time() - t1:5.1f}s]  {detail}")
    if verbose:
        print(f"{len(CASES) - failures}/{len(CASES)} cases passed "
              f"in {time.time() - t0:.1f}s")
    return failures
