"""Acceptance suite: one test per release criterion, tolerances pinned.

These are end-to-end properties (convergence orders, exact discrete
identities, stability bounds, parameter-study trends); the unit suites
cover the underlying pieces.
"""

import time

import numpy as np
import pytest

from lakesim import diagnostics, elliptic, transport, verify
from lakesim.driver import (SolverConfig, discrete_gronwall_bound,
                            lagged_integral_solution, run_simulation,
                            theta_study, viscosity_study)
from lakesim.geometry import Disk, build_domain
from lakesim.scenario import make_scenario


def _smooth(domain, rng, amp=1.0):
    g = domain.grid
    xc, yc = np.meshgrid(g.xc, g.yc, indexing="ij")
    kx, ky = rng.integers(1, 4, 2)
    p1, p2 = rng.uniform(0, 2 * np.pi, 2)
    return amp * np.sin(kx * xc + p1) * np.cos(ky * yc + p2)


def test_acceptance_01_dirichlet_second_order():
    errs = {}
    for res in (64, 128):
        t0 = time.time()
        dom = build_domain(Disk(radius=1.0), res)
        h, _ = elliptic.solve_dirichlet_weighted(
            dom, np.ones((res, res)), np.ones((res + 1, res + 1)))
        assert time.time() - t0 < 10.0
        xn, yn = np.meshgrid(dom.grid.xn, dom.grid.yn, indexing="ij")
        exact = (1 - xn ** 2 - yn ** 2) / 4
        errs[res] = float(np.max(np.abs((h - exact)[dom.node_mask])))
    ratio = errs[64] / errs[128]
    assert 3.2 <= ratio <= 4.8


def test_acceptance_02_neumann_mms_and_compatibility():
    from lakesim.geometry import Rectangle
    errs = {}
    for res in (64, 128):
        dom = build_domain(Rectangle(width=2.0, height=2.0), res)
        a = dom.boundary.normal[:, 0]
        H, _ = elliptic.solve_neumann_weighted(
            dom, np.ones((res, res)), np.zeros((res, res)), a)
        xc, _ = np.meshgrid(dom.grid.xc, dom.grid.yc, indexing="ij")
        exact = xc - xc[dom.mask].mean()
        errs[res] = float(np.max(np.abs((H - exact)[dom.mask])))
    # H* = x is reproduced exactly on the aligned grid at any resolution
    assert errs[64] < 1e-8 and errs[128] < 1e-8

    dom = build_domain(Disk(radius=1.0), 64)
    with pytest.raises(elliptic.CompatibilityError):
        elliptic.solve_neumann_weighted(dom, np.ones((64, 64)),
                                        np.zeros((64, 64)),
                                        np.ones(dom.boundary.m))
    resid = elliptic.compatibility_residual_fields(
        dom, np.ones(dom.boundary.m), np.ones(dom.boundary.m),
        np.zeros((64, 64)))
    assert abs(resid - 2 * np.pi) <= 1e-6


def test_acceptance_03_velocity_identities_random():
    rng = np.random.default_rng(7)
    res = 64
    dom = build_domain(Disk(radius=1.0), res)
    tol_lin = 1e-9
    for trial in range(10):
        b = 1.5 + _smooth(dom, rng, 0.4)
        xn, yn = np.meshgrid(dom.grid.xn, dom.grid.yn, indexing="ij")
        kx, ky = rng.integers(1, 4, 2)
        rhs = np.where(dom.node_mask, np.cos(kx * xn) * np.sin(ky * yn), 0.0)
        A = _smooth(dom, rng, 0.3)
        barc = np.full(dom.boundary.m, float(b[dom.mask].mean()))
        c = float(np.sum(A[dom.mask]) * dom.grid.cell_area
                  / dom.boundary.integrate(barc))
        a = np.full(dom.boundary.m, c)
        # discrete compatibility: shift A to balance the stair-face flux
        f = dom.faces
        flux = float(np.sum(barc[f.arc_index] * a[f.arc_index] * f.proj)
                     * dom.grid.dx)
        area = dom.grid.cell_area
        A = A + (flux - np.sum(A[dom.mask]) * area) / (dom.mask.sum() * area)
        dop = elliptic.build_dirichlet_operator(dom, b)
        nop = elliptic.build_neumann_operator(dom, b)
        h, _ = elliptic.solve_dirichlet_weighted(dom, b, rhs, operator=dop,
                                                 tol=tol_lin)
        H, _ = elliptic.solve_neumann_weighted(dom, b, A, a, b_arc=barc,
                                               operator=nop, tol=tol_lin,
                                               tol_comp=1e-2)
        vel = elliptic.reconstruct_velocity(dom, b, h, H, dir_op=dop,
                                            neu_op=nop, a_arc=a, b_arc=barc)
        cr = np.linalg.norm(elliptic.curl_residual(dom, dop, vel, rhs)) \
            / np.linalg.norm(rhs[dom.node_mask])
        dr = np.linalg.norm(elliptic.divergence_residual(dom, vel, A)) \
            / max(np.linalg.norm(A[dom.mask]), 1.0)
        assert cr <= 10 * tol_lin, f"trial {trial}: curl {cr:.2e}"
        assert dr <= 10 * tol_lin, f"trial {trial}: divergence {dr:.2e}"


def test_acceptance_04_rigid_rotation_steady():
    res = 128
    dom = build_domain(Disk(radius=1.0), res)
    sc = make_scenario(dom, b=1.0, omega0=2.0)
    traj = run_simulation(sc, SolverConfig(theta=0.1, R=10.0, T=1.0, dt=1e-2,
                                           output_every=10))
    drift = max(float(np.max(np.abs(s.omega[dom.mask] - 2.0)))
                for s in traj.states)
    assert drift <= 1e-6
    # boundary vorticity converts the slip law back to the interior value
    bc_err = max(float(np.max(np.abs(s.omega_bc - 2.0)))
                 for s in traj.states if s.t > 0)
    assert bc_err <= 1e-3


def test_acceptance_05_friction_decay():
    res = 48
    dom = build_domain(Disk(radius=1.0), res)
    g = dom.grid
    xc, yc = np.meshgrid(g.xc, g.yc, indexing="ij")
    om0 = np.where(dom.mask, np.exp(-2 * (xc ** 2 + yc ** 2)), 0.0)
    om = om0.copy()
    n = res
    vel = elliptic.Velocity(u=np.zeros((n + 1, n)), w=np.zeros((n, n + 1)),
                            bu=np.zeros((n + 1, n)), bw=np.zeros((n, n + 1)),
                            cell=np.zeros((n, n, 2)))
    b = np.ones((n, n))
    A = np.zeros((n, n))
    dt = 1e-3
    for _ in range(1000):
        om = transport.step_vorticity(dom, om, vel, b, -om, A, 0.0, dt)
    err = float(np.max(np.abs(om - om0 * np.exp(-1.0))[dom.mask]))
    assert err <= 1e-3


def test_acceptance_06_maximum_principle_randomized():
    rng = np.random.default_rng(11)
    dom = build_domain(Disk(radius=1.0), 32)
    k2 = dom.boundary.curvature * 2.0
    L = dom.boundary.length
    for trial in range(20):
        om0 = _smooth(dom, rng, float(rng.uniform(0.3, 1.0)))
        kappa = float(rng.uniform(0.0, 1.0))
        # alpha = 2k makes the slip coefficient vanish; the remaining
        # boundary source eta/b stays inside [-1, 1]
        eta = float(rng.uniform(-1.0, 1.0)) \
            * np.sin(2 * np.pi * rng.integers(1, 3) * dom.boundary.s / L)
        nu = float(rng.choice([0.0, 1e-4]))
        sc = make_scenario(dom, b=1.0, omega0=om0, kappa=kappa,
                           alpha=k2, eta=eta)
        traj = run_simulation(sc, SolverConfig(
            theta=0.1, R=5.0, T=0.2, dt=5e-3, nu=nu, output_every=5))
        sup = max(float(np.max(np.abs(s.omega))) for s in traj.states)
        assert sup <= 1.0 + 1e-10, f"trial {trial}: sup {sup!r}"


def test_acceptance_07_gronwall_monitor_randomized():
    rng = np.random.default_rng(42)
    dom = build_domain(Disk(radius=1.0), 48)
    L = dom.boundary.length
    for trial in range(10):
        kx, ky = (int(v) for v in rng.integers(1, 4, 2))

        def bfun(x, y, t=0.0, kx=kx, ky=ky):
            return 1.5 + 0.4 * np.sin(kx * x) * np.cos(ky * y)

        om0 = _smooth(dom, rng, 1.0)
        kap = 0.5 + _smooth(dom, rng, 0.4)
        rgb = _smooth(dom, rng, 0.3)
        ph = float(rng.uniform(0, 2 * np.pi))
        a_vals = 0.1 * np.sin(4 * np.pi * dom.boundary.s / L + ph)
        barc = bfun(dom.boundary.xy[:, 0], dom.boundary.xy[:, 1])
        a_vals = a_vals - dom.boundary.integrate(barc * a_vals) \
            / dom.boundary.integrate(barc)
        sc = make_scenario(dom, b=bfun, a=a_vals, alpha=0.3, eta=0.2,
                           kappa=kap, rotGb=rgb, omega0=om0)
        traj = run_simulation(sc, SolverConfig(theta=0.1, R=20.0, T=0.3,
                                               dt=5e-3, output_every=6))
        for q in (2.0, 4.0):
            rep = diagnostics.gronwall_monitor(traj, q)
            worst = float(np.min(rep.slack)) / rep.scale
            assert rep.passed, f"trial {trial}, q={q}: slack {worst:.2e}"


def _fixed_study_scenario(res=48):
    dom = build_domain(Disk(radius=1.0), res)
    g = dom.grid
    xc, yc = np.meshgrid(g.xc, g.yc, indexing="ij")
    b = 1.5 + 0.3 * np.cos(xc) * np.sin(yc)
    om0 = np.sin(2 * xc) * np.cos(yc)
    kap = 0.4 + 0.2 * np.sin(xc + yc)
    return make_scenario(dom, b=b, omega0=om0, kappa=kap, alpha=0.3, eta=0.2)


def test_acceptance_08_vanishing_viscosity():
    sc = _fixed_study_scenario()
    cfg = SolverConfig(theta=0.1, R=10.0, T=0.4, dt=5e-3, output_every=4)
    rep = viscosity_study(sc, cfg, [1e-2, 1e-3, 1e-4])
    assert rep["sup_variation"] < 0.10
    diffs = rep["pairwise_l2"]
    assert all(b <= a + 1e-14 for a, b in zip(diffs, diffs[1:]))


def test_acceptance_09_vanishing_lag():
    sc = _fixed_study_scenario(res=32)
    cfg = SolverConfig(theta=0.1, R=10.0, T=0.4, dt=5e-3, output_every=4)
    rep = theta_study(sc, cfg, [0.2, 0.1, 0.05], q=2.0)
    for norm, bound in zip(rep["linf_lp"], rep["gronwall_bound"]):
        assert norm <= 2.0 * bound
    diffs = rep["pairwise_l2"]
    assert all(b <= a + 1e-14 for a, b in zip(diffs, diffs[1:]))


def test_acceptance_10_gronwall_lemma_brute_force():
    rng = np.random.default_rng(7)
    worst = -np.inf
    for _ in range(100):
        times = np.linspace(0.0, float(rng.uniform(0.5, 3.0)), 400)
        D = rng.uniform(0.0, 2.0) * (1 + 0.5 * np.sin(
            rng.uniform(1, 5) * times))
        B = rng.uniform(0.0, 1.0) * (1 + 0.5 * np.cos(
            rng.uniform(1, 5) * times))
        theta = min(float(rng.uniform(0.01, 0.2)),
                    0.25 / max(float(D.max()), 1e-9))
        y0 = float(rng.uniform(0.0, 2.0))
        bound = discrete_gronwall_bound(y0, D, B, theta, times)
        y = lagged_integral_solution(y0, D, B, theta, times)
        worst = max(worst, float(np.max(y - bound)))
    assert worst <= 0.0


def test_acceptance_11_green_kernel(disk16, rng):
    b = 1.5 + _smooth(disk16, rng, 0.3)
    gk = elliptic.greens_kernel(disk16, b)
    assert np.max(np.abs(gk.K - gk.K.T)) <= 1e-10
    rhs = np.where(disk16.node_mask,
                   rng.standard_normal(disk16.node_mask.shape), 0.0)
    h1 = gk.apply(rhs)
    h2, _ = elliptic.solve_dirichlet_weighted(disk16, b, rhs, tol=1e-12)
    assert np.max(np.abs(h1 - h2)) <= 1e-8 * np.max(np.abs(h2))


def test_acceptance_12_weak_residual():
    centers = [((0.1, -0.2), 0.6), ((-0.3, 0.2), 0.5), ((0.0, 0.0), 0.8)]
    T = 0.5
    resids = []
    trajs = {}
    for res in (16, 32, 64):
        dom = build_domain(Disk(radius=1.0), res)
        sc = make_scenario(dom, b=1.0, omega0=2.0)
        traj = run_simulation(sc, SolverConfig(theta=0.1, R=10.0, T=T,
                                               dt=0.4 / res, output_every=1))
        trajs[res] = traj
        worst = max(diagnostics.weak_residual(
            traj, diagnostics.interior_test_function(c, r, T))
            for c, r in centers)
        resids.append(worst)
    # at least first-order decrease under refinement of dx and dt
    assert resids[0] / resids[1] >= 2.0
    assert resids[1] / resids[2] >= 2.0
    # kernel form agrees with the classical one on the coarse grid
    traj = trajs[16]
    gk = elliptic.greens_kernel(traj.scenario.domain,
                                traj.scenario.b_cells)
    for c, r in centers:
        tf = diagnostics.interior_test_function(c, r, T)
        rc = diagnostics.weak_residual(traj, tf)
        rk = diagnostics.weak_residual(traj, tf, form="kernel", kernel=gk)
        assert abs(rc - rk) <= 1e-4


def test_acceptance_13_verify_suite():
    t0 = time.time()
    failures = verify.run_all(verbose=False)
    assert failures == 0
    assert time.time() - t0 < 300.0
