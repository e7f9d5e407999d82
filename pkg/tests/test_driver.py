import numpy as np
import pytest

from lakesim.driver import (SolverConfig, discrete_gronwall_bound,
                            lagged_integral_solution, run_simulation,
                            theta_study, viscosity_study)
from lakesim.scenario import make_scenario


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(nu=-1.0)
    with pytest.raises(ValueError):
        SolverConfig(theta=0.0)
    with pytest.raises(ValueError):
        SolverConfig(R=-2.0)
    cfg = SolverConfig(R="auto")
    assert cfg.R == "auto"


def test_zero_data_stays_zero(disk32):
    sc = make_scenario(disk32, b=1.0, omega0=0.0)
    traj = run_simulation(sc, SolverConfig(theta=0.1, R=1.0, T=0.05, dt=1e-2))
    for st in traj.states:
        assert np.max(np.abs(st.omega)) == 0.0
        assert st.velocity.max_speed() == 0.0


def test_single_step_run(disk32):
    sc = make_scenario(disk32, b=1.0, omega0=1.0)
    traj = run_simulation(sc, SolverConfig(theta=0.1, R=5.0, T=1e-2, dt=1e-2))
    assert len(traj.times) == 2
    assert traj.times[-1] == pytest.approx(1e-2)


def test_output_cadence(disk32):
    sc = make_scenario(disk32, b=1.0, omega0=1.0)
    traj = run_simulation(sc, SolverConfig(theta=0.1, R=5.0, T=0.1, dt=1e-2,
                                           output_every=5))
    # initial state + outputs at steps 5 and 10
    assert len(traj.times) == 3


def test_auto_cutoff_runs(disk32):
    sc = make_scenario(disk32, b=1.0, omega0=2.0)
    traj = run_simulation(sc, SolverConfig(theta=0.05, R="auto", T=0.05,
                                           dt=1e-2))
    assert np.allclose(traj.states[-1].omega[disk32.mask], 2.0, atol=1e-10)


def test_picard_residuals_recorded(disk32):
    g = disk32.grid
    xc, yc = np.meshgrid(g.xc, g.yc, indexing="ij")
    sc = make_scenario(disk32, b=1.0, omega0=np.sin(2 * xc) * np.cos(yc))
    traj = run_simulation(sc, SolverConfig(theta=0.1, R=5.0, T=0.02, dt=1e-2))
    res = traj.states[-1].picard_residuals
    assert len(res) >= 1
    assert res[-1] <= SolverConfig().tol_fp


# ---------------------------------------------------------------------------
# discrete Gronwall lemma


def test_gronwall_bound_no_growth():
    times = np.linspace(0, 1, 101)
    D = np.zeros_like(times)
    B = np.ones_like(times)
    bound = discrete_gronwall_bound(2.0, D, B, 0.1, times)
    # with D = 0 the bound is 2*(y0 + int B) = 2*(2 + t)
    assert np.allclose(bound, 2.0 * (2.0 + times), atol=1e-12)


def test_gronwall_bound_validation():
    times = np.linspace(0, 1, 11)
    with pytest.raises(ValueError):
        discrete_gronwall_bound(-1.0, np.zeros(11), np.zeros(11), 0.1, times)
    with pytest.raises(ValueError):
        discrete_gronwall_bound(1.0, -np.ones(11), np.zeros(11), 0.1, times)
    with pytest.raises(ValueError):
        # 2*theta*sup D > 1/2
        discrete_gronwall_bound(1.0, 10 * np.ones(11), np.zeros(11),
                                0.1, times)


def test_lagged_solution_small_theta_matches_ode():
    """As theta -> 0 the lagged equation approaches y' = D y + B."""
    times = np.linspace(0, 1, 2001)
    Dv, Bv, y0 = 1.5, 0.7, 0.3
    D = np.full_like(times, Dv)
    B = np.full_like(times, Bv)
    y = lagged_integral_solution(y0, D, B, 1e-3, times)
    exact = (y0 + Bv / Dv) * np.exp(Dv * times) - Bv / Dv
    assert np.max(np.abs(y - exact)) < 5e-3


def test_lagged_solution_below_bound(rng):
    for _ in range(5):
        times = np.linspace(0.0, rng.uniform(0.5, 2.0), 300)
        D = rng.uniform(0.0, 2.0) * np.ones_like(times)
        B = rng.uniform(0.0, 1.0) * np.ones_like(times)
        theta = min(rng.uniform(0.01, 0.2), 0.25 / max(D.max(), 1e-9))
        y0 = rng.uniform(0.0, 2.0)
        y = lagged_integral_solution(y0, D, B, theta, times)
        bound = discrete_gronwall_bound(y0, D, B, theta, times)
        assert np.all(y <= bound + 1e-12)


# ---------------------------------------------------------------------------
# studies


def test_studies_require_decreasing_lists(disk32):
    sc = make_scenario(disk32, b=1.0, omega0=1.0)
    cfg = SolverConfig(theta=0.1, R=5.0, T=0.02, dt=1e-2)
    with pytest.raises(ValueError):
        viscosity_study(sc, cfg, [1e-3, 1e-2])
    with pytest.raises(ValueError):
        theta_study(sc, cfg, [0.05, 0.1])


def test_viscosity_study_report_shape(disk32):
    g = disk32.grid
    xc, yc = np.meshgrid(g.xc, g.yc, indexing="ij")
    sc = make_scenario(disk32, b=1.0, omega0=np.sin(2 * xc) * np.cos(yc),
                       kappa=0.5)
    cfg = SolverConfig(theta=0.1, R=5.0, T=0.05, dt=5e-3)
    rep = viscosity_study(sc, cfg, [1e-3, 1e-4])
    assert len(rep["sup_omega"]) == 2
    assert len(rep["pairwise_l2"]) == 1
    assert rep["sup_variation"] >= 0.0


def test_theta_study_report_shape(disk32):
    g = disk32.grid
    xc, yc = np.meshgrid(g.xc, g.yc, indexing="ij")
    sc = make_scenario(disk32, b=1.0, omega0=np.sin(2 * xc) * np.cos(yc),
                       kappa=0.5)
    cfg = SolverConfig(theta=0.1, R=5.0, T=0.1, dt=5e-3)
    rep = theta_study(sc, cfg, [0.1, 0.05], q=2.0)
    assert len(rep["linf_lp"]) == 2
    assert len(rep["gronwall_bound"]) == 2
    assert all(v > 0 for v in rep["gronwall_bound"])
