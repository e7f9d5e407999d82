import numpy as np
import pytest

from lakesim.scenario import make_scenario, mollify_data, time_ramp


def test_make_scenario_constant_specs(disk32):
    sc = make_scenario(disk32, b=2.0, omega0=1.0, kappa=0.5)
    assert np.allclose(sc.b_cells, 2.0)
    assert np.allclose(sc.b_arc, 2.0)
    assert np.allclose(sc.kappa_at(0.0)[disk32.mask], 0.5)
    assert np.allclose(sc.omega0[disk32.mask], 1.0)


def test_make_scenario_callable_specs(disk32):
    sc = make_scenario(disk32, b=lambda x, y: 1.0 + 0.5 * x ** 2,
                       a=lambda s: np.zeros_like(s), omega0=0.0)
    g = disk32.grid
    xc, _ = np.meshgrid(g.xc, g.yc, indexing="ij")
    assert np.allclose(sc.b_cells[disk32.mask],
                       (1.0 + 0.5 * xc ** 2)[disk32.mask])
    xy = disk32.boundary.xy
    assert np.allclose(sc.b_arc, 1.0 + 0.5 * xy[:, 0] ** 2)


def test_make_scenario_rejects_nonpositive_b(disk32):
    with pytest.raises(ValueError):
        make_scenario(disk32, b=-1.0)
    with pytest.raises(ValueError):
        make_scenario(disk32, b=lambda x, y: x)  # changes sign on the disk


def test_make_scenario_G_pair(disk32):
    sc = make_scenario(disk32, b=1.0, G=(lambda x, y: x, lambda x, y: y))
    inner = disk32.sdf_cells > 3 * disk32.grid.dx
    assert np.allclose(sc.rotGb_at(0.0)[inner], 0.0, atol=1e-10)


def test_time_dependent_arc_data(disk32):
    sc = make_scenario(disk32, b=1.0,
                       eta=lambda s, t: t * np.ones_like(s))
    assert np.allclose(sc.eta_at(0.0), 0.0)
    assert np.allclose(sc.eta_at(2.0), 2.0)


def test_mollify_preserves_constants(disk32):
    c = mollify_data(disk32, np.full(disk32.mask.shape, 3.0), 0.2)
    assert np.max(np.abs(c[disk32.mask] - 3.0)) <= 1e-12


def test_mollify_does_not_increase_l2(disk32, rng):
    f = np.where(disk32.mask, rng.standard_normal(disk32.mask.shape), 0.0)
    sm = mollify_data(disk32, f, 0.2)
    area = disk32.grid.cell_area
    n0 = np.sqrt(np.sum(f[disk32.mask] ** 2) * area)
    n1 = np.sqrt(np.sum(sm[disk32.mask] ** 2) * area)
    assert n1 <= n0


def test_mollify_initial_mode_zeroes_boundary_tube(disk32):
    init = mollify_data(disk32, np.ones(disk32.mask.shape), 0.15,
                        mode="initial")
    assert np.max(np.abs(init[disk32.sdf_cells < 0.15])) == 0.0
    assert np.max(init) <= 1.0 + 1e-12


def test_time_ramp_profile():
    theta = 0.2
    assert time_ramp(theta, 0.0) == 0.0
    assert time_ramp(theta, theta) == 0.0
    assert time_ramp(theta, 2 * theta) == 1.0
    assert time_ramp(theta, 10.0) == 1.0
    ts = np.linspace(0, 3 * theta, 50)
    vals = np.array([time_ramp(theta, t) for t in ts])
    assert np.all(np.diff(vals) >= -1e-15)
    assert np.all((vals >= 0) & (vals <= 1))
