import numpy as np
import pytest

from tidalopt.forward import (
    TidalModel,
    TimeGrid,
    cfl_max_dt,
    energy_bound_check,
    energy_equality_residual,
    solve_forward,
)
from tidalopt.grid import Grid
from tidalopt.model import Bathymetry, PhysicalParams
from tidalopt.scenarios import constant_depth_model, default_model, gaussian_bump


def zero_model(n=12, steps=16):
    g = Grid(n, n)
    return TidalModel(g, PhysicalParams(0.1, 0.5, 0.5), Bathymetry.constant(g), TimeGrid(0.25, steps))


def test_cfl_examples():
    g = Grid(65, 65)
    assert cfl_max_dt(g, Bathymetry.constant(g, 1.0), 0.5) == pytest.approx(0.005524, rel=1e-3)
    assert cfl_max_dt(g, Bathymetry.constant(g, 4.0)) == pytest.approx(cfl_max_dt(g, Bathymetry.constant(g)) / 2)
    g = Grid(11, 11)
    assert cfl_max_dt(g, Bathymetry.constant(g, 2.0)) == pytest.approx(0.05)
    with pytest.raises(ValueError):
        cfl_max_dt(g, Bathymetry.constant(g), 1.5)


def test_model_rejects_cfl_violation_with_bound():
    g = Grid(11, 11)
    with pytest.raises(ValueError, match="0.0707107"):
        TidalModel(g, PhysicalParams(0.1), Bathymetry.constant(g), TimeGrid(1.0, 2))


def test_model_rejects_bad_initial_velocity():
    g = Grid(6, 6)
    with pytest.raises(ValueError):
        TidalModel(g, PhysicalParams(0.1), Bathymetry.constant(g), TimeGrid(0.1, 4), u0=np.ones((2, 6, 6)))


def test_zero_data_gives_zero_trajectory():
    m = zero_model()
    traj = solve_forward(m)
    assert not traj.u.any() and not traj.xi.any()
    assert not energy_equality_residual(m, traj).any()
    assert np.all(energy_bound_check(m, traj) == 0)


def test_lake_at_rest():
    m = zero_model().replace(xi0=np.full((12, 12), 0.3))
    traj = solve_forward(m)
    assert np.abs(traj.u).max() < 1e-14
    assert np.allclose(traj.xi, 0.3, atol=1e-14)


def test_initial_data_control_is_initial_condition():
    m = default_model(12, 12, steps=16)
    u0 = m.grid.dirichlet(np.random.default_rng(0).standard_normal((2, 12, 12)))
    a = solve_forward(m, u0=u0)
    b = solve_forward(m.replace(u0=u0))
    assert np.array_equal(a.u, b.u) and np.array_equal(a.xi, b.xi)


def test_snapshots_stay_dirichlet():
    m = default_model(12, 12, steps=16)
    control = np.random.default_rng(1).standard_normal((17, 2, 12, 12))
    traj = solve_forward(m, control)
    assert m.grid.is_dirichlet(traj.u)


def test_nonfinite_forcing_is_flagged():
    m = zero_model()
    forcing = m.forcing.copy()
    forcing[3, 0, 5, 5] = np.nan
    with pytest.raises(ValueError):
        m.replace(forcing=forcing)
    traj = solve_forward(m)
    # bypass construction-time validation to reach the monitors
    object.__setattr__(m, "forcing", forcing)
    with pytest.raises(FloatingPointError):
        energy_bound_check(m, traj)
    with pytest.raises(FloatingPointError):
        solve_forward(m)


def manufactured_error(n, steps, r=0.4, alpha=0.2, beta=0.7, depth=1.0, t_final=0.25):
    # u = e^-t (s11, s21) with s_jk = sin(j pi x) sin(k pi y); xi from the continuity equation
    g = Grid(n, n)
    x, y = g.mesh
    pi = np.pi
    s11, s21 = np.sin(pi * x) * np.sin(pi * y), np.sin(2 * pi * x) * np.sin(pi * y)
    shape = np.stack([s11, s21])
    lap_shape = np.stack([-2 * pi**2 * s11, -5 * pi**2 * s21])
    div = pi * np.cos(pi * x) * np.sin(pi * y) + pi * np.sin(2 * pi * x) * np.cos(pi * y)
    grad_div = np.stack([
        -pi**2 * np.sin(pi * x) * np.sin(pi * y) + 2 * pi**2 * np.cos(2 * pi * x) * np.cos(pi * y),
        pi**2 * np.cos(pi * x) * np.cos(pi * y) - pi**2 * np.sin(2 * pi * x) * np.sin(pi * y),
    ])
    time = TimeGrid(t_final, steps)
    t = time.times[:, None, None, None]
    u = np.exp(-t) * shape
    xi = depth * (np.exp(-t[:, 0]) - 1.0) * div
    grad_xi = depth * (np.exp(-t) - 1.0) * grad_div
    mag = np.sqrt((u**2).sum(axis=1, keepdims=True))
    rot = np.stack([-u[:, 1], u[:, 0]], axis=1)
    f = -u - alpha * np.exp(-t) * lap_shape + beta * rot + (r / depth) * mag * u + grad_xi
    model = TidalModel(g, PhysicalParams(alpha, beta, r), Bathymetry.constant(g, depth), time,
                       forcing=f, u0=g.dirichlet(u[0]), xi0=xi[0])
    traj = solve_forward(model)
    du, dxi = traj.u[-1] - u[-1], traj.xi[-1] - xi[-1]
    return np.sqrt(g.inner(du, du) + g.inner(dxi, dxi))


def test_manufactured_solution_converges():
    errs = [manufactured_error(n, s) for n, s in ((17, 16), (33, 32), (65, 64))]
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert errs[2] < 1e-2
    assert all(1.7 < q < 4.5 for q in ratios)


@pytest.mark.parametrize("make", [default_model, constant_depth_model])
def test_energy_equality_residual_is_first_order(make):
    coarse = make(16, 16, steps=32)
    fine = make(16, 16, steps=64)
    rc = np.abs(energy_equality_residual(coarse, solve_forward(coarse))).max()
    rf = np.abs(energy_equality_residual(fine, solve_forward(fine))).max()
    assert rc / rf == pytest.approx(2.0, abs=0.3)


def test_energy_bound_holds_on_default_scenario():
    m = default_model(32, 32, t_final=1.0, steps=128)
    traj = solve_forward(m)
    assert energy_bound_check(m, traj).min() >= 0


def test_gaussian_bump_peak():
    g = Grid(21, 21)
    assert gaussian_bump(g, 0.2).max() == pytest.approx(0.2)
