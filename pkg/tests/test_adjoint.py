import numpy as np
import pytest

from tidalopt.adjoint import AdjointSources, duality_check, solve_adjoint, solve_tangent, taylor_test
from tidalopt.cost import smooth_random_field
from tidalopt.forward import solve_forward
from tidalopt.scenarios import default_model


@pytest.fixture(scope="module")
def model():
    return default_model(16, 16, steps=32)


def random_sources(m, rng):
    g, n = m.grid, m.time.steps
    return AdjointSources(
        rng.standard_normal((n + 1, 2) + g.shape),
        rng.standard_normal((n + 1,) + g.shape),
        rng.standard_normal((2,) + g.shape),
        rng.standard_normal(g.shape),
    )


@pytest.mark.parametrize("mode", ["exact", "paper"])
def test_duality_identity(model, mode):
    rng = np.random.default_rng(0)
    g, n = model.grid, model.time.steps
    base = solve_forward(model)
    v = rng.standard_normal((n + 1, 2) + g.shape)
    w0, eta0 = rng.standard_normal((2,) + g.shape), rng.standard_normal(g.shape)
    assert duality_check(model, base, v, random_sources(model, rng), w0, eta0, mode) <= 1e-10


def test_duality_with_zero_control_is_zero(model):
    base = solve_forward(model)
    assert duality_check(model, base, None, AdjointSources()) == 0.0


def test_zero_tangent_and_zero_adjoint(model):
    base = solve_forward(model)
    tan = solve_tangent(model, base)
    assert not tan.u.any() and not tan.xi.any()
    adj = solve_adjoint(model, base, AdjointSources())
    assert not adj.p.any() and not adj.phi.any() and not adj.p_initial.any()


def test_tangent_equals_difference_for_linear_dynamics():
    m = default_model(16, 16, steps=32, r=0.0)
    rng = np.random.default_rng(1)
    v = smooth_random_field(m.grid, rng, count=33)
    base = solve_forward(m)
    diff = solve_forward(m, v)
    tan = solve_tangent(m, base, v)
    assert np.abs(diff.u - base.u - tan.u).max() <= 1e-9
    assert np.abs(diff.xi - base.xi - tan.xi).max() <= 1e-9


def test_taylor_slopes(model):
    rng = np.random.default_rng(2)
    u = smooth_random_field(model.grid, rng, count=33)
    v = smooth_random_field(model.grid, rng, count=33)
    exact = taylor_test(model, u, v)
    assert exact.slope == pytest.approx(2.0, abs=0.1)
    assert exact.slope_l2_h1 == pytest.approx(2.0, abs=0.1)
    paper = taylor_test(model, u, v, mode="paper")
    assert paper.slope < 1.5


def test_taylor_initial_data(model):
    rng = np.random.default_rng(3)
    res = taylor_test(model, smooth_random_field(model.grid, rng), smooth_random_field(model.grid, rng), initial=True)
    assert res.slope == pytest.approx(2.0, abs=0.1)


def test_taylor_reports_exact_linearization():
    m = default_model(12, 12, steps=16, r=0.0)
    rng = np.random.default_rng(4)
    res = taylor_test(m, smooth_random_field(m.grid, rng, count=17), smooth_random_field(m.grid, rng, count=17))
    assert res.exact_to_rounding and res.slope is None
