import numpy as np
import pytest

from tidalopt.grid import Grid, rotate
from tidalopt.model import (
    Bathymetry,
    PhysicalParams,
    a_apply,
    a_tilde_apply,
    assemble_forcing,
    b_apply,
    b_jacobian_apply,
    bathymetry_constants,
    reconstruct_physical,
    reduce_physical,
    stability_k,
)


def node_field(vec, grid):
    return np.asarray(vec, float)[:, None, None] * np.ones((2,) + grid.shape)


def test_bathymetry_constants_closed_form():
    g = Grid(33, 33)
    x, _ = g.mesh
    assert bathymetry_constants(g, np.full(g.shape, 2.0)) == (2.0, 2.0, 0.0)
    lam, mu, m = bathymetry_constants(g, 2 + x)
    assert (lam, mu) == (2.0, 3.0) and m == pytest.approx(1.0, rel=1e-12)
    lam, mu, m = bathymetry_constants(g, 2 + 0.5 * np.sin(np.pi * x))
    assert lam == 2.0 and mu == pytest.approx(2.5, rel=1e-12)
    assert m == pytest.approx(np.pi / 2, rel=4 * g.dx**2)


@pytest.mark.parametrize("depth", [0.0, -1.0, np.nan])
def test_bathymetry_rejects_nonpositive(depth):
    g = Grid(5, 5)
    h = np.ones(g.shape)
    h[2, 2] = depth
    with pytest.raises(ValueError):
        Bathymetry.from_depth(g, h)


def test_params_validation():
    with pytest.raises(ValueError):
        PhysicalParams(0.0)
    with pytest.raises(ValueError):
        PhysicalParams(1.0, r=-1.0)


@pytest.mark.parametrize(
    "m, r, lam, alpha, mu, expected",
    [(0, 1, 1, 2, 1, 2.0), (0, 0, 1, 1, 1, 4.0), (1, 2, 2, 2, 3, 11.0)],
)
def test_stability_constant(m, r, lam, alpha, mu, expected):
    g = Grid(3, 3)
    bathy = Bathymetry(g, np.ones(g.shape), lam, mu, m)
    assert stability_k(PhysicalParams(alpha, 0.0, r), bathy) == pytest.approx(expected)


def test_a_apply_eigenpair():
    g = Grid(17, 17)
    x, y = g.mesh
    s = np.sin(np.pi * x) * np.sin(np.pi * y)
    u = g.dirichlet(np.stack([s, 0 * s]))
    lam_h = 8 / g.dx**2 * np.sin(np.pi * g.dx / 2) ** 2
    assert np.allclose(a_apply(g, PhysicalParams(0.3), u), 0.3 * lam_h * u, atol=1e-10)
    assert np.all(a_apply(g, PhysicalParams(0.3, 1.0), g.zeros(2)) == 0)


def test_a_tilde_is_weighted_transpose():
    # dense oracle: assemble both operators column by column on the interior nodes
    g = Grid(8, 8)
    params = PhysicalParams(1.0, 1.0)
    idx = [(c, j, i) for c in range(2) for j in range(1, 7) for i in range(1, 7)]

    def dense(op):
        cols = []
        for c, j, i in idx:
            e = g.zeros(2)
            e[c, j, i] = 1.0
            out = op(g, params, e)
            cols.append([out[k] for k in idx])
        return np.array(cols).T

    a, at = dense(a_apply), dense(a_tilde_apply)
    assert np.max(np.abs(a.T - at)) <= 1e-12 * np.abs(a).max()
    p = g.dirichlet(node_field([1.0, 0.0], g))
    expected = -g.laplacian(p) - rotate(p)
    assert np.allclose(a_tilde_apply(g, params, p), expected)
    assert np.all(a_tilde_apply(g, params, g.zeros(2)) == 0)


def test_friction_pointwise():
    g = Grid(3, 3)
    bathy = Bathymetry.constant(g, 2.0)  # gamma = 0.5 at r = 1
    z = node_field([3.0, 4.0], g)
    assert np.allclose(b_apply(bathy, 1.0, z, 0 * z)[:, 1, 1], [7.5, 10.0])
    w0 = node_field([0.2, -0.7], g)
    assert np.all(b_apply(bathy, 1.0, -w0, w0) == 0)


def test_friction_jacobian_modes():
    g = Grid(3, 3)
    bathy = Bathymetry.constant(g, 2.0)
    z, v = node_field([3.0, 4.0], g), node_field([1.0, 0.0], g)
    zero = 0 * z
    assert np.allclose(b_jacobian_apply(bathy, 1.0, z, zero, v, "paper")[:, 1, 1], [5.0, 0.0])
    assert np.allclose(b_jacobian_apply(bathy, 1.0, z, zero, v, "exact")[:, 1, 1], [3.4, 1.2])
    kink = b_jacobian_apply(bathy, 1.0, -z, z, v, "exact")
    assert np.all(np.isfinite(kink)) and np.all(kink == 0)
    with pytest.raises(ValueError):
        b_jacobian_apply(bathy, 1.0, z, zero, v, "secant")


def test_friction_jacobian_matches_difference_quotient():
    g = Grid(6, 5)
    bathy = Bathymetry.slope(g, 1.0, 0.4, 0.2)
    rng = np.random.default_rng(1)
    u, w0, v = rng.standard_normal((3, 2) + g.shape)
    eps = 1e-6
    fd = (b_apply(bathy, 0.7, u + eps * v, w0) - b_apply(bathy, 0.7, u - eps * v, w0)) / (2 * eps)
    assert np.allclose(b_jacobian_apply(bathy, 0.7, u, w0, v), fd, atol=1e-8)


def test_forcing_vanishes_without_boundary_flow():
    g = Grid(7, 6)
    params = PhysicalParams(0.5, 1.0)
    bathy = Bathymetry.constant(g, 1.5)
    tide = np.random.default_rng(0).standard_normal((5, 2) + g.shape)
    assert np.allclose(assemble_forcing(g, params, bathy, np.zeros_like(tide), 0.1, tide), tide)


def test_forcing_constant_and_linear_boundary_flow():
    g = Grid(7, 6)
    params = PhysicalParams(0.5, 1.3)
    bathy = Bathymetry.constant(g, 1.5)
    c = np.array([0.4, -0.9])
    steps, dt = 6, 0.05
    tide = np.random.default_rng(0).standard_normal((steps + 1, 2) + g.shape)
    w_const = np.broadcast_to(node_field(c, g), tide.shape)
    f = assemble_forcing(g, params, bathy, w_const, dt, tide)
    assert np.allclose(f, tide - 1.3 * rotate(w_const), atol=1e-12)
    t = np.arange(steps + 1) * dt
    w_lin = t[:, None, None, None] * w_const
    f = assemble_forcing(g, params, bathy, w_lin, dt, tide)
    assert np.allclose(f, tide - w_const - 1.3 * rotate(w_lin), atol=1e-12)


def test_reconstruction_round_trip():
    g = Grid(7, 6)
    bathy = Bathymetry.slope(g, 1.0, 0.5, 0.1)
    rng = np.random.default_rng(2)
    u = g.dirichlet(rng.standard_normal((4, 2) + g.shape))
    xi = rng.standard_normal((4,) + g.shape)
    w, zeta = reconstruct_physical(g, bathy, u, xi, np.zeros_like(u), 0.1)
    assert np.array_equal(w, u) and np.array_equal(zeta, xi)
    c = np.broadcast_to(node_field([0.3, 0.2], g), u.shape)
    w, zeta = reconstruct_physical(g, Bathymetry.constant(g, 2.0), u, xi, c, 0.1)
    assert np.allclose(w, u + c) and np.allclose(zeta, xi, atol=1e-13)
    w0 = rng.standard_normal(u.shape)
    back = reduce_physical(g, bathy, *reconstruct_physical(g, bathy, u, xi, w0, 0.1), w0, 0.1)
    assert np.allclose(back[0], u) and np.allclose(back[1], xi)
