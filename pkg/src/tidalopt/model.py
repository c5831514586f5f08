"""Physical parameters, bathymetry and the operators of the reduced tidal system."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, rotate

JACOBIAN_MODES = ("exact", "paper")


@dataclass(frozen=True)
class PhysicalParams:
    alpha: float
    beta: float = 0.0
    r: float = 0.0
    g_accel: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.r < 0:
            raise ValueError(f"friction factor r must be nonnegative, got {self.r}")
        if self.g_accel != 1.0:
            raise ValueError("g_accel is fixed to 1 by the nondimensional scaling")


def bathymetry_constants(grid: Grid, h):
    """Return ``(lambda_min, mu_max, m_grad)`` for a depth field."""
    h = grid.check(h)
    if not np.all(np.isfinite(h)) or h.min() <= 0:
        raise ValueError(f"depth must be strictly positive everywhere (min h = {h.min():.6g})")
    gh = grid.gradient(h)
    return float(h.min()), float(h.max()), float(np.sqrt((gh**2).sum(axis=0)).max())


@dataclass(frozen=True, eq=False)
class Bathymetry:
    grid: Grid
    h: np.ndarray = field(repr=False)
    lambda_min: float = 0.0
    mu_max: float = 0.0
    m_grad: float = 0.0

    @classmethod
    def from_depth(cls, grid, h):
        h = np.array(np.broadcast_to(np.asarray(h, dtype=float), grid.shape))
        lam, mu, m = bathymetry_constants(grid, h)
        h.flags.writeable = False
        return cls(grid, h, lam, mu, m)

    @classmethod
    def constant(cls, grid, depth=1.0):
        return cls.from_depth(grid, np.full(grid.shape, float(depth)))

    @classmethod
    def slope(cls, grid, d0=1.0, sx=0.0, sy=0.0):
        x, y = grid.mesh
        return cls.from_depth(grid, d0 + sx * x + sy * y)

    @classmethod
    def bump(cls, grid, d0=1.0, amp=0.5, width=0.2):
        x, y = grid.mesh
        cx, cy = grid.lx / 2, grid.ly / 2
        return cls.from_depth(grid, d0 + amp * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / width**2))

    def gamma(self, r):
        return r / self.h


def stability_k(params: PhysicalParams, bathy: Bathymetry):
    """Growth constant of the energy estimate."""
    lam, mu, m = bathy.lambda_min, bathy.mu_max, bathy.m_grad
    return max(1.0 + m + params.r / lam, (2.0 / params.alpha) * (1.0 + mu**2) + m)


def a_apply(grid, params, u):
    return -params.alpha * grid.laplacian(u) + params.beta * rotate(u)


def a_tilde_apply(grid, params, p):
    return -params.alpha * grid.laplacian(p) - params.beta * rotate(p)


def b_apply(bathy, r, u, w0):
    """Quadratic bottom friction ``(r/h)|u + w0|(u + w0)``."""
    z = np.asarray(u) + np.asarray(w0)
    mag = np.sqrt((z**2).sum(axis=-3, keepdims=True))
    return (r / bathy.h) * mag * z


def b_jacobian_apply(bathy, r, u, w0, v, mode="exact"):
    """Derivative of :func:`b_apply` at ``u`` in direction ``v``.

    ``mode="paper"`` uses the scalar multiplier ``2 gamma |z|``. ``mode="exact"``
    is the true Jacobian of ``z -> |z| z``, taken as zero where ``z = 0``.
    """
    z = np.asarray(u) + np.asarray(w0)
    v = np.asarray(v)
    gamma = r / bathy.h
    mag = np.sqrt((z**2).sum(axis=-3, keepdims=True))
    if mode == "paper":
        return 2.0 * gamma * mag * v
    if mode != "exact":
        raise ValueError(f"unknown Jacobian mode {mode!r}; expected one of {JACOBIAN_MODES}")
    zv = (z * v).sum(axis=-3, keepdims=True)
    safe = np.where(mag > 0, mag, 1.0)
    return gamma * np.where(mag > 0, mag * v + zv * z / safe, 0.0)


def boundary_flux_integral(grid, bathy, w0, dt):
    """Running trapezoid integral of ``div(h w0)`` over the time grid."""
    d = grid.centered_divergence(bathy.h * np.asarray(w0))
    out = np.zeros_like(d)
    if len(d) > 1:
        out[1:] = np.cumsum(0.5 * dt * (d[1:] + d[:-1]), axis=0)
    return out


def assemble_forcing(grid, params, bathy, w0, dt, g_tide=None):
    """Forcing of the reduced system for a boundary flow extension ``w0``.

    ``w0`` and ``g_tide`` are trajectories of shape ``(N+1, 2, ny, nx)``.
    """
    w0 = np.asarray(w0, dtype=float)
    if w0.ndim != 4 or w0.shape[1:] != (2,) + grid.shape:
        raise ValueError("w0 must have shape (N+1, 2, ny, nx)")
    if g_tide is None:
        g_tide = np.zeros_like(w0)
    g_tide = np.asarray(g_tide, dtype=float)
    if g_tide.shape != w0.shape:
        raise ValueError("tide forcing and w0 must share the time grid")
    if len(w0) > 1:
        dw = np.gradient(w0, dt, axis=0, edge_order=1 if len(w0) < 3 else 2)
    else:
        dw = np.zeros_like(w0)
    flux = boundary_flux_integral(grid, bathy, w0, dt)
    return (
        g_tide
        - dw
        + grid.gradient(flux)
        + params.alpha * grid.laplacian(w0)
        - params.beta * rotate(w0)
    )


def reconstruct_physical(grid, bathy, u, xi, w0, dt):
    """Physical velocity ``w`` and elevation ``zeta`` from the reduced state."""
    u = np.asarray(u)
    xi = np.asarray(xi)
    w0 = np.asarray(w0)
    if w0.shape != u.shape or xi.shape != u.shape[:1] + u.shape[2:]:
        raise ValueError("state and w0 trajectories must share the grid and time axis")
    return u + w0, xi - boundary_flux_integral(grid, bathy, w0, dt)


def reduce_physical(grid, bathy, w, zeta, w0, dt):
    """Inverse of :func:`reconstruct_physical`."""
    return np.asarray(w) - w0, np.asarray(zeta) + boundary_flux_integral(grid, bathy, w0, dt)
