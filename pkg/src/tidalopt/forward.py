"""Time stepping of the reduced tidal system and its energy monitors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, rotate
from .model import JACOBIAN_MODES, Bathymetry, PhysicalParams, b_apply, stability_k


@dataclass(frozen=True)
class TimeGrid:
    t_final: float
    steps: int

    def __post_init__(self):
        if not self.t_final > 0:
            raise ValueError("final time must be positive")
        if int(self.steps) < 1:
            raise ValueError("need at least one time step")

    @property
    def dt(self):
        return self.t_final / self.steps

    @property
    def times(self):
        return np.linspace(0.0, self.t_final, self.steps + 1)

    @property
    def trapezoid(self):
        """Trapezoid weights (times dt) for integrals over snapshots."""
        w = np.full(self.steps + 1, self.dt)
        w[0] = w[-1] = 0.5 * self.dt
        return w

    @property
    def left(self):
        """Left-endpoint weights (times dt); the last snapshot carries no weight."""
        w = np.full(self.steps + 1, self.dt)
        w[-1] = 0.0
        return w


def cfl_max_dt(grid: Grid, bathy: Bathymetry, safety=1.0):
    if not 0 < safety <= 1:
        raise ValueError("safety factor must lie in (0, 1]")
    return safety * min(grid.dx, grid.dy) / np.sqrt(2.0 * bathy.mu_max)


@dataclass(frozen=True, eq=False)
class TidalModel:
    """Everything that defines one forward problem except the control."""

    grid: Grid
    params: PhysicalParams
    bathy: Bathymetry
    time: TimeGrid
    w0: np.ndarray = field(default=None, repr=False)
    forcing: np.ndarray = field(default=None, repr=False)
    u0: np.ndarray = field(default=None, repr=False)
    xi0: np.ndarray = field(default=None, repr=False)
    jacobian: str = "exact"
    cfl_safety: float = 1.0

    def __post_init__(self):
        g, n = self.grid, self.time.steps
        vec = (n + 1, 2) + g.shape
        if self.bathy.grid != g:
            raise ValueError("bathymetry lives on a different grid")
        for name, shape in (("w0", vec), ("forcing", vec), ("u0", (2,) + g.shape), ("xi0", g.shape)):
            value = getattr(self, name)
            value = np.zeros(shape) if value is None else np.array(value, dtype=float)
            if value.shape != shape:
                raise ValueError(f"{name} has shape {value.shape}, expected {shape}")
            if not np.all(np.isfinite(value)):
                raise ValueError(f"{name} contains non-finite values")
            object.__setattr__(self, name, value)
        if not g.is_dirichlet(self.u0):
            raise ValueError("initial velocity must vanish on the boundary")
        if self.jacobian not in JACOBIAN_MODES:
            raise ValueError(f"unknown Jacobian mode {self.jacobian!r}")
        limit = cfl_max_dt(g, self.bathy, self.cfl_safety)
        if self.time.dt > limit:
            raise ValueError(f"time step {self.time.dt:.6g} exceeds the CFL bound {limit:.6g}")

    @property
    def dt(self):
        return self.time.dt

    def replace(self, **changes):
        kwargs = {k: getattr(self, k) for k in self.__dataclass_fields__}
        kwargs.update(changes)
        return TidalModel(**kwargs)

    def zero_control(self):
        return np.zeros((self.time.steps + 1, 2) + self.grid.shape)


@dataclass(frozen=True, eq=False)
class StateTrajectory:
    time: TimeGrid
    u: np.ndarray = field(repr=False)
    xi: np.ndarray = field(repr=False)


def step_forward(model: TidalModel, u, xi, control, forcing, w0):
    """One forward-backward step: implicit diffusion, then the elevation update."""
    g, p, dt = model.grid, model.params, model.dt
    rhs = u + dt * (-p.beta * rotate(u) - b_apply(model.bathy, p.r, u, w0) - g.gradient(xi) + forcing + control)
    u_new = g.spectral_solve(rhs, shift=1.0, scale=dt * p.alpha)
    xi_new = xi - dt * g.divergence(model.bathy.h * u_new, check=False)
    return u_new, xi_new


def solve_forward(model: TidalModel, control=None, u0=None):
    """Integrate over the whole time grid.

    ``control`` is a trajectory of shape ``(N+1, 2, ny, nx)``; the control
    at ``t_n`` drives the step from ``t_n`` to ``t_{n+1}``. Passing ``u0``
    replaces the initial velocity (initial-data control).
    """
    n = model.time.steps
    control = model.zero_control() if control is None else model.grid.dirichlet(control)
    u = np.zeros((n + 1, 2) + model.grid.shape)
    xi = np.zeros((n + 1,) + model.grid.shape)
    u[0] = model.u0 if u0 is None else model.grid.dirichlet(u0)
    xi[0] = model.xi0
    for k in range(n):
        u[k + 1], xi[k + 1] = step_forward(model, u[k], xi[k], control[k], model.forcing[k], model.w0[k])
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(xi))):
        raise FloatingPointError("forward solve produced non-finite values")
    return StateTrajectory(model.time, u, xi)


def energy(model, traj):
    """``|| sqrt(h) u ||^2 + || xi ||^2`` at every snapshot."""
    g = model.grid
    return g.inner_many(model.bathy.h * traj.u, traj.u) + g.inner_many(traj.xi, traj.xi)


def energy_equality_residual(model: TidalModel, traj: StateTrajectory):
    """Discrete residual of the energy equality at interior time nodes.

    Returns the residual series; its largest magnitude is the usual summary.
    """
    g, p, dt = model.grid, model.params, model.dt
    e = energy(model, traj)
    u = traj.u
    flux = -p.alpha * g.laplacian(u) + p.beta * rotate(u) + b_apply(model.bathy, p.r, u, model.w0) - model.forcing
    work = g.inner_many(flux, model.bathy.h * u)
    return (e[2:] - e[:-2]) / (2 * dt) + 2.0 * work[1:-1]


def _cumulative(dt, values):
    # running trapezoid integral over [0, t_n]
    out = np.zeros_like(values)
    out[1:] = np.cumsum(0.5 * dt * (values[1:] + values[:-1]))
    return out


def _h1_squared(grid, u):
    grad = grid.gradient(u)  # (..., 2 comps, 2 derivs, ny, nx)
    return grid.inner_many(grad, grad)


def hminus1_squared(grid, f):
    """Squared H^-1 norms of a trajectory of vector fields (exact solve)."""
    f = grid.dirichlet(f)
    return grid.inner_many(f, grid.spectral_solve(f))


def energy_bound_check(model: TidalModel, traj: StateTrajectory, control=None):
    """Margins ``RHS - LHS`` of the energy estimate at every snapshot."""
    g, p, dt = model.grid, model.params, model.dt
    if not (np.all(np.isfinite(traj.u)) and np.all(np.isfinite(traj.xi)) and np.all(np.isfinite(model.forcing))):
        raise FloatingPointError("energy monitor received non-finite data")
    t = model.time.times
    lhs = g.inner_many(traj.u, traj.u) + g.inner_many(traj.xi, traj.xi)
    lhs = lhs + p.alpha * _cumulative(dt, _h1_squared(g, traj.u))
    data = (p.r / model.bathy.lambda_min) * g.l4_norm_many(model.w0) ** 4 + hminus1_squared(g, model.forcing)
    bracket = lhs[0] + _cumulative(dt, data)
    if control is not None:
        cu = hminus1_squared(g, control)
        bracket = bracket + np.concatenate([[0.0], np.cumsum(dt * cu[:-1])])
    rhs = bracket * np.exp(stability_k(p, model.bathy) * t)
    return rhs - lhs
