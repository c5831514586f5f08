"""Tangent linear model and discrete adjoint of the forward scheme.

The adjoint is the exact transpose of the tangent step in the grid inner
product. Running sources are weighted with the trapezoid rule, so for a
cost ``sum_n c_n l(x_n)`` the adjoint driven by ``l'(x_n)`` delivers the
exact discrete gradient.

Conventions for :class:`AdjointTrajectory`:

* ``p[n]`` for ``n < N`` is the adjoint velocity that pairs with the control
  applied on ``[t_n, t_{n+1})``; ``p[N]`` is the terminal multiplier.
* ``phi[n]`` is the multiplier of the elevation at ``t_n``.
* ``p_initial`` and ``phi_initial`` are the multipliers of the initial state,
  i.e. the sensitivity of the pairing with respect to ``u(0)`` and ``xi(0)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .forward import StateTrajectory, TidalModel, TimeGrid, solve_forward
from .grid import rotate
from .model import b_jacobian_apply


@dataclass(frozen=True, eq=False)
class AdjointSources:
    u: np.ndarray = field(default=None, repr=False)
    xi: np.ndarray = field(default=None, repr=False)
    p_final: np.ndarray = field(default=None, repr=False)
    phi_final: np.ndarray = field(default=None, repr=False)

    def filled(self, model):
        n, g = model.time.steps, model.grid
        vec, sca = (n + 1, 2) + g.shape, (n + 1,) + g.shape
        u = np.zeros(vec) if self.u is None else g.dirichlet(np.broadcast_to(self.u, vec))
        xi = np.zeros(sca) if self.xi is None else np.array(np.broadcast_to(self.xi, sca), dtype=float)
        pf = np.zeros(vec[1:]) if self.p_final is None else g.dirichlet(self.p_final)
        ff = np.zeros(sca[1:]) if self.phi_final is None else np.array(self.phi_final, dtype=float)
        return AdjointSources(u, xi, pf, ff)


@dataclass(frozen=True, eq=False)
class AdjointTrajectory:
    time: TimeGrid
    p: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    p_initial: np.ndarray = field(repr=False)
    phi_initial: np.ndarray = field(repr=False)


def tangent_step(model, u_base, w0_base, w, eta, v, mode=None):
    """Derivative of the forward step at ``u_base`` applied to ``(w, eta, v)``."""
    g, p, dt = model.grid, model.params, model.dt
    mode = model.jacobian if mode is None else mode
    jw = b_jacobian_apply(model.bathy, p.r, u_base, w0_base, w, mode)
    rhs = w + dt * (-p.beta * rotate(w) - jw - g.gradient(eta) + v)
    w_new = g.spectral_solve(rhs, shift=1.0, scale=dt * p.alpha)
    eta_new = eta - dt * g.divergence(model.bathy.h * w_new, check=False)
    return w_new, eta_new


def adjoint_step(model, u_base, w0_base, a, b, mode=None):
    """Transpose of :func:`tangent_step`.

    Takes the multipliers ``(a, b)`` of the new state and returns the
    control sensitivity ``q`` together with the multipliers of the old state
    (before running sources are added).
    """
    g, p, dt = model.grid, model.params, model.dt
    mode = model.jacobian if mode is None else mode
    q = g.spectral_solve(a + dt * model.bathy.h * g.gradient(b), shift=1.0, scale=dt * p.alpha)
    jq = b_jacobian_apply(model.bathy, p.r, u_base, w0_base, q, mode)
    a_old = g.dirichlet(q + dt * p.beta * rotate(q) - dt * jq)
    b_old = b + dt * g.divergence(q, check=False)
    return q, a_old, b_old


def solve_tangent(model: TidalModel, base: StateTrajectory, control=None, w_init=None, eta_init=None, mode=None):
    """Linearized trajectory driven by a control direction and initial perturbation."""
    n, g = model.time.steps, model.grid
    control = model.zero_control() if control is None else g.dirichlet(control)
    w = np.zeros_like(base.u)
    eta = np.zeros_like(base.xi)
    if w_init is not None:
        w[0] = g.dirichlet(w_init)
    if eta_init is not None:
        eta[0] = eta_init
    for k in range(n):
        w[k + 1], eta[k + 1] = tangent_step(model, base.u[k], model.w0[k], w[k], eta[k], control[k], mode)
    return StateTrajectory(model.time, w, eta)


def solve_adjoint(model: TidalModel, base: StateTrajectory, sources: AdjointSources, mode=None):
    """Integrate the discrete adjoint backward from the terminal data."""
    n = model.time.steps
    s = sources.filled(model)
    c = model.time.trapezoid
    p = np.zeros_like(base.u)
    phi = np.zeros_like(base.xi)
    a = s.p_final + c[n] * s.u[n]
    b = s.phi_final + c[n] * s.xi[n]
    p[n], phi[n] = a, b
    for k in range(n - 1, -1, -1):
        q, a, b = adjoint_step(model, base.u[k], model.w0[k], a, b, mode)
        a = a + c[k] * s.u[k]
        b = b + c[k] * s.xi[k]
        p[k], phi[k] = q, b
    return AdjointTrajectory(model.time, p, phi, a, b)


def duality_check(model, base, control, sources, w_init=None, eta_init=None, mode=None):
    """Relative defect of the tangent/adjoint pairing identity."""
    g = model.grid
    s = sources.filled(model)
    tan = solve_tangent(model, base, control, w_init, eta_init, mode)
    adj = solve_adjoint(model, base, s, mode)
    c = model.time.trapezoid
    lhs = (
        float(c @ g.inner_many(tan.u, s.u))
        + float(c @ g.inner_many(tan.xi, s.xi))
        + g.inner(tan.u[-1], s.p_final)
        + g.inner(tan.xi[-1], s.phi_final)
    )
    control = model.zero_control() if control is None else g.dirichlet(control)
    rhs = float(model.time.left @ g.inner_many(control, adj.p))
    rhs += g.inner(tan.u[0], adj.p_initial) + g.inner(tan.xi[0], adj.phi_initial)
    scale = max(abs(lhs), abs(rhs))
    return 0.0 if scale == 0 else abs(lhs - rhs) / scale


@dataclass
class TaylorResult:
    taus: np.ndarray
    residual_linf_l2: np.ndarray
    residual_l2_h1: np.ndarray
    slope_linf_l2: float | None
    slope_l2_h1: float | None
    exact_to_rounding: bool

    @property
    def slope(self):
        return self.slope_linf_l2


def _slope(taus, res):
    return float(np.polyfit(np.log(taus), np.log(res), 1)[0])


def taylor_test(model, control, direction, taus=(1e-1, 1e-2, 1e-3, 1e-4), mode=None, initial=False):
    """Remainder of the linearization of the control-to-state map.

    With ``initial=True`` the control is the initial velocity and
    ``direction`` perturbs it; otherwise both are distributed trajectories.
    """
    g = model.grid
    taus = np.asarray(taus, dtype=float)

    def run(ctrl):
        return solve_forward(model, u0=ctrl) if initial else solve_forward(model, ctrl)

    base = run(control)
    if initial:
        tan = solve_tangent(model, base, w_init=direction, mode=mode)
    else:
        tan = solve_tangent(model, base, direction, mode=mode)
    trap = model.time.trapezoid
    r_inf, r_h1, scale = [], [], []
    for tau in taus:
        pert = run(control + tau * direction)
        d = pert.u - base.u - tau * tan.u
        r_inf.append(np.sqrt(g.inner_many(d, d).max()))
        grad = g.gradient(d)
        r_h1.append(np.sqrt(trap @ g.inner_many(grad, grad)))
        scale.append(tau * np.sqrt(g.inner_many(tan.u, tan.u).max()))
    r_inf, r_h1, scale = map(np.asarray, (r_inf, r_h1, scale))
    rounding = bool(np.all(r_inf <= 1e-10 * np.maximum(scale, np.finfo(float).tiny)))
    if rounding:
        return TaylorResult(taus, r_inf, r_h1, None, None, True)
    return TaylorResult(taus, r_inf, r_h1, _slope(taus, r_inf), _slope(taus, r_h1), False)
