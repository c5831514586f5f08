"""Steepest descent for distributed and initial-data controls."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .adjoint import AdjointTrajectory, solve_adjoint
from .cost import (
    CostSpec,
    adjoint_sources,
    control_norm,
    control_zero,
    eval_cost,
    gradient_from_adjoint,
    run_state,
)
from .forward import StateTrajectory, TidalModel

STRATEGIES = ("descent", "fixed_point")


@dataclass(frozen=True)
class OptimizeSettings:
    max_iters: int = 200
    tol: float = 1e-6
    armijo: float = 1e-4
    backtrack: float = 0.5
    initial_step: float = 1.0
    relaxation: float = 1.0
    strategy: str = "descent"
    max_backtracks: int = 60
    abs_tol: float = 1e-14

    def __post_init__(self):
        if not 0 < self.armijo < 1:
            raise ValueError("Armijo constant must lie in (0, 1)")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtracking factor must lie in (0, 1)")
        if not 0 < self.relaxation <= 1:
            raise ValueError("relaxation must lie in (0, 1]")
        if self.initial_step <= 0 or self.tol < 0 or self.max_iters < 0:
            raise ValueError("step, tolerance and iteration count must be positive")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")


@dataclass
class OptimizeTrace:
    cost: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    step: list = field(default_factory=list)

    def record(self, cost, grad_norm, residual, step):
        if not math.isfinite(cost):
            raise FloatingPointError("cost became non-finite")
        self.cost.append(float(cost))
        self.grad_norm.append(float(grad_norm))
        self.residual.append(float(residual))
        self.step.append(float(step))

    def rows(self):
        return list(zip(range(len(self.cost)), self.cost, self.grad_norm, self.residual, self.step))

    def __len__(self):
        return len(self.cost)


class LineSearchError(RuntimeError):
    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True, eq=False)
class OptimizeResult:
    control: np.ndarray = field(repr=False)
    trajectory: StateTrajectory = field(repr=False)
    adjoint: AdjointTrajectory = field(repr=False)
    trace: OptimizeTrace = field(repr=False)
    converged: bool = False

    @property
    def cost(self):
        return self.trace.cost[-1]

    @property
    def residual(self):
        return self.trace.residual[-1]


def minimize_control(model: TidalModel, spec: CostSpec, control=None, settings=None) -> OptimizeResult:
    """Minimize the reduced cost by steepest descent in the Riesz geometry of ``spec``.

    The ``fixed_point`` strategy takes the relaxed step ``U - s * gradient``
    without a line search, which is ``(1-s)U + s lap p`` for H^-1 costs and
    ``(1-s)U - s p`` for the quadratic L2 cost.
    """
    settings = OptimizeSettings() if settings is None else settings
    g = model.grid
    u_ctrl = control_zero(model, spec) if control is None else g.dirichlet(control)

    def state(ctrl):
        traj = run_state(model, spec, ctrl)
        return traj, eval_cost(model, spec, traj, ctrl)

    def trial_state(ctrl):
        # an overflowing trial point is simply a rejected step
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                return state(ctrl)
        except FloatingPointError:
            return None, math.inf

    def adjoint(ctrl, traj):
        adj = solve_adjoint(model, traj, adjoint_sources(model, spec, traj))
        return adj, gradient_from_adjoint(model, spec, ctrl, adj)

    trace = OptimizeTrace()
    traj, cost = state(u_ctrl)
    adj, grad = adjoint(u_ctrl, traj)
    step = 0.0
    converged = False
    for it in range(settings.max_iters + 1):
        gnorm = control_norm(model, spec, grad)
        size = control_norm(model, spec, u_ctrl)
        resid = gnorm / size if size > 0 else gnorm
        trace.record(cost, gnorm, resid, step)
        if gnorm <= settings.abs_tol or (size > 0 and resid <= settings.tol):
            converged = True
            break
        if it == settings.max_iters:
            break
        if settings.strategy == "fixed_point":
            step = settings.relaxation
            u_ctrl = u_ctrl - step * grad
            traj, cost = state(u_ctrl)
        else:
            step = settings.initial_step
            for _ in range(settings.max_backtracks):
                trial = u_ctrl - step * grad
                t_traj, t_cost = trial_state(trial)
                if t_cost <= cost - settings.armijo * step * gnorm**2:
                    break
                step *= settings.backtrack
            else:
                raise LineSearchError(f"line search failed after {settings.max_backtracks} reductions", trace)
            u_ctrl, traj, cost = trial, t_traj, t_cost
        adj, grad = adjoint(u_ctrl, traj)
    return OptimizeResult(u_ctrl, traj, adj, trace, converged)


def assimilate_initial(model: TidalModel, spec: CostSpec, guess=None, settings=None) -> OptimizeResult:
    """Recover the initial velocity from measurements; the initial elevation stays fixed."""
    if not spec.initial:
        raise ValueError("initial-data assimilation needs an assimilation cost")
    return minimize_control(model, spec, guess, settings)


def uniqueness_lhs(model: TidalModel, traj: StateTrajectory):
    """Left side of the small-time uniqueness condition at every time node."""
    p, b = model.params, model.bathy
    coef = (b.mu_max**2 + 2) * (1 / p.alpha + 1) + 4 / p.alpha + b.m_grad
    l4 = model.grid.l4_norm_many(traj.u + model.w0) ** 4
    integral = np.concatenate([[0.0], np.cumsum(0.5 * model.dt * (l4[1:] + l4[:-1]))])
    t = model.time.times
    return np.exp(2 * t * coef + integral)


def uniqueness_horizon(model: TidalModel, traj: StateTrajectory):
    """Largest time node up to which uniqueness is certified, or ``None``."""
    threshold = model.params.alpha**2 / 8
    ok = uniqueness_lhs(model, traj) < threshold
    if not ok[0]:
        return None
    last = len(ok) - 1 if ok.all() else int(np.argmin(ok)) - 1
    return float(model.time.times[last])
