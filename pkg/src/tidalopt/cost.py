"""Cost functionals, reduced gradients and optimality diagnostics.

Time integrals of state terms use the trapezoid rule. The control enters
each step from its left end, so control integrals use left-endpoint weights;
with that pairing the Riesz gradients below are exact for the discrete
problem:

* ``tracking`` and ``dissipation`` (H^-1 penalty): ``g_n = U_n - lap p_n``
* ``general`` (L2 penalty ``l``): ``g_n = l_U(U_n) + p_n``
* ``assimilation`` (initial velocity): ``g = U0 + p(0)``
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .adjoint import AdjointSources, AdjointTrajectory, solve_adjoint
from .forward import StateTrajectory, TidalModel, solve_forward

COST_KINDS = ("tracking", "dissipation", "assimilation", "general")


@dataclass(frozen=True)
class GeneralCost:
    """Plug-in running cost ``g(t,u) + h(t,xi) + l(U)`` with derivatives.

    State callables take ``(grid, t, field)``; second derivatives take an
    extra direction and return the image field. Control callables take
    ``(grid, U)`` and ``(grid, U, V)``.
    """

    g: Callable
    g_u: Callable
    g_uu: Callable
    h: Callable
    h_xi: Callable
    h_xixi: Callable
    l: Callable
    l_u: Callable
    l_uu: Callable


def _half_square(grid, *args):
    return 0.5 * grid.inner(args[-1], args[-1])


def _last(grid, *args):
    # derivative of the half square, and its second derivative applied to a direction
    return np.asarray(args[-1])


def quadratic_cost():
    """``g = |u|^2/2``, ``h = |xi|^2/2``, ``l = |U|^2/2`` in L2."""
    return GeneralCost(_half_square, _last, _last, _half_square, _last, _last, _half_square, _last, _last)


@dataclass(frozen=True, eq=False)
class CostSpec:
    kind: str
    u_target: np.ndarray = field(default=None, repr=False)
    xi_target: np.ndarray = field(default=None, repr=False)
    u_final: np.ndarray = field(default=None, repr=False)
    xi_final: np.ndarray = field(default=None, repr=False)
    general: GeneralCost = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in COST_KINDS:
            raise ValueError(f"unknown cost kind {self.kind!r}; expected one of {COST_KINDS}")
        if self.kind == "general" and self.general is None:
            object.__setattr__(self, "general", quadratic_cost())

    @property
    def geometry(self):
        return {"tracking": "Hminus1", "dissipation": "Hminus1"}.get(self.kind, "L2")

    @property
    def initial(self):
        return self.kind == "assimilation"

    @property
    def has_terminal(self):
        return self.kind in ("dissipation", "assimilation")

    def targets(self, model):
        """Running and terminal targets broadcast to the model grids."""
        n, g = model.time.steps, model.grid
        vec, sca = (n + 1, 2) + g.shape, (n + 1,) + g.shape
        ud = np.zeros(vec) if self.u_target is None else np.broadcast_to(np.asarray(self.u_target, float), vec)
        xd = np.zeros(sca) if self.xi_target is None else np.broadcast_to(np.asarray(self.xi_target, float), sca)
        uf = ud[-1] if self.u_final is None else np.asarray(self.u_final, float)
        xf = xd[-1] if self.xi_final is None else np.asarray(self.xi_final, float)
        return ud, xd, uf, xf


def control_zero(model, spec):
    if spec.initial:
        return np.zeros((2,) + model.grid.shape)
    return model.zero_control()


def run_state(model, spec, control):
    if spec.initial:
        return solve_forward(model, u0=control)
    return solve_forward(model, control)


def _hm1_sq(grid, f):
    f = grid.dirichlet(f)
    return grid.inner_many(f, grid.spectral_solve(f))


def eval_cost(model: TidalModel, spec: CostSpec, traj: StateTrajectory, control) -> float:
    g, tg = model.grid, model.time
    c, left = tg.trapezoid, tg.left
    if spec.kind == "general":
        gc, t = spec.general, tg.times
        run = sum(c[n] * (gc.g(g, t[n], traj.u[n]) + gc.h(g, t[n], traj.xi[n])) for n in range(tg.steps + 1))
        return float(run + sum(left[n] * gc.l(g, control[n]) for n in range(tg.steps)))
    ud, xd, uf, xf = spec.targets(model)
    eu = traj.u - ud
    ex = traj.xi - xd
    if spec.kind == "dissipation":
        eu = g.dirichlet(eu)
        run_u = g.inner_many(-g.laplacian(eu), eu)
    else:
        run_u = g.inner_many(eu, eu)
    total = 0.5 * float(c @ run_u) + 0.5 * float(c @ g.inner_many(ex, ex))
    if spec.kind in ("tracking", "dissipation"):
        total += 0.5 * float(left @ _hm1_sq(g, control))
    if spec.has_terminal:
        du = traj.u[-1] - uf
        dx = traj.xi[-1] - xf
        total += 0.5 * (g.inner(du, du) + g.inner(dx, dx))
    if spec.initial:
        total += 0.5 * g.inner(control, control)
    return total


def adjoint_sources(model: TidalModel, spec: CostSpec, traj: StateTrajectory) -> AdjointSources:
    g = model.grid
    if spec.kind == "general":
        gc, t = spec.general, model.time.times
        su = np.stack([gc.g_u(g, t[n], traj.u[n]) for n in range(len(t))])
        sx = np.stack([gc.h_xi(g, t[n], traj.xi[n]) for n in range(len(t))])
        return AdjointSources(su, sx)
    ud, xd, uf, xf = spec.targets(model)
    su = g.dirichlet(traj.u - ud)
    if spec.kind == "dissipation":
        su = -g.laplacian(su)
    sx = traj.xi - xd
    if spec.has_terminal:
        return AdjointSources(su, sx, g.dirichlet(traj.u[-1] - uf), traj.xi[-1] - xf)
    return AdjointSources(su, sx)


@dataclass(frozen=True, eq=False)
class GradientResult:
    cost: float
    gradient: np.ndarray = field(repr=False)
    trajectory: StateTrajectory = field(repr=False)
    adjoint: AdjointTrajectory = field(repr=False)


def gradient_from_adjoint(model, spec, control, adj):
    g = model.grid
    if spec.initial:
        return g.dirichlet(control + adj.p_initial)
    out = np.zeros_like(adj.p)
    n = model.time.steps
    if spec.kind == "general":
        lu = np.stack([spec.general.l_u(g, control[k]) for k in range(n)])
        out[:n] = g.dirichlet(lu + adj.p[:n])
    else:
        out[:n] = g.dirichlet(control[:n]) - g.laplacian(adj.p[:n])
    return out


def reduced_gradient(model: TidalModel, spec: CostSpec, control) -> GradientResult:
    """Cost, Riesz gradient, state and adjoint at ``control``."""
    control = model.grid.dirichlet(control)
    traj = run_state(model, spec, control)
    adj = solve_adjoint(model, traj, adjoint_sources(model, spec, traj))
    return GradientResult(eval_cost(model, spec, traj, control), gradient_from_adjoint(model, spec, control, adj), traj, adj)


def control_inner(model, spec, a, b):
    """Inner product of the control space in which gradients are Riesz representers."""
    g = model.grid
    if spec.initial:
        return g.inner(a, b)
    left = model.time.left
    if spec.geometry == "Hminus1":
        return float(left @ g.inner_many(g.dirichlet(a), g.spectral_solve(b)))
    return float(left @ g.inner_many(a, b))


def control_norm(model, spec, a):
    return float(np.sqrt(max(control_inner(model, spec, a, a), 0.0)))


def pontryagin_residual(model, spec, control, adj, relative=True):
    """Norm of the optimality defect, divided by the control norm when that is nonzero."""
    res = control_norm(model, spec, gradient_from_adjoint(model, spec, control, adj))
    if relative:
        size = control_norm(model, spec, control)
        if size > 0:
            return res / size
    return res


def smooth_random_field(grid, rng, modes=6, rank=2, count=None):
    """Random dirichlet field(s) built from low Dirichlet sine modes with decaying amplitudes."""
    x, y = grid.mesh
    lead = () if count is None else (count,)
    comps = (rank,) if rank == 2 else ()
    out = np.zeros(lead + comps + grid.shape)
    for j in range(1, modes + 1):
        for k in range(1, modes + 1):
            basis = np.sin(j * np.pi * x / grid.lx) * np.sin(k * np.pi * y / grid.ly)
            amp = rng.standard_normal(lead + comps) / (j * j + k * k)
            out += amp[..., None, None] * basis
    return grid.dirichlet(out)


def hamiltonian_gap(model, spec, control, adj, samples=100, times=8, seed=0, candidates=None):
    """Smallest ``H(W) - H(U*)`` over random candidates ``W`` at sampled times.

    ``H(W) = l(W) + <p, W>`` with ``l`` the control penalty of ``spec``.
    Extra candidate fields may be passed explicitly; they are tried at every
    sampled time.
    """
    if spec.initial:
        raise ValueError("the Hamiltonian check applies to distributed controls")
    g = model.grid
    rng = np.random.default_rng(seed)
    n = model.time.steps
    idx = np.unique(np.linspace(0, n - 1, min(times, n)).round().astype(int))

    def penalty(w):
        if spec.kind == "general":
            return np.array([spec.general.l(g, wi) for wi in w])
        if spec.geometry == "Hminus1":
            return 0.5 * _hm1_sq(g, w)
        return 0.5 * g.inner_many(w, w)

    worst = np.inf
    for k in idx:
        u_star, p = g.dirichlet(control[k]), adj.p[k]
        h_star = penalty(u_star[None])[0] + g.inner(p, u_star)
        z = smooth_random_field(g, rng, count=samples)
        if spec.geometry == "Hminus1":
            zn = np.sqrt(_hm1_sq(g, z))
            scale = max(np.sqrt(_hm1_sq(g, u_star[None]))[0], np.sqrt(g.dirichlet_energy(p)), 1e-300)
        else:
            zn = np.sqrt(g.inner_many(z, z))
            scale = max(np.sqrt(g.inner(u_star, u_star)), np.sqrt(g.inner(p, p)), 1e-300)
        w = z / zn[:, None, None, None] * (2.0 * scale * rng.random(samples))[:, None, None, None]
        if candidates is not None:
            w = np.concatenate([w, g.dirichlet(np.asarray(candidates))])
        gap = penalty(w) + g.inner_many(w, np.broadcast_to(p, w.shape)) - h_star
        worst = min(worst, float(gap.min()))
    return worst


@dataclass
class SecondOrderReport:
    s_min: float
    s_max: float
    theta_samples: int
    stronger_check: float
    sup_adjoint_norm: float
    pointwise_threshold: float
    pointwise_satisfied: bool
    necessary_satisfied: bool
    thetas: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    @property
    def sufficient_satisfied(self):
        return self.pointwise_satisfied or self.stronger_check >= 0


def _second_terms(model, spec, opt_traj, opt_control, du, dxi, dU, theta):
    """The three penalty curvature terms at one value of theta each."""
    g, tg = model.grid, model.time
    c, left, t = tg.trapezoid, tg.left, tg.times
    n = tg.steps
    if spec.kind == "general":
        gc = spec.general
        t1 = sum(c[k] * g.inner(gc.g_uu(g, t[k], opt_traj.u[k] + theta * du[k], du[k]), du[k]) for k in range(n + 1))
        t2 = sum(c[k] * g.inner(gc.h_xixi(g, t[k], opt_traj.xi[k] + theta * dxi[k], dxi[k]), dxi[k]) for k in range(n + 1))
        t3 = sum(left[k] * g.inner(gc.l_uu(g, opt_control[k] + theta * dU[k], dU[k]), dU[k]) for k in range(n))
        return float(t1), float(t2), float(t3)
    if spec.kind == "tracking":
        t1 = c @ g.inner_many(du, du)
    elif spec.kind == "dissipation":
        d = g.dirichlet(du)
        t1 = c @ g.inner_many(-g.laplacian(d), d)
    else:
        raise ValueError("second-order scan needs a distributed-control cost")
    t2 = c @ g.inner_many(dxi, dxi)
    t3 = left @ _hm1_sq(g, dU)
    return float(t1), float(t2), float(t3)


def second_order_scan(model, spec, opt_control, perturbation, opt_traj=None, adj=None,
                      points=11, theta_samples=500, seed=0):
    """Scan the second-order optimality expression over ``theta`` in ``[0, 1]^4``.

    The perturbation is made feasible by a forward solve at
    ``opt_control + perturbation``. Each term depends on a single theta
    component, so the terms are tabulated on the 1D grid and summed over a
    Latin-hypercube subset of the tensor grid.
    """
    g, tg = model.grid, model.time
    if opt_traj is None or adj is None:
        res = reduced_gradient(model, spec, opt_control)
        opt_traj, adj = res.trajectory, res.adjoint
    pert = solve_forward(model, opt_control + perturbation)
    du, dxi, dU = pert.u - opt_traj.u, pert.xi - opt_traj.xi, g.dirichlet(perturbation)
    grid1 = np.linspace(0.0, 1.0, points)
    table = np.zeros((4, points))
    gamma = model.bathy.gamma(model.params.r)
    base_mag = np.sqrt(((opt_traj.u + model.w0) ** 2).sum(axis=1))
    left = tg.left
    for i, th in enumerate(grid1):
        table[0, i], table[1, i], table[2, i] = _second_terms(model, spec, opt_traj, opt_control, du, dxi, dU, th)
        mag = np.sqrt(((opt_traj.u + th * du + model.w0) ** 2).sum(axis=1))
        fric = (gamma * (mag - base_mag))[:, None] * du
        table[3, i] = -4.0 * float(left @ g.inner_many(fric, adj.p))
    full = points**4
    if theta_samples >= full:
        idx = np.array(np.meshgrid(*[np.arange(points)] * 4, indexing="ij")).reshape(4, -1).T
    else:
        lhs = qmc.LatinHypercube(d=4, seed=seed).random(theta_samples)
        idx = np.minimum((lhs * points).astype(int), points - 1)
    values = table[0, idx[:, 0]] + table[1, idx[:, 1]] + table[2, idx[:, 2]] + table[3, idx[:, 3]]
    # Hölder bound on the friction term, valid for every theta
    r, lam = model.params.r, model.bathy.lambda_min
    pnorm = np.sqrt(g.inner_many(adj.p, adj.p))
    bound = (4 * r / lam) * float(left @ (g.l4_norm_many(du) ** 2 * pnorm))
    quad_min = table[0].min() + table[1].min() + table[2].min()
    sup_p = float(pnorm[: tg.steps].max())
    threshold = np.inf if r == 0 else lam / (4 * r)
    return SecondOrderReport(
        s_min=float(values.min()),
        s_max=float(values.max()),
        theta_samples=len(values),
        stronger_check=float(quad_min - bound),
        sup_adjoint_norm=sup_p,
        pointwise_threshold=float(threshold),
        pointwise_satisfied=bool(sup_p <= threshold),
        necessary_satisfied=bool(values.max() >= -1e-8),
        thetas=grid1[idx],
        values=values,
    )
