"""Randomized property suites, bound monitors and the finite-difference gradient oracle."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .adjoint import solve_tangent
from .cost import CostSpec, control_inner, control_norm, eval_cost, reduced_gradient, run_state, smooth_random_field
from .forward import TidalModel, energy_bound_check, hminus1_squared, solve_forward
from .grid import Grid
from .model import a_apply, b_apply, b_jacobian_apply


@dataclass
class PropertyReport:
    name: str
    trials: int
    worst_margin: float
    passed: bool
    tolerance: float
    formula: str
    observed: dict = field(default_factory=dict)

    def as_dict(self):
        return asdict(self)


def _report(name, margins, tolerance, formula, observed=None):
    margins = np.asarray(margins, dtype=float)
    worst = float(margins.min()) if margins.size else 0.0
    return PropertyReport(name, int(margins.size), worst, bool(worst >= -tolerance), tolerance, formula, observed or {})


def _relative(rhs, lhs):
    # margin rhs - lhs, scaled so rounding noise is comparable across trials
    scale = abs(rhs) + abs(lhs)
    return 0.0 if scale == 0 else (rhs - lhs) / scale


def poincare_constant(grid: Grid, iters=200, tol=1e-12, seed=0):
    """``1/sqrt(lambda_1)`` for the five-point Dirichlet Laplacian, by inverse power iteration."""
    rng = np.random.default_rng(seed)
    x = grid.dirichlet(rng.random(grid.shape) + 0.5)
    lam = np.inf
    for _ in range(iters):
        y = grid.poisson_solve(x, tol=1e-13)
        y /= np.sqrt(grid.inner(y, y))
        new = grid.inner(-grid.laplacian(y), y)
        x = y
        if abs(new - lam) <= tol * new:
            lam = new
            break
        lam = new
    return 1.0 / np.sqrt(lam)


def _random_dirichlet(grid, rng):
    # rough white noise plus a smooth part, so both ends of the spectrum are exercised
    noise = grid.dirichlet(rng.standard_normal((2,) + grid.shape))
    return noise * rng.uniform(0.1, 2.0) + smooth_random_field(grid, rng) * rng.uniform(0.0, 20.0)


def operator_property_suite(model: TidalModel, trials=100, seed=0, tolerance=1e-12):
    """Randomized checks of the friction operator and the combined monotonicity."""
    g, p, b = model.grid, model.params, model.bathy
    r, lam = p.r, b.lambda_min
    rng = np.random.default_rng(seed)
    c_omega = poincare_constant(g)
    names = ["growth", "monotone", "lower_bound", "lipschitz_weak", "jacobian_positive_exact",
             "jacobian_positive_paper", "jacobian_hminus1_exact", "jacobian_hminus1_paper", "combined_monotone"]
    margins = {k: [] for k in names}
    sharp = 0.0
    for trial in range(trials):
        u = _random_dirichlet(g, rng)
        v = _random_dirichlet(g, rng)
        w0 = rng.standard_normal((2,) + g.shape) * rng.uniform(0.0, 2.0)
        if trial == 0:
            u = g.dirichlet(-w0)  # friction kink at every interior node
        bu, bv = b_apply(b, r, u, w0), b_apply(b, r, v, w0)
        l4u, l4v, l4w, l4d = (g.norm(f, "L4") for f in (u, v, w0, u - v))
        margins["growth"].append(_relative((r / lam) * (l4u + l4w) ** 2, g.norm(bu)))
        mono = g.inner(bu - bv, u - v)
        margins["monotone"].append(_relative(mono, 0.0) if mono < 0 else 0.0)
        low = g.inner(bu, u) + (r / (2 * lam)) * (l4w**4 + g.inner(u, u))
        margins["lower_bound"].append(_relative(low, 0.0) if low < 0 else 0.0)
        lip = (l4u + l4v + 2 * l4w) * l4d
        diff = g.norm(bu - bv)
        margins["lipschitz_weak"].append(_relative((r / lam) * lip, diff))
        if lip > 0:
            sharp = max(sharp, diff / lip)
        for mode in ("exact", "paper"):
            jv = b_jacobian_apply(b, r, u, w0, v, mode)
            pos = g.inner(jv, v)
            margins[f"jacobian_positive_{mode}"].append(_relative(pos, 0.0) if pos < 0 else 0.0)
            hm1 = g.norm(jv, "Hminus1", method="spectral")
            margins[f"jacobian_hminus1_{mode}"].append(_relative((2 * c_omega * r / lam) * (l4u + l4w) * l4v, hm1))
        d = u - v
        comb = g.inner(a_apply(g, p, d) + bu - bv, d)
        margins["combined_monotone"].append(_relative(comb, 0.0) if comb < 0 else 0.0)
    formulas = {
        "growth": "||B(u)|| <= (r/lambda)(||u||_L4 + ||w0||_L4)^2",
        "monotone": "<B(u)-B(v), u-v> >= 0",
        "lower_bound": "<B(u),u> >= -(r/(2 lambda))(||w0||_L4^4 + ||u||^2)",
        "lipschitz_weak": "||B(u)-B(v)|| <= (r/lambda)(||u||_L4+||v||_L4+2||w0||_L4)||u-v||_L4",
        "jacobian_positive_exact": "<B'(u)v, v> >= 0 (exact Jacobian)",
        "jacobian_positive_paper": "<B'(u)v, v> >= 0 (2 gamma |z| multiplier)",
        "jacobian_hminus1_exact": "||B'(u)v||_H-1 <= (2 C r/lambda)(||u||_L4+||w0||_L4)||v||_L4, exact Jacobian",
        "jacobian_hminus1_paper": "||B'(u)v||_H-1 <= (2 C r/lambda)(||u||_L4+||w0||_L4)||v||_L4, 2 gamma |z| multiplier",
        "combined_monotone": "<A(u-v) + B(u) - B(v), u-v> >= 0",
    }
    observed = {
        "lipschitz_weak": {"sharp_ratio": sharp, "r_over_2lambda": r / (2 * lam), "r_over_lambda": r / lam},
        "jacobian_hminus1_exact": {"poincare_constant": float(c_omega)},
        "jacobian_hminus1_paper": {"poincare_constant": float(c_omega)},
    }
    return [_report(k, margins[k], tolerance, formulas[k], observed.get(k)) for k in names]


def band_limited_field(grid, rng, modes=8):
    """Random vector field from Dirichlet sine modes up to wavenumber ``modes``."""
    x, y = grid.mesh
    out = np.zeros((2,) + grid.shape)
    for j in range(1, modes + 1):
        for k in range(1, modes + 1):
            basis = np.sin(j * np.pi * x / grid.lx) * np.sin(k * np.pi * y / grid.ly)
            out += rng.standard_normal(2)[:, None, None] * basis
    return grid.dirichlet(out)


def ladyzhenskaya_terms(grid, u):
    """``(||u||_L4, 2^(1/4) ||u||^(1/2) ||grad u||^(1/2))``."""
    return grid.norm(u, "L4"), 2**0.25 * np.sqrt(grid.norm(u) * grid.norm(u, "H1semi"))


def ladyzhenskaya_eigenfunction(grid):
    """Both sides of the inequality for the first Dirichlet eigenfunction ``sin(pi x) sin(pi y)``."""
    x, y = grid.mesh
    return ladyzhenskaya_terms(grid, np.sin(np.pi * x / grid.lx) * np.sin(np.pi * y / grid.ly))


def inequality_suite(grid: Grid, trials=20, seed=0, slack=1.05, modes=8):
    """Ladyzhenskaya check on band-limited fields; records the observed Poincaré ratio."""
    if min(grid.nx, grid.ny) < 64:
        raise ValueError("the continuous inequalities are checked on grids of at least 64x64 nodes")
    rng = np.random.default_rng(seed)
    lady, ratios = [], []
    for _ in range(trials):
        u = band_limited_field(grid, rng, modes)
        lhs, bound = ladyzhenskaya_terms(grid, u)
        lady.append(_relative(slack * bound, lhs))
        ratios.append(grid.norm(u) / grid.norm(u, "H1semi"))
    return [
        _report("ladyzhenskaya", lady, 0.0, f"||u||_L4 <= {slack} * 2^(1/4) ||u||^(1/2) ||grad u||^(1/2)"),
        PropertyReport("poincare_ratio", trials, float("nan"), True, float("nan"),
                       "max ||u|| / ||grad u|| over the sample (recorded only)",
                       {"observed_max": float(max(ratios)), "continuous_value": float(1 / (np.pi * np.sqrt(2)))}),
    ]


def gradient_fd_check(model: TidalModel, spec: CostSpec, control, directions, hs=(1e-3, 1e-4, 1e-5, 1e-6)):
    """Best-over-step, worst-over-direction relative error of the adjoint directional derivative."""
    g = model.grid
    control = g.dirichlet(control)
    grad = reduced_gradient(model, spec, control).gradient
    size = control_norm(model, spec, control)

    def cost(c):
        return eval_cost(model, spec, run_state(model, spec, c), c)

    errors = np.zeros((len(hs), len(directions)))
    for j, v in enumerate(directions):
        v = g.dirichlet(v)
        exact = control_inner(model, spec, grad, v)
        scale = (size if size > 0 else 1.0) / control_norm(model, spec, v)
        for i, h in enumerate(hs):
            eps = h * scale
            fd = (cost(control + eps * v) - cost(control - eps * v)) / (2 * eps)
            errors[i, j] = abs(fd - exact) / max(abs(exact), abs(fd), np.finfo(float).tiny)
    return float(errors.max(axis=1).min())


def tangent_bound_margins(model, base, direction, w_init=None, eta_init=None):
    """Margins of the linearized energy estimate (no extra forcing)."""
    g, p, b = model.grid, model.params, model.bathy
    tan = solve_tangent(model, base, direction, w_init, eta_init)
    dt, t = model.dt, model.time.times
    lhs = g.inner_many(tan.u, tan.u) + g.inner_many(tan.xi, tan.xi)
    grad = g.gradient(tan.u)
    lhs = lhs + p.alpha * _running(dt, g.inner_many(grad, grad))
    src = np.concatenate([[0.0], np.cumsum(dt * hminus1_squared(g, direction)[:-1])])
    rhs = (lhs[0] + (4 / p.alpha) * src) * np.exp((8 * (b.mu_max**2 + 1) / p.alpha + b.m_grad) * t)
    return rhs - lhs


def adjoint_bound_margins(model, traj, adj, spec):
    """Margins of the backward adjoint energy estimate for a tracking-type cost."""
    g, p, b = model.grid, model.params, model.bathy
    dt, n = model.dt, model.time.steps
    ud, xd, _, _ = spec.targets(model)
    lhs = g.inner_many(adj.p, adj.p) + g.inner_many(adj.phi, adj.phi)
    grad = g.gradient(adj.p)
    h1 = g.inner_many(grad, grad)
    tail = lambda v: _running(dt, v[::-1])[::-1]
    lhs = lhs + p.alpha * tail(h1)
    mis = g.inner_many(traj.u - ud, traj.u - ud) + g.inner_many(traj.xi - xd, traj.xi - xd)
    terminal = lhs[n]
    rhs = (terminal + tail(mis)) * np.exp((b.m_grad + 2 * b.mu_max**2 + 4 * (1 / p.alpha + 1)) * model.time.t_final)
    return rhs - lhs


def perturbation_bound_margins(model, control, direction, tau):
    """Margins of the continuity estimate for the control-to-state map."""
    g, p, b = model.grid, model.params, model.bathy
    dt, t = model.dt, model.time.times
    base = solve_forward(model, control)
    pert = solve_forward(model, control + tau * direction)
    du, dxi = pert.u - base.u, pert.xi - base.xi
    grad = g.gradient(du)
    lhs = g.inner_many(du, du) + g.inner_many(dxi, dxi) + p.alpha * _running(dt, g.inner_many(grad, grad))
    src = np.concatenate([[0.0], np.cumsum(dt * hminus1_squared(g, direction)[:-1])])
    rhs = (4 * tau**2 / p.alpha) * src * np.exp((4 * (2 + b.mu_max**2) / p.alpha + b.m_grad) * t)
    return rhs - lhs


def _running(dt, values):
    out = np.zeros_like(values)
    out[1:] = np.cumsum(0.5 * dt * (values[1:] + values[:-1]))
    return out


def bound_monitors(model: TidalModel, control=None, spec=None, direction=None, tau=0.1, seed=0, tolerance=1e-12):
    """Run the four energy-type estimates on one scenario and report their worst margins."""
    g = model.grid
    rng = np.random.default_rng(seed)
    spec = CostSpec("tracking") if spec is None else spec
    control = model.zero_control() if control is None else g.dirichlet(control)
    if direction is None:
        direction = smooth_random_field(g, rng, count=model.time.steps + 1)
    res = reduced_gradient(model, spec, control)
    traj, adj = res.trajectory, res.adjoint

    def rel(m, scale):
        s = np.max(np.abs(scale)) if np.size(scale) else 0.0
        return m / s if s > 0 else m

    energy = energy_bound_check(model, traj, control)
    tangent = tangent_bound_margins(model, traj, direction)
    adjoint = adjoint_bound_margins(model, traj, adj, spec)
    pert = perturbation_bound_margins(model, control, direction, tau)
    return [
        _report("energy_estimate", rel(energy, energy), tolerance,
                "|u|^2+|xi|^2+alpha int|grad u|^2 <= (|u0|^2+|xi0|^2+(r/lambda)int|w0|_L4^4+int|f|_H-1^2+int|U|_H-1^2) e^(K t)"),
        _report("tangent_estimate", rel(tangent, tangent), tolerance,
                "|w|^2+|eta|^2+alpha int|grad w|^2 <= (|w0|^2+|eta0|^2+(4/alpha)int|U|_H-1^2) e^((8(mu^2+1)/alpha+M) t)"),
        _report("adjoint_estimate", rel(adjoint, adjoint), tolerance,
                "|p|^2+|phi|^2+alpha int_t^T|grad p|^2 <= (|p_T|^2+|phi_T|^2+int_t^T|u-u_d|^2+int_t^T|xi-xi_d|^2) e^((M+2mu^2+4(1/alpha+1)) T)"),
        _report("perturbation_estimate", rel(pert, pert), tolerance,
                f"|du|^2+|dxi|^2+alpha int|grad du|^2 <= (4 tau^2/alpha) int|U|_H-1^2 e^((4(2+mu^2)/alpha+M) t), tau={tau}"),
    ]


def write_reports(reports, json_path=None, csv_path=None):
    rows = [r.as_dict() for r in reports]
    if json_path is not None:
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2, default=float)
    if csv_path is not None:
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["name", "trials", "worst_margin", "passed", "tolerance", "formula"])
            for r in reports:
                writer.writerow([r.name, r.trials, repr(r.worst_margin), r.passed, r.tolerance, r.formula])
