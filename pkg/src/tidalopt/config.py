"""JSON scenario configuration: parsing, validation and model construction."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cost import CostSpec
from .fileio import read_field, read_trajectory
from .forward import TidalModel, TimeGrid, cfl_max_dt, solve_forward
from .grid import Grid
from .model import JACOBIAN_MODES, Bathymetry, PhysicalParams, assemble_forcing
from .optimize import OptimizeSettings
from .scenarios import gaussian_bump, uniform_flow


class ConfigError(ValueError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


# allowed keys and defaults for every section; None marks a required key
_SECTIONS = {
    "grid": {"nx": None, "ny": None, "lx": 1.0, "ly": 1.0},
    "time": {"T": None, "N": None},
    "params": {"alpha": None, "beta": 0.0, "r": 0.0},
    "optimizer": {"max_iters": 200, "tol": 1e-6, "strategy": "descent", "initial_step": 1.0,
                  "relaxation": 1.0, "armijo": 1e-4, "backtrack": 0.5},
}

_PRESETS = {
    "bathymetry": {
        "constant": {"depth": 1.0},
        "slope": {"d0": 1.0, "sx": 0.0, "sy": 0.0},
        "bump": {"d0": 1.0, "amp": 0.5, "width": 0.2},
    },
    "w0": {"zero": {}, "uniform": {"c1": 0.0, "c2": 0.0}, "file": {"path": None}},
    "forcing": {"zero": {}, "assembled": {}, "file": {"path": None}},
    "initial.u": {"zero": {}, "file": {"path": None}},
    "initial.xi": {"zero": {}, "bump": {"amp": 0.1, "width": 0.15}, "file": {"path": None}},
    "cost.targets": {"zero": {}, "twin": {"amp": 0.3}, "file": {"u_path": None, "xi_path": None}},
}

_TOP = {"grid", "time", "params", "bathymetry", "w0", "forcing", "initial", "cost", "optimizer",
        "jacobian", "cfl_safety", "seed", "output"}

DEFAULTS = {
    "w0": {"kind": "zero"},
    "forcing": {"kind": "zero"},
    "initial": {"u": {"kind": "zero"}, "xi": {"kind": "zero"}},
    "cost": {"kind": "tracking", "targets": {"kind": "zero"}},
    "jacobian": "exact",
    "cfl_safety": 1.0,
    "seed": 0,
    "output": "out",
}

# the sloping-basin scenario used when no config file is given
DEFAULT_SCENARIO = {
    "grid": {"nx": 32, "ny": 32},
    "time": {"T": 0.5, "N": 64},
    "params": {"alpha": 0.1, "beta": 0.5, "r": 0.5},
    "bathymetry": {"kind": "slope", "d0": 1.0, "sx": 0.3, "sy": 0.1},
    "w0": {"kind": "uniform", "c1": 0.2, "c2": 0.1},
    "forcing": {"kind": "assembled"},
    "initial": {"xi": {"kind": "bump", "amp": 0.1, "width": 0.15}},
}


def _number(path, value, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if integer and not float(value).is_integer():
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if not np.isfinite(value):
        raise ConfigError(path, "must be finite")
    return int(value) if integer else float(value)


def _section(path, raw, spec):
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected an object")
    unknown = set(raw) - set(spec)
    if unknown:
        raise ConfigError(path, f"unknown keys {sorted(unknown)}")
    out = {}
    for key, default in spec.items():
        if key in raw:
            out[key] = raw[key]
        elif default is None:
            raise ConfigError(f"{path}.{key}", "required key is missing")
        else:
            out[key] = default
    return out


def _preset(path, raw, table):
    if not isinstance(raw, dict) or "kind" not in raw:
        raise ConfigError(path, "expected an object with a 'kind' key")
    kind = raw["kind"]
    if kind not in table:
        raise ConfigError(f"{path}.kind", f"unknown preset {kind!r}; expected one of {sorted(table)}")
    body = {k: v for k, v in raw.items() if k != "kind"}
    out = _section(path, body, table[kind])
    for key, value in out.items():
        if key.endswith("path"):
            if not isinstance(value, str):
                raise ConfigError(f"{path}.{key}", "expected a file path")
        else:
            out[key] = _number(f"{path}.{key}", value)
    return {"kind": kind, **out}


@dataclass
class ScenarioConfig:
    """Validated scenario; ``base_dir`` resolves relative file paths."""

    grid: dict
    time: dict
    params: dict
    bathymetry: dict
    w0: dict
    forcing: dict
    initial: dict
    cost: dict
    optimizer: dict
    jacobian: str
    cfl_safety: float
    seed: int
    output: str
    base_dir: Path = field(default_factory=Path.cwd)

    def resolve(self, name):
        p = Path(name)
        return p if p.is_absolute() else self.base_dir / p

    def build_grid(self):
        return Grid(self.grid["nx"], self.grid["ny"], self.grid["lx"], self.grid["ly"])

    def build_model(self) -> TidalModel:
        grid = self.build_grid()
        time = TimeGrid(self.time["T"], self.time["N"])
        params = PhysicalParams(self.params["alpha"], self.params["beta"], self.params["r"])
        bathy = _bathymetry(self, grid)
        steps = time.steps
        w0 = self._w0(grid, steps)
        forcing = None
        if self.forcing["kind"] == "assembled":
            forcing = assemble_forcing(grid, params, bathy, w0, time.dt)
        elif self.forcing["kind"] == "file":
            forcing = self._trajectory("forcing.path", self.forcing["path"], 2, grid, steps)
        u0 = xi0 = None
        iu, ix = self.initial["u"], self.initial["xi"]
        if iu["kind"] == "file":
            u0 = read_field(self.resolve(iu["path"]), 2, grid)
        if ix["kind"] == "bump":
            xi0 = gaussian_bump(grid, ix["amp"], ix["width"])
        elif ix["kind"] == "file":
            xi0 = read_field(self.resolve(ix["path"]), 1, grid)
        return TidalModel(grid, params, bathy, time, w0=w0, forcing=forcing, u0=u0, xi0=xi0,
                          jacobian=self.jacobian, cfl_safety=self.cfl_safety)

    def _w0(self, grid, steps):
        kind = self.w0["kind"]
        if kind == "uniform":
            return uniform_flow(grid, steps, self.w0["c1"], self.w0["c2"])
        if kind == "file":
            return self._trajectory("w0.path", self.w0["path"], 2, grid, steps)
        return None

    def _trajectory(self, key, name, rank, grid, steps):
        path = self.resolve(name)
        if not path.is_file():
            raise ConfigError(key, f"file {path} does not exist")
        if path.suffix == ".json":
            _, data = read_trajectory(path, rank, grid)
            if len(data) != steps + 1:
                raise ConfigError(key, f"trajectory has {len(data)} snapshots, expected {steps + 1}")
            return data
        return np.broadcast_to(read_field(path, rank, grid), (steps + 1,) + ((2,) if rank == 2 else ()) + grid.shape).copy()

    def twin_truth(self, grid):
        """Truth control of a twin experiment: a scaled gradient of a smooth bump."""
        x, y = grid.mesh
        amp = self.cost["targets"]["amp"]
        bump = (np.sin(np.pi * x / grid.lx) * np.sin(np.pi * y / grid.ly)) ** 2
        return amp * grid.dirichlet(grid.gradient(bump))

    def build_cost(self, model: TidalModel) -> CostSpec:
        kind, tg = self.cost["kind"], self.cost["targets"]
        if tg["kind"] == "zero" or kind == "general":
            return CostSpec(kind)
        g, steps = model.grid, model.time.steps
        if tg["kind"] == "file":
            u = self._trajectory("cost.targets.u_path", tg["u_path"], 2, g, steps)
            xi = self._trajectory("cost.targets.xi_path", tg["xi_path"], 1, g, steps)
            return CostSpec(kind, u, xi)
        truth = self.twin_truth(g)
        if kind == "assimilation":
            traj = solve_forward(model, u0=truth)
        else:
            traj = solve_forward(model, np.broadcast_to(truth, (steps + 1,) + truth.shape))
        return CostSpec(kind, traj.u, traj.xi)

    def build_settings(self) -> OptimizeSettings:
        return OptimizeSettings(**self.optimizer)

    def as_dict(self):
        return {k: copy.deepcopy(getattr(self, k)) for k in sorted(_TOP)}


def validate_config(raw: dict, base_dir=None) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config", "top level must be an object")
    unknown = set(raw) - _TOP
    if unknown:
        raise ConfigError("config", f"unknown keys {sorted(unknown)}")
    for key in ("grid", "time", "params", "bathymetry"):
        if key not in raw:
            raise ConfigError(key, "required section is missing")
    grid = _section("grid", raw["grid"], _SECTIONS["grid"])
    for k in ("nx", "ny"):
        grid[k] = _number(f"grid.{k}", grid[k], integer=True)
        if grid[k] < 3:
            raise ConfigError(f"grid.{k}", "needs at least 3 nodes")
    for k in ("lx", "ly"):
        grid[k] = _number(f"grid.{k}", grid[k])
        if grid[k] <= 0:
            raise ConfigError(f"grid.{k}", "domain length must be positive")
    time = _section("time", raw["time"], _SECTIONS["time"])
    time["T"] = _number("time.T", time["T"])
    time["N"] = _number("time.N", time["N"], integer=True)
    if time["T"] <= 0 or time["N"] < 1:
        raise ConfigError("time", "T must be positive and N at least 1")
    params = _section("params", raw["params"], _SECTIONS["params"])
    params = {k: _number(f"params.{k}", v) for k, v in params.items()}
    if params["alpha"] <= 0:
        raise ConfigError("params.alpha", "viscosity must be positive")
    if params["r"] < 0:
        raise ConfigError("params.r", "friction coefficient must be nonnegative")
    bathy = _preset("bathymetry", raw["bathymetry"], _PRESETS["bathymetry"])
    merged = {k: copy.deepcopy(raw.get(k, v)) for k, v in DEFAULTS.items()}
    w0 = _preset("w0", merged["w0"], _PRESETS["w0"])
    forcing = _preset("forcing", merged["forcing"], _PRESETS["forcing"])
    init = merged["initial"]
    init_out = {}
    if not isinstance(init, dict) or set(init) - {"u", "xi"}:
        raise ConfigError("initial", "expected an object with optional keys 'u' and 'xi'")
    for k in ("u", "xi"):
        init_out[k] = _preset(f"initial.{k}", init.get(k, {"kind": "zero"}), _PRESETS[f"initial.{k}"])
    cost = merged["cost"]
    if not isinstance(cost, dict) or set(cost) - {"kind", "targets"}:
        raise ConfigError("cost", "expected an object with keys 'kind' and 'targets'")
    kind = cost.get("kind", "tracking")
    if kind not in ("tracking", "dissipation", "assimilation", "general"):
        raise ConfigError("cost.kind", f"unknown cost {kind!r}")
    cost_out = {"kind": kind, "targets": _preset("cost.targets", cost.get("targets", {"kind": "zero"}),
                                                 _PRESETS["cost.targets"])}
    opt = _section("optimizer", raw.get("optimizer", {}), _SECTIONS["optimizer"])
    for k in ("tol", "initial_step", "relaxation", "armijo", "backtrack"):
        opt[k] = _number(f"optimizer.{k}", opt[k])
    opt["max_iters"] = _number("optimizer.max_iters", opt["max_iters"], integer=True)
    try:
        OptimizeSettings(**opt)
    except ValueError as exc:
        raise ConfigError("optimizer", str(exc)) from None
    jac = merged["jacobian"]
    if jac not in JACOBIAN_MODES:
        raise ConfigError("jacobian", f"expected one of {JACOBIAN_MODES}, got {jac!r}")
    safety = _number("cfl_safety", merged["cfl_safety"])
    if not 0 < safety <= 1:
        raise ConfigError("cfl_safety", "must lie in (0, 1]")
    seed = _number("seed", merged["seed"], integer=True)
    if seed < 0:
        raise ConfigError("seed", "must be nonnegative")
    if not isinstance(merged["output"], str):
        raise ConfigError("output", "expected a directory path")
    cfg = ScenarioConfig(grid, time, params, bathy, w0, forcing, init_out, cost_out, opt, jac, safety, seed,
                         merged["output"], Path(base_dir) if base_dir is not None else Path.cwd())
    _check_physics(cfg)
    return cfg


def _bathymetry(cfg, grid):
    b = dict(cfg.bathymetry)
    kind = b.pop("kind")
    if kind == "bump" and b["width"] <= 0:
        raise ConfigError("bathymetry.width", "must be positive")
    make = {"constant": Bathymetry.constant, "slope": Bathymetry.slope, "bump": Bathymetry.bump}[kind]
    try:
        return make(grid, **b)
    except ValueError as exc:
        raise ConfigError("bathymetry", f"calm-sea {exc}") from None


def _check_physics(cfg: ScenarioConfig):
    grid = cfg.build_grid()
    bathy = _bathymetry(cfg, grid)
    dt = cfg.time["T"] / cfg.time["N"]
    limit = cfl_max_dt(grid, bathy, cfg.cfl_safety)
    if dt > limit:
        raise ConfigError("time", f"time step {dt:.6g} exceeds the CFL bound {limit:.6g}; increase N")
    for section, key in (("w0", "path"), ("forcing", "path")):
        sec = getattr(cfg, section)
        if sec["kind"] == "file" and not cfg.resolve(sec[key]).is_file():
            raise ConfigError(f"{section}.{key}", f"file {cfg.resolve(sec[key])} does not exist")
    for k in ("u", "xi"):
        sec = cfg.initial[k]
        if sec["kind"] == "file" and not cfg.resolve(sec["path"]).is_file():
            raise ConfigError(f"initial.{k}.path", f"file {cfg.resolve(sec['path'])} does not exist")
    tg = cfg.cost["targets"]
    if tg["kind"] == "file":
        for key in ("u_path", "xi_path"):
            if not cfg.resolve(tg[key]).is_file():
                raise ConfigError(f"cost.targets.{key}", f"file {cfg.resolve(tg[key])} does not exist")


def parse_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON: {exc}") from None
    return validate_config(raw, path.parent)


def default_config() -> ScenarioConfig:
    return validate_config(copy.deepcopy(DEFAULT_SCENARIO))
