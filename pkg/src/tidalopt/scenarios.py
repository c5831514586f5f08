"""Ready-made problem setups shared by the demos, tests and command line."""

from __future__ import annotations

import numpy as np

from .forward import TidalModel, TimeGrid
from .grid import Grid
from .model import Bathymetry, PhysicalParams, assemble_forcing


def gaussian_bump(grid, amp=0.1, width=0.15, center=None):
    x, y = grid.mesh
    cx, cy = center if center is not None else (grid.lx / 2, grid.ly / 2)
    return amp * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / width**2)


def uniform_flow(grid, steps, c1, c2):
    """Boundary flow extension constant in space and time."""
    return np.broadcast_to(np.array([c1, c2], float)[None, :, None, None], (steps + 1, 2) + grid.shape).copy()


def sine_mode(grid, j=1, k=1):
    x, y = grid.mesh
    return np.sin(j * np.pi * x / grid.lx) * np.sin(k * np.pi * y / grid.ly)


def default_model(nx=32, ny=32, t_final=0.5, steps=64, alpha=0.1, beta=0.5, r=0.5,
                  w0=(0.2, 0.1), slope=(0.3, 0.1), bump=0.1, jacobian="exact"):
    """Sloping basin with a uniform boundary flow and an initial surface bump."""
    grid = Grid(nx, ny)
    time = TimeGrid(t_final, steps)
    params = PhysicalParams(alpha, beta, r)
    bathy = Bathymetry.slope(grid, 1.0, *slope)
    flow = uniform_flow(grid, steps, *w0)
    forcing = assemble_forcing(grid, params, bathy, flow, time.dt)
    return TidalModel(grid, params, bathy, time, w0=flow, forcing=forcing,
                      xi0=gaussian_bump(grid, bump), jacobian=jacobian)


def constant_depth_model(nx=32, ny=32, t_final=0.5, steps=64, alpha=0.1, beta=0.5, r=0.5, depth=1.0, bump=0.1):
    grid = Grid(nx, ny)
    time = TimeGrid(t_final, steps)
    params = PhysicalParams(alpha, beta, r)
    return TidalModel(grid, params, Bathymetry.constant(grid, depth), time, xi0=gaussian_bump(grid, bump))
