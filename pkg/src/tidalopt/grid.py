"""Uniform collocated grid and its discrete operators.

Fields are plain :mod:`numpy` arrays. A scalar field has shape ``(ny, nx)``
(rows are lines of constant ``y``), a vector field has shape
``(2, ny, nx)``. Any number of extra leading axes is allowed, so a whole
trajectory can be pushed through an operator in one call.

The inner product is the tensor trapezoid rule. The divergence is defined
as the negative adjoint of :meth:`Grid.gradient` in that inner product,
which makes summation by parts exact up to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import fft


class SolverError(RuntimeError):
    """A linear solve did not reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


NORM_KINDS = ("L2", "L4", "H1semi", "Hminus1")


def rotate(v):
    """Return ``k x v = (-v2, v1)`` pointwise."""
    v = np.asarray(v)
    return np.stack([-v[..., 1, :, :], v[..., 0, :, :]], axis=-3)


def _trapezoid_weights(n):
    w = np.ones(n)
    w[0] = w[-1] = 0.5
    return w


def _gradient_matrix(n, d):
    # central differences inside, second-order one-sided at both ends
    m = np.zeros((n, n))
    for i in range(1, n - 1):
        m[i, i - 1] = -1.0
        m[i, i + 1] = 1.0
    m[0, :3] = [-3.0, 4.0, -1.0]
    m[-1, -3:] = [1.0, -4.0, 3.0]
    return m / (2.0 * d)


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if int(self.nx) < 3 or int(self.ny) < 3:
            raise ValueError(f"grid needs at least 3 nodes per axis, got {self.nx}x{self.ny}")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("domain side lengths must be positive")

    # geometry -------------------------------------------------------------

    @property
    def dx(self):
        return self.lx / (self.nx - 1)

    @property
    def dy(self):
        return self.ly / (self.ny - 1)

    @property
    def shape(self):
        return (self.ny, self.nx)

    @cached_property
    def x(self):
        return np.linspace(0.0, self.lx, self.nx)

    @cached_property
    def y(self):
        return np.linspace(0.0, self.ly, self.ny)

    @cached_property
    def mesh(self):
        """Coordinate arrays ``(X, Y)`` of shape ``(ny, nx)``."""
        return np.meshgrid(self.x, self.y, indexing="xy")

    @cached_property
    def weights(self):
        """Quadrature weight of every node (trapezoid rule, includes dx*dy)."""
        return np.outer(_trapezoid_weights(self.ny), _trapezoid_weights(self.nx)) * (self.dx * self.dy)

    @cached_property
    def interior(self):
        mask = np.zeros(self.shape)
        mask[1:-1, 1:-1] = 1.0
        return mask

    def zeros(self, rank=1, leading=()):
        lead = tuple(leading) + ((2,) if rank == 2 else ())
        return np.zeros(lead + self.shape)

    def check(self, f, rank=None):
        f = np.asarray(f, dtype=float)
        if f.shape[-2:] != self.shape:
            raise ValueError(f"field shape {f.shape} does not match grid {self.shape}")
        if rank == 2 and (f.ndim < 3 or f.shape[-3] != 2):
            raise ValueError("expected a vector field")
        return f

    def dirichlet(self, f):
        """Copy of ``f`` with every boundary node set to zero."""
        return self.check(f) * self.interior

    def is_dirichlet(self, f):
        f = np.asarray(f)
        return bool(
            np.all(f[..., 0, :] == 0)
            and np.all(f[..., -1, :] == 0)
            and np.all(f[..., :, 0] == 0)
            and np.all(f[..., :, -1] == 0)
        )

    # inner products and norms ---------------------------------------------

    def inner(self, a, b):
        """Grid inner product; vector components are summed."""
        prod = np.asarray(a) * np.asarray(b) * self.weights
        return float(prod.sum())

    def inner_many(self, a, b, axes=1):
        """Inner products over the trailing field axes, keeping ``axes`` leading axes."""
        prod = np.asarray(a) * np.asarray(b) * self.weights
        return prod.reshape(prod.shape[:axes] + (-1,)).sum(axis=-1)

    def norm(self, f, kind="L2", tol=1e-10, method="cg"):
        f = self.check(f)
        if kind == "L2":
            return float(np.sqrt(self.inner(f, f)))
        if kind == "L4":
            mag2 = (f * f).sum(axis=0) if f.ndim == 3 else f * f
            return float((mag2 * mag2 * self.weights).sum() ** 0.25)
        if kind == "H1semi":
            if f.ndim == 3:
                g = np.stack([self.gradient(f[0]), self.gradient(f[1])])
            else:
                g = self.gradient(f)
            return float(np.sqrt(self.inner(g, g)))
        if kind == "Hminus1":
            x = self.poisson_solve(f, tol=tol, method=method)
            return float(np.sqrt(max(self.inner(self.dirichlet(f), x), 0.0)))
        raise ValueError(f"unknown norm kind {kind!r}; expected one of {NORM_KINDS}")

    def l4_norm_many(self, f):
        """L4 norms of a stack of vector fields, shape ``(..., 2, ny, nx)``."""
        mag2 = (np.asarray(f) ** 2).sum(axis=-3)
        return ((mag2 * mag2 * self.weights).reshape(mag2.shape[:-2] + (-1,)).sum(axis=-1)) ** 0.25

    def dirichlet_energy(self, f):
        """``<-lap f, f>`` for a field that is zero on the boundary."""
        f = self.dirichlet(f)
        return self.inner(-self.laplacian(f), f)

    # difference operators -------------------------------------------------

    def laplacian(self, f):
        """Five-point Laplacian; the boundary values of ``f`` act as Dirichlet data."""
        f = self.check(f)
        out = np.zeros_like(f)
        c = f[..., 1:-1, 1:-1]
        out[..., 1:-1, 1:-1] = (f[..., 1:-1, 2:] - 2 * c + f[..., 1:-1, :-2]) / self.dx**2 + (
            f[..., 2:, 1:-1] - 2 * c + f[..., :-2, 1:-1]
        ) / self.dy**2
        return out

    @cached_property
    def _gx(self):
        return _gradient_matrix(self.nx, self.dx)

    @cached_property
    def _gy(self):
        return _gradient_matrix(self.ny, self.dy)

    @cached_property
    def _dx_adj(self):
        # negative weighted adjoint of the 1D gradient
        w = _trapezoid_weights(self.nx)
        return -(self._gx.T * w[None, :]) / w[:, None]

    @cached_property
    def _dy_adj(self):
        w = _trapezoid_weights(self.ny)
        return -(self._gy.T * w[None, :]) / w[:, None]

    def gradient(self, s):
        """Gradient of scalar field(s), shape ``(..., ny, nx) -> (..., 2, ny, nx)``."""
        s = self.check(s)
        gx = s @ self._gx.T
        gy = np.einsum("ij,...jk->...ik", self._gy, s)
        return np.stack([gx, gy], axis=-3)

    def divergence(self, v, check=True):
        """Divergence of vector field(s) that vanish on the boundary."""
        v = self.check(v, rank=2)
        if check and not self.is_dirichlet(v):
            raise ValueError("divergence expects a vector field with zero boundary values")
        return v[..., 0, :, :] @ self._dx_adj.T + np.einsum("ij,...jk->...ik", self._dy_adj, v[..., 1, :, :])

    def centered_divergence(self, v):
        """Divergence from the gradient stencils, for fields with boundary data."""
        v = self.check(v, rank=2)
        return v[..., 0, :, :] @ self._gx.T + np.einsum("ij,...jk->...ik", self._gy, v[..., 1, :, :])

    # Dirichlet Laplacian solves -----------------------------------------------

    @cached_property
    def laplacian_eigenvalues(self):
        """Eigenvalues of ``-lap`` on the interior nodes, shape ``(ny-2, nx-2)``."""
        kx = np.arange(1, self.nx - 1)
        ky = np.arange(1, self.ny - 1)
        ex = 4.0 / self.dx**2 * np.sin(np.pi * kx / (2 * (self.nx - 1))) ** 2
        ey = 4.0 / self.dy**2 * np.sin(np.pi * ky / (2 * (self.ny - 1))) ** 2
        return ey[:, None] + ex[None, :]

    def spectral_solve(self, rhs, shift=0.0, scale=1.0):
        """Solve ``(shift + scale * (-lap)) x = rhs`` on the interior by sine transform.

        Boundary values of ``rhs`` are ignored and the result is zero there.
        """
        rhs = self.check(rhs)
        out = np.zeros_like(rhs)
        inner = rhs[..., 1:-1, 1:-1]
        coef = fft.dstn(inner, type=1, axes=(-2, -1), norm="ortho")
        coef /= shift + scale * self.laplacian_eigenvalues
        out[..., 1:-1, 1:-1] = fft.idstn(coef, type=1, axes=(-2, -1), norm="ortho")
        return out

    def poisson_solve(self, rhs, tol=1e-10, method="cg", max_iter=None):
        """Solve ``-lap x = rhs`` with homogeneous Dirichlet data.

        ``method="cg"`` runs conjugate gradients on the five-point system,
        batched over all leading axes. ``method="spectral"`` uses the exact
        sine-transform diagonalization.
        """
        rhs = self.check(rhs)
        if method == "spectral":
            return self.spectral_solve(rhs)
        if method != "cg":
            raise ValueError(f"unknown Poisson method {method!r}")
        if tol <= 0:
            raise ValueError("tol must be positive")
        if not np.all(np.isfinite(rhs)):
            raise ValueError("right-hand side is not finite")
        max_iter = 10 * self.nx * self.ny if max_iter is None else max_iter
        return _batched_cg(self, rhs, tol, max_iter)


def _batched_cg(grid, rhs, tol, max_iter):
    b = grid.dirichlet(rhs)
    lead = b.shape[:-2]
    b = b.reshape((-1,) + grid.shape)
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()

    def dot(a, c):
        return (a * c).reshape(a.shape[0], -1).sum(axis=1)

    bnorm = np.sqrt(dot(b, b))
    rr = dot(r, r)
    target = (tol * bnorm) ** 2
    active = rr > target
    it = 0
    while np.any(active):
        if it >= max_iter:
            res = float(np.sqrt(rr[active].max()) / bnorm[active].max())
            raise SolverError(f"CG did not converge in {max_iter} iterations (relative residual {res:.3e})", res)
        ap = -grid.laplacian(p)
        pap = dot(p, ap)
        alpha = np.where(active, rr / np.where(active, pap, 1.0), 0.0)
        x += alpha[:, None, None] * p
        r -= alpha[:, None, None] * ap
        rr_new = dot(r, r)
        beta = np.where(active, rr_new / np.where(active, rr, 1.0), 0.0)
        p = r + beta[:, None, None] * p
        rr = rr_new
        active = rr > target
        it += 1
    return x.reshape(lead + grid.shape)
