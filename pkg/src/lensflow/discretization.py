"""Uniform grid, dense finite-difference matrices, quadrature and the H^-1 product."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import factorial

import numpy as np
import scipy.linalg

from .errors import ConfigError, DomainError

__all__ = [
    "Grid",
    "DiffOps",
    "fd_weights",
    "build_diff_ops",
    "integrate",
    "quadrature_weights",
    "neumann_poisson",
    "hminus1_inner",
    "remove_mean",
    "fd_jacobian",
    "MIN_NODES",
]

MIN_NODES = 9


@dataclass(frozen=True)
class Grid:
    """Uniform grid with ``n`` nodes on ``[-half_length, half_length]``."""

    n: int
    half_length: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < MIN_NODES:
            raise ConfigError(f"grid needs an integer n >= {MIN_NODES}, got {self.n!r}")
        if not self.half_length > 0.0:
            raise ConfigError("grid half length must be positive")
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def for_params(cls, params, n: int = 201) -> "Grid":
        return cls(n=n, half_length=params.l_star)

    @property
    def h(self) -> float:
        return 2.0 * self.half_length / (self.n - 1)

    @cached_property
    def x(self) -> np.ndarray:
        x = -self.half_length + self.h * np.arange(self.n)
        x[-1] = self.half_length
        # exact mirror symmetry keeps odd integrands at zero to roundoff
        return 0.5 * (x - x[::-1])

    @cached_property
    def ops(self) -> "DiffOps":
        return build_diff_ops(self)


@dataclass(frozen=True)
class DiffOps:
    """Dense difference matrices ``D1`` to ``D4`` (second-order accurate)."""

    D1: np.ndarray
    D2: np.ndarray
    D3: np.ndarray
    D4: np.ndarray

    def __getitem__(self, k: int) -> np.ndarray:
        return (self.D1, self.D2, self.D3, self.D4)[k - 1]


def fd_weights(offsets, k: int) -> np.ndarray:
    """Weights ``w`` with ``sum_j w_j f(j h) ~ h^k f^(k)(0)`` on integer offsets."""
    s = np.asarray(offsets, dtype=float)
    m = len(s)
    if m <= k:
        raise ValueError("need more points than the derivative order")
    V = np.vander(s, m, increasing=True).T / np.array([factorial(p) for p in range(m)])[:, None]
    rhs = np.zeros(m)
    rhs[k] = 1.0
    return np.linalg.solve(V, rhs)


def _derivative_matrix(n: int, h: float, k: int, boundary_order: int) -> np.ndarray:
    half = (k + 1) // 2
    centered = fd_weights(np.arange(-half, half + 1), k)
    D = np.zeros((n, n))
    for i in range(half, n - half):
        D[i, i - half : i + half + 1] = centered
    # rows too close to an end for the centred stencil; a wider one-sided
    # stencil there keeps the boundary truncation below the interior one
    wide = k + boundary_order
    for i in range(half):
        D[i, :wide] = fd_weights(np.arange(wide) - i, k)
        j = n - 1 - i
        D[j, n - wide :] = fd_weights(np.arange(wide) - (wide - 1 - i), k)
    return D / h**k


def build_diff_ops(grid: Grid, boundary_order: int = 4) -> DiffOps:
    """Centred second-order stencils in the interior.

    Rows without room for the centred stencil use one-sided stencils of
    order ``boundary_order``.
    """
    if grid.n < MIN_NODES:
        raise ConfigError(f"n must be at least {MIN_NODES}")
    if boundary_order < 2:
        raise ConfigError("boundary stencils must be at least second order")
    mats = [_derivative_matrix(grid.n, grid.h, k, boundary_order) for k in (1, 2, 3, 4)]
    for m in mats:
        m.setflags(write=False)
    return DiffOps(*mats)


def quadrature_weights(grid: Grid, rule: str = "trapezoid") -> np.ndarray:
    n, h = grid.n, grid.h
    if rule == "trapezoid":
        w = np.full(n, h)
        w[[0, -1]] = 0.5 * h
    elif rule == "simpson":
        if n % 2 == 0:
            raise ConfigError("Simpson's rule needs an odd number of nodes")
        w = np.full(n, 2.0)
        w[1::2] = 4.0
        w[[0, -1]] = 1.0
        w *= h / 3.0
    else:
        raise ConfigError(f"unknown quadrature rule {rule!r}")
    return w


def integrate(grid: Grid, f, rule: str = "trapezoid"):
    """Integral over the grid interval along the last axis of ``f``."""
    return np.asarray(f) @ quadrature_weights(grid, rule)


def remove_mean(grid: Grid, f) -> np.ndarray:
    """Subtract the (trapezoid) mean so that ``integrate(grid, f) == 0``."""
    f = np.asarray(f, dtype=float)
    return f - integrate(grid, f) / (2.0 * grid.half_length)


def _neumann_system(grid: Grid):
    n, h = grid.n, grid.h
    K = (2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / h**2
    # ghost-node reflection gives the zero-flux rows
    K[0, 1] = K[-1, -2] = -2.0 / h**2
    B = np.zeros((n + 1, n + 1))
    B[:n, :n] = K
    B[:n, n] = 1.0
    B[n, :n] = quadrature_weights(grid)
    return scipy.linalg.lu_factor(B)


_LU_CACHE: dict = {}


def neumann_poisson(grid: Grid, rho) -> np.ndarray:
    """Mean-zero solution of ``-u'' = rho`` with zero flux at both ends."""
    key = (grid.n, grid.half_length)
    if key not in _LU_CACHE:
        _LU_CACHE.clear()
        _LU_CACHE[key] = _neumann_system(grid)
    rhs = np.append(np.asarray(rho, dtype=float), 0.0)
    return scipy.linalg.lu_solve(_LU_CACHE[key], rhs)[:-1]


def _check_mean_zero(grid: Grid, rho, tol: float):
    mean = integrate(grid, rho)
    scale = integrate(grid, np.abs(rho))
    if abs(mean) > tol * scale + 1e-300:
        raise DomainError(f"field is not mean-zero: integral {mean:.3e} vs scale {scale:.3e}")


def hminus1_inner(grid: Grid, rho1, rho2, tol: float = 1e-8) -> float:
    """Discrete H^-1 inner product of two mean-zero fields.

    Each field is mapped to the potential ``u`` solving the Neumann problem
    and the result is the Dirichlet form ``sum (du1)(du2) / h`` of the
    piecewise-linear potentials, which is symmetric and positive definite.
    """
    _check_mean_zero(grid, rho1, tol)
    _check_mean_zero(grid, rho2, tol)
    u1 = neumann_poisson(grid, rho1)
    u2 = u1 if rho2 is rho1 else neumann_poisson(grid, rho2)
    return float(np.dot(np.diff(u1), np.diff(u2)) / grid.h)


def fd_jacobian(f, rho, eps: float = 1e-6, vectorized: bool = False) -> np.ndarray:
    """Central-difference Jacobian of ``f`` at ``rho``.

    The step for column ``j`` is ``eps * max(1, |rho_j|)``. With
    ``vectorized=True`` the map must accept a stack of states along the
    first axis and is called twice instead of ``2 n`` times.
    """
    rho = np.asarray(rho, dtype=float)
    n = rho.size
    steps = eps * np.maximum(1.0, np.abs(rho))
    if vectorized:
        plus = rho[None, :] + np.diag(steps)
        minus = rho[None, :] - np.diag(steps)
        return ((np.asarray(f(plus)) - np.asarray(f(minus))) / (2.0 * steps[:, None])).T
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = steps[j]
        cols.append((np.asarray(f(rho + e)) - np.asarray(f(rho - e))) / (2.0 * steps[j]))
    return np.column_stack(cols)
