"""Right-hand side of the height equation with the endpoint coupling eliminated.

The tangential offset near each endpoint is ``cot(theta)`` times the height
there, so its time derivative is a boundary rate. Solving the endpoint
equation for that rate gives a closed evolution law purely in ``rho``:

    rho_t = F(rho) + cot(theta) * b(rho) * beta[pr(x)],
    beta_pm = F(+-l) / (1 - cot(theta) * b(+-l)),

where ``F = -a * (surface Laplacian of curvature)`` is the normal velocity of
surface diffusion converted to a height rate.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, SingularCouplingError
from .geometry import CutoffProfile, LensParams, reference_jet, tau_jet
from .kinematics import CurveFields, curve_fields

__all__ = [
    "RhsBundle",
    "COUPLING_TOL",
    "node_geometry",
    "tangential_offset",
    "evaluate_fields",
    "frak_F",
    "frak_b",
    "boundary_rate",
    "full_rhs",
    "bc_residuals",
    "bc_vector",
]

COUPLING_TOL = 1e-8


@dataclass(frozen=True)
class RhsBundle:
    rhs: np.ndarray
    frakF: np.ndarray
    frakB: np.ndarray
    beta_minus: np.ndarray
    beta_plus: np.ndarray


@lru_cache(maxsize=16)
def node_geometry(params: LensParams, cutoff: CutoffProfile, grid):
    """Reference jets (orders 0..4) sampled on the grid nodes; cached."""
    ref = reference_jet(params, grid.x, 5)
    tau = tau_jet(params, cutoff, grid.x, 4)
    out = (ref.phi[:5].copy(), ref.normal[:5].copy(), tau)
    for arr in out:
        arr.setflags(write=False)
    return out


def tangential_offset(rho, grid, params: LensParams) -> np.ndarray:
    """Nodewise offset ``cot(theta) * rho(pr x)``."""
    rho = np.asarray(rho, dtype=float)
    right = grid.x >= 0.0
    return params.cot_theta * np.where(right, rho[..., -1:], rho[..., :1])


def _default_cutoff(params, cutoff):
    return CutoffProfile.default(params) if cutoff is None else cutoff


def evaluate_fields(rho, grid, params: LensParams, cutoff=None) -> CurveFields:
    """Curve geometry of ``rho`` (shape ``(n,)`` or a stack ``(m, n)``)."""
    cutoff = _default_cutoff(params, cutoff)
    rho = np.asarray(rho, dtype=float)
    if rho.shape[-1] != grid.n:
        raise DomainError(f"field has {rho.shape[-1]} values, grid has {grid.n}")
    mu = tangential_offset(rho, grid, params)
    tube = params.tube_radius
    if not np.all(np.isfinite(rho)) or np.any(np.abs(rho) > tube) or np.any(np.abs(mu) > tube):
        raise DomainError(f"height or tangential offset outside the tube of radius {tube}")
    phi, normal, tau = node_geometry(params, cutoff, grid)
    return curve_fields(rho, mu, phi, normal, tau, grid.ops)


def frak_F(rho, grid, params: LensParams, cutoff=None, fields=None) -> np.ndarray:
    """Height rate produced by the normal velocity ``-(surface Laplacian of kappa)``."""
    f = evaluate_fields(rho, grid, params, cutoff) if fields is None else fields
    return -f.a * f.lap_kappa


def frak_b(rho, grid, params: LensParams, cutoff=None, fields=None) -> np.ndarray:
    f = evaluate_fields(rho, grid, params, cutoff) if fields is None else fields
    return f.b


def _rates(F, b, cot):
    den_m = 1.0 - cot * b[..., 0]
    den_p = 1.0 - cot * b[..., -1]
    if np.any(np.abs(den_m) < COUPLING_TOL) or np.any(np.abs(den_p) < COUPLING_TOL):
        raise SingularCouplingError("1 - cot(theta) * b vanished at an endpoint")
    return F[..., 0] / den_m, F[..., -1] / den_p


def boundary_rate(rho, grid, params: LensParams, cutoff=None):
    """Endpoint rates ``(beta_minus, beta_plus)``."""
    f = evaluate_fields(rho, grid, params, cutoff)
    return _rates(-f.a * f.lap_kappa, f.b, params.cot_theta)


def full_rhs(rho, grid, params: LensParams, cutoff=None, fields=None) -> RhsBundle:
    """Full right-hand side; at the two end nodes it equals the endpoint rates."""
    f = evaluate_fields(rho, grid, params, cutoff) if fields is None else fields
    F = -f.a * f.lap_kappa
    cot = params.cot_theta
    beta_m, beta_p = _rates(F, f.b, cot)
    beta = np.where(grid.x >= 0.0, np.asarray(beta_p)[..., None], np.asarray(beta_m)[..., None])
    rhs = F + cot * f.b * beta
    return RhsBundle(rhs=rhs, frakF=F, frakB=f.b, beta_minus=beta_m, beta_plus=beta_p)


def bc_vector(fields: CurveFields, params: LensParams) -> np.ndarray:
    """Boundary residuals ordered as ``(g1m, g2m, g2p, g1p)`` along the last axis."""
    cos = np.cos(params.theta)
    ny = fields.normal[..., 1]
    return np.stack(
        [ny[..., 0] - cos, fields.kappa_x[..., 0], fields.kappa_x[..., -1], ny[..., -1] - cos],
        axis=-1,
    )


def bc_residuals(rho, grid, params: LensParams, cutoff=None) -> dict:
    """Angle condition and zero curvature flux at both endpoints.

    ``g1`` is ``<N, e2> - cos(theta)``; ``g2`` is the derivative of curvature,
    obtained by the chain rule from one-sided difference derivatives of
    ``rho`` up to third order.
    """
    v = bc_vector(evaluate_fields(rho, grid, params, cutoff), params)
    return {
        "g1_minus": v[..., 0],
        "g2_minus": v[..., 1],
        "g2_plus": v[..., 2],
        "g1_plus": v[..., 3],
    }
