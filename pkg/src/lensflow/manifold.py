"""Circular-arc equilibria as height fields over the reference arc.

A circle of radius ``r`` centred at ``(a1, -r cos(theta))`` meets the x-axis
at the contact angle for every ``a1``. The height field representing it is
found node by node: the two endpoint equations only involve the endpoint
height, and once those are known every interior node is a scalar equation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discretization import integrate, quadrature_weights
from .errors import ChartOutOfRangeError, ConfigError, DomainError
from .geometry import CutoffProfile, LensParams, reference_jet, tau_jet

__all__ = [
    "ManifoldPoint",
    "ClosestPoint",
    "CHART_RADIUS",
    "chart_center",
    "solve_rho",
    "chart_jets",
    "manifold_tangents",
    "kernel_fields",
    "closest_point",
    "radius_from_area",
]

#: Radius of the admissible (a1, r) ball around (0, r_star), in units of r_star.
CHART_RADIUS = 0.2


@dataclass(frozen=True)
class ManifoldPoint:
    a1: float
    r: float
    rho: np.ndarray
    converged: bool
    residual: float
    iterations: int


@dataclass(frozen=True)
class ClosestPoint:
    a1: float
    r: float
    distance: float
    converged: bool
    iterations: int


def chart_center(a1: float, r: float, params: LensParams) -> np.ndarray:
    return np.array([a1, -r * np.cos(params.theta)])


def _check_chart(a1, r, params):
    if not (np.isfinite(a1) and np.isfinite(r)):
        raise ChartOutOfRangeError("non-finite chart coordinates")
    if np.hypot(a1, r - params.r_star) > CHART_RADIUS * params.r_star * (1 + 1e-12):
        raise ChartOutOfRangeError(
            f"(a1, r) = ({a1}, {r}) outside the chart ball of radius {CHART_RADIUS} r_star"
        )


def _newton_quadratic(p, d, c, r, tol, maxit=30):
    """Roots near zero of ``|p + s d - c|^2 = r^2`` by vectorised Newton."""
    s = np.zeros(p.shape[:-1])
    for it in range(1, maxit + 1):
        e = p + s[..., None] * d - c
        f = np.sum(e * e, axis=-1) - r * r
        df = 2.0 * np.sum(d * e, axis=-1)
        if np.any(np.abs(df) < 1e-14):
            raise ChartOutOfRangeError("chart equation has a vanishing derivative")
        step = f / df
        s = s - step
        if np.max(np.abs(step)) <= tol:
            e = p + s[..., None] * d - c
            res = np.abs(np.sum(e * e, axis=-1) - r * r)
            return s, float(np.max(res)), it
    raise ChartOutOfRangeError("Newton iteration for the chart did not converge")


def solve_rho(a1, r, grid, params: LensParams, cutoff=None, tol=1e-15) -> ManifoldPoint:
    """Height field of the circle with centre ``(a1, -r cos(theta))`` and radius ``r``.

    The reported residual is ``max |(|C(x) - centre|^2 - r^2)|`` over nodes.
    """
    cutoff = CutoffProfile.default(params) if cutoff is None else cutoff
    _check_chart(a1, r, params)
    x = grid.x
    ref = reference_jet(params, x, 0)
    tau = tau_jet(params, cutoff, x, 0)[0]
    c = chart_center(a1, r, params)
    cot = params.cot_theta

    ends = [0, grid.n - 1]
    # at the ends the tangential offset is cot(theta) times the unknown itself
    d_end = ref.normal[0][ends] + cot * tau[ends]
    s_end, res_end, it1 = _newton_quadratic(ref.phi[0][ends], d_end, c, r, tol)
    mu = cot * np.where(x >= 0.0, s_end[1], s_end[0])
    base = ref.phi[0] + mu[:, None] * tau
    rho, res, it2 = _newton_quadratic(base, ref.normal[0], c, r, tol)
    rho[ends] = s_end
    residual = max(res, res_end)
    tube = params.tube_radius
    if np.any(np.abs(rho) > tube) or np.any(np.abs(mu) > tube):
        raise ChartOutOfRangeError("chart point leaves the tube around the arc")
    return ManifoldPoint(float(a1), float(r), rho, True, residual, max(it1, it2))


def chart_jets(a1, r, grid, params: LensParams, cutoff=None):
    """Exact first and second x-derivatives of the chart height field.

    Obtained by differentiating ``|C(x) - centre|^2 = r^2`` implicitly, so
    they carry no difference error. Returns ``(rho, rho_x, rho_xx, mu)``.
    """
    cutoff = CutoffProfile.default(params) if cutoff is None else cutoff
    pt = solve_rho(a1, r, grid, params, cutoff)
    x = grid.x
    ref = reference_jet(params, x, 2)
    tau = tau_jet(params, cutoff, x, 2)
    rho = pt.rho
    mu = params.cot_theta * np.where(x >= 0.0, rho[-1], rho[0])
    m, h = mu[:, None], rho[:, None]
    E = ref.phi[0] + h * ref.normal[0] + m * tau[0] - chart_center(a1, r, params)
    psi_s = ref.phi[1] + h * ref.normal[1] + m * tau[1]
    en = np.sum(E * ref.normal[0], axis=-1)
    rho_x = -np.sum(E * psi_s, axis=-1) / en
    d1 = psi_s + rho_x[:, None] * ref.normal[0]
    psi_ss = ref.phi[2] + h * ref.normal[2] + m * tau[2]
    partial = psi_ss + 2.0 * rho_x[:, None] * ref.normal[1]
    rho_xx = -(np.sum(d1 * d1, axis=-1) + np.sum(E * partial, axis=-1)) / en
    return rho, rho_x, rho_xx, mu


def manifold_tangents(a1, r, grid, params: LensParams, cutoff=None, step=None) -> dict:
    """Central-difference derivatives of the chart in ``a1`` and ``r``."""
    eps = 1e-5 * params.r_star if step is None else step

    def rho_at(aa, rr):
        return solve_rho(aa, rr, grid, params, cutoff).rho

    return {
        "d_rho_da1": (rho_at(a1 + eps, r) - rho_at(a1 - eps, r)) / (2 * eps),
        "d_rho_dr": (rho_at(a1, r + eps) - rho_at(a1, r - eps)) / (2 * eps),
    }


def kernel_fields(grid, params: LensParams):
    """Closed-form tangent directions at the reference arc, ``(v1, v2)``.

    ``v1 = 1 - cos(theta) cos(kappa x)`` is the radius direction and
    ``v2 = sin(kappa x)`` equals minus the translation direction.
    """
    k = params.kappa_star
    x = grid.x
    return 1.0 - np.cos(params.theta) * np.cos(k * x), np.sin(k * x)


def closest_point(
    rho, grid, params: LensParams, cutoff=None, start=None, tol=1e-12, maxit=30
) -> ClosestPoint:
    """Chart point nearest to ``rho`` in the discrete L2 norm (Gauss-Newton).

    Without ``start`` the iteration begins from the kernel coordinates of
    ``rho``: the L2 projection onto the closed-form tangent directions.
    """
    rho = np.asarray(rho, dtype=float)
    w = np.sqrt(quadrature_weights(grid))
    if start is None:
        v1, v2 = kernel_fields(grid, params)
        T = np.column_stack([v1, v2]) * w[:, None]
        c1, c2 = np.linalg.lstsq(T, rho * w, rcond=None)[0]
        p = np.array([-c2, params.r_star + c1])
    else:
        p = np.asarray(start, dtype=float)
    converged = False
    it = 0
    for it in range(1, maxit + 1):
        try:
            base = solve_rho(p[0], p[1], grid, params, cutoff).rho
            tan = manifold_tangents(p[0], p[1], grid, params, cutoff)
        except ChartOutOfRangeError:
            break
        Jm = np.column_stack([tan["d_rho_da1"], tan["d_rho_dr"]]) * w[:, None]
        step = np.linalg.lstsq(Jm, (rho - base) * w, rcond=None)[0]
        p = p + step
        if np.max(np.abs(step)) <= tol * params.r_star:
            converged = True
            break
    try:
        diff = rho - solve_rho(p[0], p[1], grid, params, cutoff).rho
        dist = float(np.sqrt(integrate(grid, diff * diff)))
    except ChartOutOfRangeError:
        dist = float("nan")
    return ClosestPoint(float(p[0]), float(p[1]), dist, converged, it)


def radius_from_area(area: float, params: LensParams) -> float:
    """Radius of the circular segment with the given area and contact angle."""
    t = params.theta
    shape = t - np.sin(t) * np.cos(t)
    if shape <= 0.0:
        raise DomainError("degenerate segment shape factor")
    if not area > 0.0:
        raise ConfigError(f"area must be positive, got {area!r}")
    return float(np.sqrt(area / shape))
