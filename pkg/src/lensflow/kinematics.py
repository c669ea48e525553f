"""Metric factor, normal, curvature and evolution coefficients of a perturbed arc.

The pointwise functions take a :class:`PointState` (height and its first two
derivatives plus the frozen tangential offset) together with the jets of the
tubular map from :func:`lensflow.geometry.psi_jet`. All of them broadcast
over arrays of states.

:func:`curve_fields` evaluates the same geometry along a whole grid from
higher derivatives of the height field, which is what the evolution
operator needs.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import DegenerateParametrizationError
from .geometry import rotate

__all__ = [
    "PointState",
    "CurveFields",
    "DENOMINATOR_TOL",
    "metric_J",
    "unit_normal",
    "curvature",
    "curvature_compact",
    "coeff_a",
    "coeff_b",
    "laplace_beltrami",
    "curve_fields",
]

#: Threshold below which ``<Psi_w, R Psi_s>`` counts as degenerate.
DENOMINATOR_TOL = 1e-8


@dataclass(frozen=True)
class PointState:
    """Height data at a point. ``mu`` is the tangential offset, held constant in x."""

    x: object
    rho: object
    rho_x: object
    rho_xx: object
    mu: object


def _dot(a, b):
    return np.sum(np.asarray(a) * np.asarray(b), axis=-1)


def _col(v):
    return np.asarray(v, dtype=float)[..., None]


def metric_J(state: PointState, geom) -> np.ndarray:
    """Length element ``|Psi_s + Psi_w rho_x|`` from its expanded square."""
    rx = np.asarray(state.rho_x, dtype=float)
    sq = (
        _dot(geom.psi_s, geom.psi_s)
        + 2.0 * _dot(geom.psi_s, geom.psi_w) * rx
        + _dot(geom.psi_w, geom.psi_w) * rx**2
    )
    J = np.sqrt(np.maximum(sq, 0.0))
    if np.any(J <= np.finfo(float).eps):
        raise DegenerateParametrizationError("metric factor vanished")
    return J


def unit_normal(state: PointState, geom) -> np.ndarray:
    J = metric_J(state, geom)
    return (rotate(geom.psi_s) + rotate(geom.psi_w) * _col(state.rho_x)) / J[..., None]


def curvature(state: PointState, geom) -> np.ndarray:
    """Curvature as a polynomial in the height derivatives.

    The numerator is grouped by powers of ``rho_x`` with ``rho_xx``
    entering linearly; negative on the reference arc.
    """
    rx = np.asarray(state.rho_x, dtype=float)
    rxx = np.asarray(state.rho_xx, dtype=float)
    Rs, Rw = rotate(geom.psi_s), rotate(geom.psi_w)
    num = (
        _dot(geom.psi_w, Rs) * rxx
        + (2.0 * _dot(geom.psi_sw, Rs) + _dot(geom.psi_ss, Rw)) * rx
        + (_dot(geom.psi_ww, Rs) + 2.0 * _dot(geom.psi_sw, Rw) + _dot(geom.psi_ww, Rw) * rx) * rx**2
        + _dot(geom.psi_ss, Rs)
    )
    return num / metric_J(state, geom) ** 3


def curvature_compact(state: PointState, geom) -> np.ndarray:
    """Curvature ``<C'', R C'> / |C'|^3`` of the curve ``C`` built by vector algebra."""
    rx, rxx = _col(state.rho_x), _col(state.rho_xx)
    d1 = geom.psi_s + geom.psi_w * rx
    d2 = geom.psi_ss + 2.0 * geom.psi_sw * rx + geom.psi_ww * rx**2 + geom.psi_w * rxx
    J = np.linalg.norm(d1, axis=-1)
    if np.any(J <= np.finfo(float).eps):
        raise DegenerateParametrizationError("metric factor vanished")
    return _dot(d2, rotate(d1)) / J**3


def _normal_projection(geom):
    den = _dot(geom.psi_w, rotate(geom.psi_s))
    if np.any(np.abs(den) < DENOMINATOR_TOL):
        raise DegenerateParametrizationError("<Psi_w, R Psi_s> vanished")
    return den


def coeff_a(state: PointState, geom) -> np.ndarray:
    """Ratio of the length element to the normal component of ``Psi_w``."""
    return metric_J(state, geom) / _normal_projection(geom)


def coeff_b(state: PointState, geom) -> np.ndarray:
    """Weight of the tangential offset velocity in the height equation."""
    den = _normal_projection(geom)
    rx = np.asarray(state.rho_x, dtype=float)
    num = _dot(geom.psi_r, rotate(geom.psi_s)) + _dot(geom.psi_r, rotate(geom.psi_w)) * rx
    return -num / den


def laplace_beltrami(v, J, grid) -> np.ndarray:
    """Second derivative in arc length, ``(1/J) d/dx ((1/J) dv/dx)``.

    Expanded with the product rule as ``v''/J^2 - J' v'/J^3`` so that the
    principal part uses the compact second-difference stencil.
    """
    D1, D2 = grid.ops.D1, grid.ops.D2
    v = np.asarray(v, dtype=float)
    J = np.asarray(J, dtype=float)
    if np.any(J <= 0.0):
        raise DegenerateParametrizationError("metric factor must be positive")
    return (v @ D2.T) / J**2 - (J @ D1.T) * (v @ D1.T) / J**3


@dataclass(frozen=True)
class CurveFields:
    """Geometry of the curve along the grid for one or more height fields.

    ``derivs[k]`` is the k-th difference derivative of the height;
    ``mu`` the nodewise tangential offset; ``kappa_x`` and ``kappa_xx``
    the derivatives of curvature in the grid coordinate; ``lap_kappa``
    the arc-length Laplacian of curvature.
    """

    derivs: np.ndarray
    mu: np.ndarray
    J: np.ndarray
    normal: np.ndarray
    kappa: np.ndarray
    kappa_x: np.ndarray
    kappa_xx: np.ndarray
    lap_kappa: np.ndarray
    a: np.ndarray
    b: np.ndarray


def curve_fields(rho, mu, ref_phi, ref_normal, tau, ops) -> CurveFields:
    """Evaluate the curve geometry from difference derivatives of ``rho``.

    Parameters
    ----------
    rho : array, shape (..., n)
    mu : array, shape (..., n)
        Tangential offset at each node (constant on each half).
    ref_phi, ref_normal, tau : arrays, shape (5, n, 2)
        Derivatives 0..4 of the reference arc, its normal and the
        tangential field at the nodes.
    ops : DiffOps
    """
    rho = np.asarray(rho, dtype=float)
    derivs = np.stack([rho] + [rho @ ops[k].T for k in (1, 2, 3, 4)])
    m = mu[..., None]
    # derivatives of C(x) = Phi*(x) + rho(x) N*(x) + mu tau*(x)
    curve = []
    for k in range(1, 5):
        acc = ref_phi[k] + m * tau[k]
        for j in range(k + 1):
            acc = acc + comb(k, j) * derivs[j][..., None] * ref_normal[k - j]
        curve.append(acc)
    c1, c2, c3, c4 = curve
    Rc1, Rc2 = rotate(c1), rotate(c2)

    G = _dot(c1, c1)
    if np.any(G <= np.finfo(float).eps ** 2):
        raise DegenerateParametrizationError("metric factor vanished")
    G1 = 2.0 * _dot(c1, c2)
    G2 = 2.0 * (_dot(c2, c2) + _dot(c1, c3))
    Nm = _dot(c2, Rc1)
    Nm1 = _dot(c3, Rc1)
    Nm2 = _dot(c4, Rc1) + _dot(c3, Rc2)

    J = np.sqrt(G)
    kappa = Nm / G**1.5
    kappa_x = Nm1 / G**1.5 - 1.5 * Nm * G1 / G**2.5
    kappa_xx = (
        Nm2 / G**1.5
        - 3.0 * Nm1 * G1 / G**2.5
        + 3.75 * Nm * G1**2 / G**3.5
        - 1.5 * Nm * G2 / G**2.5
    )
    lap = kappa_xx / G - 0.5 * kappa_x * G1 / G**2

    # partial x-derivative of the tubular map at fixed offsets
    psi_s = ref_phi[1] + derivs[0][..., None] * ref_normal[1] + m * tau[1]
    den = _dot(ref_normal[0], rotate(psi_s))
    if np.any(np.abs(den) < DENOMINATOR_TOL):
        raise DegenerateParametrizationError("<Psi_w, R Psi_s> vanished")
    a = J / den
    b = -(_dot(tau[0], rotate(psi_s)) + _dot(tau[0], rotate(ref_normal[0])) * derivs[1]) / den
    normal = Rc1 / J[..., None]
    return CurveFields(derivs, np.asarray(mu), J, normal, kappa, kappa_x, kappa_xx, lap, a, b)
