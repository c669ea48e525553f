"""Reference arc geometry for the symmetric lens.

The stationary curve is the circular arc of radius ``r_star`` centred at
``(0, -r_star*cos(theta))`` that meets the x-axis at ``x = +-r_star*sin(theta)``.
Points near the arc are addressed by an arc-length coordinate ``x`` in
``[-l_star, l_star]``, a normal offset ``w`` and a tangential offset ``r``
that is only active close to the two endpoints.

Every function here is vectorised over ``x``; vector-valued results carry
the two Cartesian components on the last axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import ConfigError, DomainError

__all__ = [
    "LensParams",
    "CutoffProfile",
    "ReferenceJet",
    "PsiJet",
    "rotate",
    "reference_jet",
    "conormal",
    "tau_jet",
    "pr",
    "psi_jet",
    "curve_points",
    "enclosed_area",
    "segment_area",
    "TUBE_FRACTION",
    "SMOOTHNESS",
    "smoothstep_coefficients",
]

#: Default radius of the tube around the arc, as a fraction of ``r_star``.
TUBE_FRACTION = 0.3

#: Number of derivatives of the cutoff that vanish at both ends of the ramp.
SMOOTHNESS = 6


def smoothstep_coefficients(order: int) -> np.ndarray:
    """Monomial coefficients of the ramp of degree ``2 order + 1``.

    The polynomial rises from 0 at s=0 to 1 at s=1 and its first ``order``
    derivatives vanish at both ends.
    """
    c = np.zeros(2 * order + 2)
    for k in range(order + 1):
        c[order + 1 + k] = comb(order + k, k) * comb(2 * order + 1, order - k) * (-1) ** k
    return c


_SMOOTHSTEP = smoothstep_coefficients(SMOOTHNESS)


@dataclass(frozen=True)
class LensParams:
    """Equilibrium configuration.

    Parameters
    ----------
    theta : float
        Contact angle parameter, strictly between 0 and pi.
    r_star : float
        Radius of the reference arc.
    """

    theta: float
    r_star: float = 1.0

    def __post_init__(self):
        theta, r_star = float(self.theta), float(self.r_star)
        if not np.isfinite(theta) or not 0.0 < theta < np.pi:
            raise ConfigError(f"theta must lie in (0, pi), got {self.theta!r}")
        if not np.isfinite(r_star) or r_star <= 0.0:
            raise ConfigError(f"r_star must be positive, got {self.r_star!r}")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "r_star", r_star)

    @property
    def l_star(self) -> float:
        """Half of the arc length."""
        return self.theta * self.r_star

    @property
    def kappa_star(self) -> float:
        """Curvature of the reference arc (negative for the outward normal)."""
        return -1.0 / self.r_star

    @property
    def cot_theta(self) -> float:
        return np.cos(self.theta) / np.sin(self.theta)

    @property
    def tube_radius(self) -> float:
        return TUBE_FRACTION * self.r_star


@dataclass(frozen=True)
class CutoffProfile:
    """Smooth cutoff equal to one at both endpoints and zero in the middle.

    ``chi(x) = q((|x| - (l_star - width)) / width)`` where ``q`` is a
    polynomial ramp with six vanishing derivatives at both ends, so ``chi``
    is six times continuously differentiable.
    """

    width: float
    l_star: float

    def __post_init__(self):
        if not 0.0 < self.width < self.l_star:
            raise ConfigError(
                f"cutoff width must lie in (0, l_star={self.l_star}), got {self.width!r}"
            )

    @classmethod
    def default(cls, params: LensParams, fraction: float = 0.5) -> "CutoffProfile":
        """Cutoff of width ``fraction * l_star``."""
        if not 0.0 < fraction < 1.0:
            raise ConfigError(f"cutoff fraction must lie in (0, 1), got {fraction!r}")
        return cls(width=fraction * params.l_star, l_star=params.l_star)

    def __call__(self, x, deriv: int = 0):
        """Evaluate the ``deriv``-th derivative of the profile at ``x``."""
        x = np.asarray(x, dtype=float)
        s = (np.abs(x) - (self.l_star - self.width)) / self.width
        coef = P.polyder(_SMOOTHSTEP, deriv) if deriv else _SMOOTHSTEP
        inside = (s > 0.0) & (s < 1.0)
        val = np.where(inside, P.polyval(np.clip(s, 0.0, 1.0), coef), 0.0)
        if deriv == 0:
            val = np.where(s >= 1.0, 1.0, val)
        else:
            # d|x|/dx = sign(x); the profile is flat wherever sign(0) matters.
            val = val * (np.sign(x) / self.width) ** deriv
        return val


@dataclass(frozen=True)
class ReferenceJet:
    """Derivatives of the reference arc.

    ``phi[k]`` and ``normal[k]`` hold the k-th derivatives in ``x``.
    """

    phi: np.ndarray
    normal: np.ndarray

    @property
    def tangent(self):
        return self.phi[1]


@dataclass(frozen=True)
class PsiJet:
    """Value and partial derivatives of the tubular map at ``(x, w, r)``."""

    psi: np.ndarray
    psi_s: np.ndarray
    psi_w: np.ndarray
    psi_r: np.ndarray
    psi_ss: np.ndarray
    psi_sw: np.ndarray
    psi_ww: np.ndarray


def rotate(v):
    """Anticlockwise rotation by a right angle, ``(a, b) -> (-b, a)``."""
    v = np.asarray(v)
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def _check_x(params: LensParams, x):
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > params.l_star * (1.0 + 1e-12)):
        raise DomainError(f"arc coordinate outside [-l_star, l_star] = ±{params.l_star}")
    return x


def _trig_cycle(u, k):
    """k-th derivative of (sin u, cos u) with respect to u."""
    s, c = np.sin(u), np.cos(u)
    table = [(s, c), (c, -s), (-s, -c), (-c, s)]
    a, b = table[k % 4]
    return np.stack([a, b], axis=-1)


def reference_jet(params: LensParams, x, order: int = 2) -> ReferenceJet:
    """Reference arc, its outward normal and their derivatives up to ``order``."""
    x = _check_x(params, x)
    r = params.r_star
    u = x / r
    normal = np.stack([_trig_cycle(u, k) / r**k for k in range(order + 1)])
    phi = r * normal.copy()
    phi[0, ..., 1] -= r * np.cos(params.theta)
    return ReferenceJet(phi=phi, normal=normal)


def conormal(params: LensParams, endpoint) -> np.ndarray:
    """Outer unit conormal of the reference arc at ``endpoint`` (sign of +-l_star)."""
    side = 1.0 if float(endpoint) > 0 else -1.0
    return np.array([side * np.cos(params.theta), -np.sin(params.theta)])


def tau_jet(params: LensParams, cutoff: CutoffProfile, x, order: int = 2) -> np.ndarray:
    """Tangential field ``chi * sign(x) * T`` and its derivatives up to ``order``.

    Returns an array of shape ``(order + 1,) + x.shape + (2,)``.
    """
    x = _check_x(params, x)
    ref = reference_jet(params, x, order + 1)
    side = np.where(x >= 0.0, 1.0, -1.0)[..., None]
    chi = [cutoff(x, j)[..., None] for j in range(order + 1)]
    out = []
    for k in range(order + 1):
        acc = np.zeros(x.shape + (2,))
        for j in range(k + 1):
            acc = acc + comb(k, j) * chi[j] * ref.phi[k - j + 1]
        out.append(side * acc)
    return np.stack(out)


def pr(params: LensParams, x):
    """Nearest endpoint coordinate; ``x = 0`` maps to ``+l_star``."""
    x = np.asarray(x, dtype=float)
    return np.where(x >= 0.0, params.l_star, -params.l_star)


def psi_jet(params: LensParams, cutoff: CutoffProfile, x, w, r, tube=None) -> PsiJet:
    """Tubular map ``Phi* + w N* + r tau*`` and its partial derivatives."""
    tube = params.tube_radius if tube is None else tube
    w = np.asarray(w, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(np.abs(w) > tube) or np.any(np.abs(r) > tube):
        raise DomainError(f"offset outside the tube of radius {tube}")
    ref = reference_jet(params, x, 2)
    tau = tau_jet(params, cutoff, x, 2)
    w_, r_ = w[..., None], r[..., None]
    return PsiJet(
        psi=ref.phi[0] + w_ * ref.normal[0] + r_ * tau[0],
        psi_s=ref.phi[1] + w_ * ref.normal[1] + r_ * tau[1],
        psi_w=np.broadcast_to(ref.normal[0], tau[0].shape).copy(),
        psi_r=tau[0],
        psi_ss=ref.phi[2] + w_ * ref.normal[2] + r_ * tau[2],
        psi_sw=np.broadcast_to(ref.normal[1], tau[0].shape).copy(),
        psi_ww=np.zeros(tau[0].shape),
    )


def curve_points(params: LensParams, cutoff: CutoffProfile, x, rho) -> np.ndarray:
    """Points of the curve described by the height field ``rho`` on nodes ``x``.

    The tangential offset is ``cot(theta) * rho`` at the nearer endpoint, which
    keeps both endpoints on the x-axis.
    """
    x = np.asarray(x, dtype=float)
    rho = np.asarray(rho, dtype=float)
    mu = params.cot_theta * np.where(x >= 0.0, rho[..., -1:], rho[..., :1])
    ref = reference_jet(params, x, 0)
    tau = tau_jet(params, cutoff, x, 0)[0]
    return ref.phi[0] + rho[..., None] * ref.normal[0] + mu[..., None] * tau


def _segments_cross(pts):
    """True if two non-adjacent edges of the open polyline intersect."""
    a, b = pts[:-1], pts[1:]
    m = len(a)
    if m < 3:
        return False

    def orient(p, q, s):
        return (q[..., 0] - p[..., 0]) * (s[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (
            s[..., 0] - p[..., 0]
        )

    A, B = a[:, None, :], b[:, None, :]
    C, D = a[None, :, :], b[None, :, :]
    d1, d2 = orient(A, B, C), orient(A, B, D)
    d3, d4 = orient(C, D, A), orient(C, D, B)
    hit = (d1 * d2 < 0) & (d3 * d4 < 0)
    i, j = np.indices((m, m))
    return bool(np.any(hit & (j > i + 1)))


def enclosed_area(params: LensParams, grid, rho, cutoff: CutoffProfile | None = None) -> float:
    """Area between the curve and the x-axis by the shoelace rule.

    Raises
    ------
    DomainError
        If the polyline of curve points intersects itself.
    """
    cutoff = CutoffProfile.default(params) if cutoff is None else cutoff
    pts = curve_points(params, cutoff, grid.x, rho)
    if _segments_cross(pts):
        raise DomainError("curve is self-intersecting; area undefined")
    x, y = pts[:, 0], pts[:, 1]
    # The closing edge runs along the axis; it contributes x_{n-1} y_0 - x_0 y_{n-1}.
    twice = np.dot(x[:-1], y[1:]) - np.dot(x[1:], y[:-1]) + x[-1] * y[0] - x[0] * y[-1]
    return -0.5 * float(twice)


def segment_area(params: LensParams, r=None) -> float:
    """Exact area of the circular segment of radius ``r`` with half-angle theta."""
    r = params.r_star if r is None else r
    t = params.theta
    return r * r * (t - np.sin(t) * np.cos(t))
