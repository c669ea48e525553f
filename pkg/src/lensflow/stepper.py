"""Backward Euler integration with the boundary conditions as algebraic rows.

Each step solves the square system

    rows 2..n-3 :  rho - rho_old - dt * rhs(rho) = 0
    rows 0, n-1 :  angle condition at the two ends
    rows 1, n-2 :  zero curvature flux at the two ends

by Newton's method. The Jacobian is a finite-difference Jacobian whose LU
factors are reused from step to step until the contraction degrades.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy import stats

from .discretization import fd_jacobian
from .errors import DomainError, LensflowError, StepError
from .geometry import CutoffProfile, LensParams, enclosed_area
from .manifold import closest_point, solve_rho
from .nonlocal_pde import bc_vector, evaluate_fields, full_rhs

__all__ = [
    "InitialSpec",
    "StepInfo",
    "Trajectory",
    "DecayFit",
    "MONITOR_COLUMNS",
    "boundary_bump",
    "make_initial",
    "default_dt",
    "ImplicitStepper",
    "implicit_step",
    "holder_quotient",
    "evolve",
    "fit_decay_rate",
]

MONITOR_COLUMNS = (
    "area", "sup_rho", "sup_d1", "sup_d2", "sup_d3", "sup_d4", "holder4",
    "dist", "a1", "r", "g1m", "g1p", "g2m", "g2p",
)


@dataclass(frozen=True)
class InitialSpec:
    """Chart point plus a bump that is flat to third order at both ends.

    ``shape`` is either ``None`` (a half cosine), a callable of the scaled
    coordinate ``x / l_star`` or an array of nodal values.
    """

    chart: tuple = (0.0, None)
    amplitude: float = 0.0
    shape: object = None


def boundary_bump(grid, shape=None) -> np.ndarray:
    """``(1 - s^2)^4 q(s)`` with ``s = x / l_star``; ``q`` defaults to ``cos(pi s / 2)``."""
    s = grid.x / grid.half_length
    if shape is None:
        q = np.cos(0.5 * np.pi * s)
    elif callable(shape):
        q = np.asarray(shape(s), dtype=float)
    else:
        q = np.asarray(shape, dtype=float)
        if q.shape != s.shape:
            raise DomainError("bump shape has the wrong number of nodes")
    return (1.0 - s * s) ** 4 * q


def make_initial(spec: InitialSpec, grid, params: LensParams, cutoff=None, tol=None) -> np.ndarray:
    """Initial height: chart point plus ``amplitude`` times the boundary-flat bump.

    The bump only disturbs the one-sided difference derivatives at the ends,
    so the boundary residuals are small but not zero. Raises
    :class:`DomainError` if they exceed ``tol`` (default ``h^2``).
    """
    tol = grid.h**2 if tol is None else tol
    a1, r = spec.chart
    r = params.r_star if r is None else r
    rho = solve_rho(a1, r, grid, params, cutoff).rho
    if spec.amplitude:
        rho = rho + spec.amplitude * boundary_bump(grid, spec.shape)
    res = bc_vector(evaluate_fields(rho, grid, params, cutoff), params)
    if np.max(np.abs(res)) > tol:
        raise DomainError(f"initial data violates the boundary conditions: {res}")
    return rho


def default_dt(grid, params: LensParams, factor: float = 0.25) -> float:
    return factor * grid.h**2 * params.r_star**2


@dataclass(frozen=True)
class StepInfo:
    iterations: int
    residual: float
    jacobian_updates: int
    floor: float = 0.0


class ImplicitStepper:
    """Reusable backward Euler stepper for a fixed grid and step size."""

    def __init__(self, grid, params: LensParams, cutoff=None, dt=None, tol=1e-10,
                 maxit=25, eps=1e-9):
        self.grid = grid
        self.params = params
        self.cutoff = CutoffProfile.default(params) if cutoff is None else cutoff
        self.dt = default_dt(grid, params) if dt is None else float(dt)
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        self.tol = tol
        self.maxit = maxit
        self.eps = eps
        self._lu = None
        n = grid.n
        self._bc_idx = np.array([0, 1, n - 2, n - 1])

    def residual(self, rho, rho_old):
        """Residual of the step equations; accepts a stack of states."""
        f = evaluate_fields(rho, self.grid, self.params, self.cutoff)
        rhs = full_rhs(rho, self.grid, self.params, self.cutoff, fields=f).rhs
        res = rho - rho_old - self.dt * rhs
        res[..., self._bc_idx] = bc_vector(f, self.params)
        return res

    def noise_floor(self, rho, rho_old) -> float:
        """Residual change caused by rounding ``rho`` at its own scale.

        The boundary rows weight the heights by about ``1 / h^3``, so on fine
        grids rounding alone can keep the residual above a fixed tolerance.
        An alternating perturbation of a few ulps is the worst case for the
        difference stencils.
        """
        scale = np.max(np.abs(rho))
        if scale == 0.0:
            return 0.0
        signs = np.where(np.arange(rho.size) % 2 == 0, 1.0, -1.0)
        bumped = rho + 4.0 * np.finfo(float).eps * scale * signs
        both = self.residual(np.stack([rho, bumped]), rho_old)
        return float(np.max(np.abs(both[1] - both[0])))

    def _factor(self, rho, rho_old):
        J = fd_jacobian(lambda z: self.residual(z, rho_old), rho, self.eps, vectorized=True)
        self._lu = scipy.linalg.lu_factor(J)

    def step(self, rho_old):
        """Advance one step; returns ``(rho_new, StepInfo)``.

        Iterates until the residual drops below ``tol`` or below ten times
        the rounding floor of the previous state, whichever is larger.
        """
        rho_old = np.asarray(rho_old, dtype=float)
        rho = rho_old.copy()
        updates = 0
        fresh = self._lu is None
        if fresh:
            self._factor(rho, rho_old)
            updates += 1
        res = self.residual(rho, rho_old)
        norm = np.max(np.abs(res))
        floor = 10.0 * self.noise_floor(rho_old, rho_old)
        target = max(self.tol, floor)
        it = 0
        while norm > target:
            it += 1
            if it > self.maxit:
                raise StepError(
                    f"Newton did not converge (residual {norm:.2e})", suggested_dt=0.5 * self.dt
                )
            trial = rho - scipy.linalg.lu_solve(self._lu, res)
            try:
                new_res = self.residual(trial, rho_old)
            except LensflowError as exc:
                raise StepError(f"Newton left the admissible set: {exc}", 0.5 * self.dt) from exc
            new_norm = np.max(np.abs(new_res))
            if not np.isfinite(new_norm):
                raise StepError("Newton produced non-finite values", 0.5 * self.dt)
            slow = new_norm > 0.5 * norm
            if new_norm <= norm or fresh:
                # a step from fresh factors is a plain Newton step; keep it
                rho, res, norm = trial, new_res, new_norm
                fresh = False
            if slow and norm > target:
                # stale factors: rebuild at the current iterate
                self._factor(rho, rho_old)
                updates += 1
                fresh = True
        return rho, StepInfo(it, float(norm), updates, floor)


def implicit_step(rho, dt, grid, params: LensParams, cutoff=None, tol=1e-10,
                  return_info=False):
    """One backward Euler step from ``rho``."""
    stepper = ImplicitStepper(grid, params, cutoff, dt, tol)
    new, info = stepper.step(rho)
    return (new, info) if return_info else new


def holder_quotient(values, x, alpha: float) -> float:
    """``max |v_i - v_j| / |x_i - x_j|^alpha`` over distinct node pairs."""
    v = np.asarray(values, dtype=float)
    dv = np.abs(v[:, None] - v[None, :])
    dx = np.abs(x[:, None] - x[None, :])
    iu = np.triu_indices(len(v), 1)
    return float(np.max(dv[iu] / dx[iu] ** alpha))


@dataclass
class Trajectory:
    """Sampled states and monitors of a run.

    ``status`` is ``"ok"`` for a completed run; otherwise it names the error
    that truncated the run and ``message`` carries the details.
    """

    times: np.ndarray
    states: np.ndarray
    monitors: dict
    newton_iterations: np.ndarray
    dt: float
    status: str = "ok"
    message: str = ""
    steps: int = 0
    extras: dict = field(default_factory=dict)

    def column(self, name):
        return np.asarray(self.monitors[name])


def _monitor(rho, grid, params, cutoff, alpha, start):
    f = evaluate_fields(rho, grid, params, cutoff)
    bc = bc_vector(f, params)
    cp = closest_point(rho, grid, params, cutoff, start=start)
    row = {
        "area": enclosed_area(params, grid, rho, cutoff),
        "sup_rho": np.max(np.abs(rho)),
    }
    for k in range(1, 5):
        row[f"sup_d{k}"] = np.max(np.abs(f.derivs[k]))
    row["holder4"] = holder_quotient(f.derivs[4], grid.x, alpha)
    row.update(dist=cp.distance, a1=cp.a1, r=cp.r, g1m=bc[0], g2m=bc[1], g2p=bc[2], g1p=bc[3])
    return {k: float(v) for k, v in row.items()}, (cp.a1, cp.r)


def evolve(rho0, t_end, dt, grid, params: LensParams, cutoff=None, samples: int = 200,
           holder_alpha: float = 0.5, tol=1e-10, progress=None, maxit: int = 25) -> Trajectory:
    """Integrate to ``t_end`` and record monitors at about ``samples`` times.

    A failing step ends the run early; the trajectory up to that point is
    returned with the error recorded in ``status``.
    """
    cutoff = CutoffProfile.default(params) if cutoff is None else cutoff
    dt = default_dt(grid, params) if dt is None else float(dt)
    nsteps = max(1, int(np.ceil(t_end / dt - 1e-9)))
    every = max(1, nsteps // max(1, samples))
    stepper = ImplicitStepper(grid, params, cutoff, dt, tol, maxit)
    rho = np.asarray(rho0, dtype=float).copy()
    mon, start = _monitor(rho, grid, params, cutoff, holder_alpha, None)
    times, states, rows, iters = [0.0], [rho.copy()], [mon], [0]
    status, message = "ok", ""
    max_it = 0
    step = 0
    for step in range(1, nsteps + 1):
        try:
            rho, info = stepper.step(rho)
        except LensflowError as exc:
            status, message = type(exc).__name__, str(exc)
            step -= 1
            break
        max_it = max(max_it, info.iterations)
        if step % every == 0 or step == nsteps:
            mon, start = _monitor(rho, grid, params, cutoff, holder_alpha, start)
            times.append(step * dt)
            states.append(rho.copy())
            rows.append(mon)
            iters.append(max_it)
            max_it = 0
            if progress is not None:
                progress(step, nsteps)
    monitors = {k: np.array([r[k] for r in rows]) for k in MONITOR_COLUMNS}
    return Trajectory(np.array(times), np.array(states), monitors, np.array(iters), dt,
                      status, message, step)


@dataclass(frozen=True)
class DecayFit:
    sigma_fit: float
    r_squared: float
    samples: int
    resolved: bool
    message: str = ""


def fit_decay_rate(traj, window: float = 0.5, floor: float = 1e-13) -> DecayFit:
    """Least-squares slope of ``-log(distance)`` over the last ``window`` of samples.

    ``traj`` may be a :class:`Trajectory` or a ``(times, distances)`` pair.
    """
    if isinstance(traj, Trajectory):
        t, d = traj.times, traj.column("dist")
    else:
        t, d = (np.asarray(a, dtype=float) for a in traj)
    if not 0.0 < window <= 1.0:
        raise ValueError("window must be a fraction in (0, 1]")
    start = int(np.floor((1.0 - window) * len(t)))
    t, d = t[start:], d[start:]
    ok = np.isfinite(d) & (d > floor)
    if np.count_nonzero(ok) < 10:
        return DecayFit(float("nan"), float("nan"), int(np.count_nonzero(ok)), False,
                        "fewer than 10 samples above the distance floor")
    fit = stats.linregress(t[ok], np.log(d[ok]))
    return DecayFit(float(-fit.slope), float(fit.rvalue**2), int(np.count_nonzero(ok)), True)
