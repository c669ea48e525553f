"""Acceptance checks, one function per criterion.

Every check returns a :class:`CriterionResult` carrying the measured value,
the tolerance it was compared with and a dictionary of supporting numbers.
The evolution checks share cached runs so that area, decay and stability
are judged on the same trajectory.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .discretization import Grid, fd_jacobian, integrate
from .geometry import CutoffProfile, LensParams, psi_jet
from .kinematics import PointState, curvature, curvature_compact
from .linear_stability import (
    assemble_linearization,
    build_projection,
    alpha1,
    alpha2,
    default_ls_samples,
    hminus1_asymmetry,
    ls_condition_check,
    principal_angle,
    projection_P,
    random_admissible_fields,
    semisimplicity_check,
    spectrum,
)
from .manifold import chart_jets, closest_point, kernel_fields, manifold_tangents, solve_rho
from .manifold import radius_from_area
from .nonlocal_pde import full_rhs
from .stepper import InitialSpec, evolve, fit_decay_rate, make_initial

__all__ = ["CriterionResult", "CRITERIA", "run_all", "stability_run"]

THETAS = (np.pi / 3, 2 * np.pi / 5, np.pi / 2)
BASE_THETA = np.pi / 3
BASE_N = 201
FINE_N = 401
AMPLITUDE = 1e-3
DECAY_TIMES = 5.0  # run length in units of 1 / omega
RUNTIME_LIMIT = 300.0


@dataclass
class CriterionResult:
    key: int
    title: str
    passed: bool
    value: float
    tolerance: str
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.key}. {self.title}: value={self.value:.6g} ({self.tolerance})"


def _setup(theta, n):
    params = LensParams(theta)
    return params, Grid.for_params(params, n)


def kernel_structure(n: int = BASE_N, coarse: int = 101) -> CriterionResult:
    """Two kernel eigenvalues, eigenspace close to the closed form, angle shrinking with h^2."""
    rows, ok, worst = {}, True, 0.0
    for theta in THETAS:
        angles = {}
        count = None
        for m in (coarse, n):
            params, grid = _setup(theta, m)
            sp = spectrum(assemble_linearization(grid, params))
            angles[m] = principal_angle(sp.kernel_vectors, np.column_stack(kernel_fields(grid, params)))
            if m == n:
                count = int(np.sum(sp.kernel_mask))
        ratio = angles[coarse] / angles[n]
        good = count == 2 and angles[n] <= 1e-3 and ratio >= 3.0
        ok &= good
        worst = max(worst, angles[n])
        rows[f"theta={theta:.6f}"] = {"kernel_count": count, "angle": angles[n], "angle_ratio": ratio}
    return CriterionResult(1, "kernel structure", ok, worst,
                           "2 kernel eigenvalues; angle <= 1e-3; refinement ratio >= 3", rows)


def spectral_gap(ns=(101, 201, 401)) -> CriterionResult:
    """Positive spectrum off the kernel and second-order convergence of the gap."""
    rows, ok, worst = {}, True, 0.0
    for theta in THETAS:
        omegas, minre = [], np.inf
        for m in ns:
            params, grid = _setup(theta, m)
            sp = spectrum(assemble_linearization(grid, params))
            omegas.append(sp.omega)
            minre = min(minre, float(np.min(sp.nonkernel.real)))
        ratio = (omegas[0] - omegas[1]) / (omegas[1] - omegas[2])
        good = minre > 0.0 and abs(ratio - 4.0) <= 1.0
        ok &= good
        worst = max(worst, abs(ratio - 4.0) / 4.0)
        rows[f"theta={theta:.6f}"] = {"omega": omegas, "min_re": minre, "richardson_ratio": ratio}
    return CriterionResult(2, "spectral gap", ok, worst,
                           "Re > 0 off the kernel; |ratio/4 - 1| <= 0.25", rows)


def projection_checks(n: int = BASE_N, samples: int = 20, seed: int = 0) -> CriterionResult:
    params, grid = _setup(BASE_THETA, n)
    op = assemble_linearization(grid, params)
    data = build_projection(grid, params)
    rng = np.random.default_rng(seed)
    idem = 0.0
    for _ in range(samples):
        u = rng.standard_normal(grid.n)
        pu = projection_P(grid, u, data)
        idem = max(idem, np.max(np.abs(projection_P(grid, pu, data) - pu)) / np.max(np.abs(u)))
    ratio = 0.0
    for u in random_admissible_fields(op, samples, seed):
        Au = op.apply(u)
        pa = projection_P(grid, Au, data)
        ratio = max(ratio, float(np.sqrt(integrate(grid, pa**2) / integrate(grid, Au**2))))
    table = np.array([[alpha1(v, data), alpha2(v, data)] for v in (data.v1, data.v2)]).T
    delta = float(np.max(np.abs(table - np.eye(2))))
    semi = semisimplicity_check(op)
    c_ratio = ratio / grid.h**2
    ok = idem <= 1e-10 and c_ratio <= 10.0 and delta <= 1e-10 and semi.passed
    return CriterionResult(3, "semi-simplicity and projection", ok, c_ratio,
                           "|P^2-P| <= 1e-10; |PAu| <= 10 h^2 |Au|; alpha_i(v_j) = delta_ij to 1e-10",
                           {"idempotence": idem, "PAu_ratio": ratio, "PAu_over_h2": c_ratio,
                            "alpha_table_error": delta, "semisimple": semi.passed,
                            "range_residuals": semi.range_residuals.tolist(),
                            "left_right_overlap": semi.left_right_overlap})


def hminus1_symmetry(n: int = BASE_N, pairs: int = 10, seed: int = 0) -> CriterionResult:
    params, grid = _setup(BASE_THETA, n)
    op = assemble_linearization(grid, params)
    W = random_admissible_fields(op, 2 * pairs, seed, mean_zero=True)
    asym = max(hminus1_asymmetry(op, u, v) for u, v in zip(W[:pairs], W[pairs:]))
    scaled = asym / grid.h**2
    return CriterionResult(4, "H^-1 symmetry", scaled <= 10.0, scaled,
                           "relative asymmetry <= 10 h^2", {"asymmetry": asym, "h2": grid.h**2})


def manifold_checks(n: int = BASE_N) -> CriterionResult:
    params, grid = _setup(BASE_THETA, n)
    charts = [(0.0, 1.0), (0.05, 1.0), (-0.1, 1.1), (0.1, 0.95)]
    residual = max(solve_rho(a, r, grid, params).residual for a, r in charts)
    tan = manifold_tangents(0.0, params.r_star, grid, params)
    v1, v2 = kernel_fields(grid, params)
    err_r = float(np.max(np.abs(tan["d_rho_dr"] - v1)))
    err_a = float(np.max(np.abs(tan["d_rho_da1"] + v2)))
    tol_t = max(1e-6, 10.0 * grid.h**2)
    sp = spectrum(assemble_linearization(grid, params))
    angle = principal_angle(sp.kernel_vectors, np.column_stack([tan["d_rho_dr"], tan["d_rho_da1"]]))
    ok = residual <= 1e-12 and max(err_r, err_a) <= tol_t and angle <= 1e-3
    return CriterionResult(5, "manifold chart and tangents", ok, max(err_r, err_a),
                           f"residual <= 1e-12; tangent error <= {tol_t:.3g}; angle <= 1e-3",
                           {"residual": residual, "d_rho_dr_error": err_r,
                            "d_rho_da1_error": err_a, "tangent_kernel_angle": angle})


def lopatinskii_shapiro() -> CriterionResult:
    one = ls_condition_check([1.0])
    det1 = float(abs(one.determinants[0]))
    sweep = ls_condition_check(default_ls_samples())
    ok = abs(det1 - 2.0) <= 1e-12 and sweep.min_normalized >= 1.9
    return CriterionResult(6, "Lopatinskii-Shapiro", ok, sweep.min_normalized,
                           "|det M(1)| = 2 to 1e-12; normalized min >= 1.9",
                           {"det_at_1": det1, "samples": len(sweep.samples)})


@lru_cache(maxsize=4)
def stability_run(n: int = BASE_N, theta: float = BASE_THETA, amplitude: float = AMPLITUDE):
    """Perturbed run of length ``5 / omega``; returns ``(trajectory, omega, seconds)``."""
    params, grid = _setup(theta, n)
    omega = spectrum(assemble_linearization(grid, params)).omega
    rho0 = make_initial(InitialSpec(amplitude=amplitude), grid, params)
    start = time.perf_counter()
    traj = evolve(rho0, DECAY_TIMES / omega, None, grid, params, samples=100)
    return traj, omega, time.perf_counter() - start


def area_conservation(fine: bool = True) -> CriterionResult:
    rows, ok, worst = {}, True, 0.0
    for n, tol in ((BASE_N, 1e-4), (FINE_N, 1e-5)) if fine else ((BASE_N, 1e-4),):
        traj, omega, secs = stability_run(n)
        area = traj.column("area")
        drift = float(np.max(np.abs(area - area[0])) / area[0])
        good = traj.status == "ok" and drift <= tol
        if n == FINE_N:
            good &= secs <= RUNTIME_LIMIT
        ok &= good
        worst = max(worst, drift)
        rows[f"n={n}"] = {"drift": drift, "tolerance": tol, "seconds": secs, "status": traj.status}
    return CriterionResult(7, "area conservation", ok, worst,
                           "drift <= 1e-4 (n=201), <= 1e-5 (n=401), n=401 within 300 s", rows)


def exponential_convergence(n: int = BASE_N) -> CriterionResult:
    traj, omega, _ = stability_run(n)
    params = LensParams(BASE_THETA)
    dist = traj.column("dist")
    tail = np.log(dist[int(np.ceil(0.2 * len(dist))):])
    monotone = bool(np.all(np.diff(tail) < 0.0))
    fit = fit_decay_rate(traj)
    ratio = fit.sigma_fit / omega
    r_pred = radius_from_area(traj.column("area")[0], params)
    r_err = abs(traj.column("r")[-1] - r_pred) / r_pred
    growth = max(
        float(np.max(traj.column(k)) / traj.column(k)[0])
        for k in ("sup_rho", "sup_d1", "sup_d2", "sup_d3", "sup_d4")
    )
    ok = (traj.status == "ok" and monotone and 0.75 <= ratio <= 1.25 and r_err <= 1e-3
          and growth <= 3.0 and dist[-1] <= 0.01 * dist[0])
    return CriterionResult(8, "exponential convergence", ok, ratio,
                           "monotone after 20%; sigma/omega in [0.75, 1.25]; radius to 1e-3; "
                           "proxy growth <= 3",
                           {"sigma_fit": fit.sigma_fit, "omega": omega, "r_squared": fit.r_squared,
                            "monotone": monotone, "radius_error": r_err, "proxy_growth": growth,
                            "final_distance_fraction": float(dist[-1] / dist[0])})


def kinematic_oracles(n: int = BASE_N, samples: int = 100, seed: int = 0, eps: float = 1e-6):
    params, grid = _setup(BASE_THETA, n)
    cutoff = CutoffProfile.default(params)
    kappa_err = 0.0
    for a1, r in ((0.0, 1.0), (0.05, 1.02), (-0.1, 0.9)):
        rho, rx, rxx, mu = chart_jets(a1, r, grid, params, cutoff)
        state = PointState(grid.x, rho, rx, rxx, mu)
        k = curvature(state, psi_jet(params, cutoff, grid.x, rho, mu))
        kappa_err = max(kappa_err, float(np.max(np.abs(k + 1.0 / r))))
    rng = np.random.default_rng(seed)
    x = rng.uniform(-params.l_star, params.l_star, samples)
    w = rng.uniform(-0.05, 0.05, samples)
    mu = rng.uniform(-0.05, 0.05, samples)
    state = PointState(x, w, rng.uniform(-0.5, 0.5, samples), rng.uniform(-2, 2, samples), mu)
    geom = psi_jet(params, cutoff, x, w, mu)
    formula_err = float(np.max(np.abs(curvature(state, geom) - curvature_compact(state, geom))))
    J = fd_jacobian(lambda z: full_rhs(z, grid, params, cutoff).rhs, np.zeros(grid.n), eps,
                    vectorized=True)
    A = assemble_linearization(grid, params).matrix
    inner = slice(2, grid.n - 2)
    jac_err = float(np.max(np.abs(J[inner] + A[inner])) / np.max(np.abs(A[inner])))
    tol_j = 10.0 * (grid.h**2 + eps**2)
    ok = kappa_err <= 1e-10 and formula_err <= 1e-12 and jac_err <= tol_j
    return CriterionResult(9, "kinematic oracles", ok, jac_err,
                           f"kappa const to 1e-10; formulas agree to 1e-12; Jacobian rel. error <= {tol_j:.3g}",
                           {"kappa_error": kappa_err, "formula_error": formula_err,
                            "jacobian_relative_error": jac_err})


CRITERIA = {
    1: kernel_structure,
    2: spectral_gap,
    3: projection_checks,
    4: hminus1_symmetry,
    5: manifold_checks,
    6: lopatinskii_shapiro,
    7: area_conservation,
    8: exponential_convergence,
    9: kinematic_oracles,
}


def run_all(fine: bool = True) -> list:
    """Evaluate every criterion; ``fine=False`` skips the n = 401 run."""
    out = []
    for key, fn in CRITERIA.items():
        out.append(fn(fine=fine) if key == 7 else fn())
    return out
