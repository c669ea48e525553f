"""Linearization at the reference arc: operator, spectrum, kernel projection.

The linearized problem is ``rho_t + A rho = 0`` with ``A = D2 (D2 + kappa^2)``
and two boundary rows per endpoint,

    B1 = +-D1 + kappa cot(theta)      (angle condition)
    B2 = D3 + kappa^2 D1              (no curvature flux).

On the grid the four boundary rows replace the PDE rows at nodes
``0, 1, n-2, n-1``; both B2 rows are evaluated at the endpoints.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .discretization import Grid, hminus1_inner, integrate, remove_mean
from .errors import NumericalError
from .geometry import LensParams
from .manifold import kernel_fields

__all__ = [
    "ConstrainedOperator",
    "Spectrum",
    "ProjectionData",
    "SemisimplicityReport",
    "LSReport",
    "assemble_linearization",
    "spectrum",
    "principal_angle",
    "bilinear_I",
    "build_projection",
    "alpha1",
    "alpha2",
    "projection_P",
    "random_admissible_fields",
    "semisimplicity_check",
    "zero_eigenvalue_structure",
    "hminus1_asymmetry",
    "decaying_roots",
    "ls_condition_check",
    "default_ls_samples",
]


@dataclass(frozen=True)
class ConstrainedOperator:
    """Square system with PDE rows and four boundary rows.

    Attributes
    ----------
    matrix : (n, n) array
        Rows ``pde_rows`` hold the operator, rows ``bc_rows`` the constraints.
    full : (n, n) array
        ``D4 + kappa^2 D2`` on every node, used to apply the operator to a field.
    """

    matrix: np.ndarray
    full: np.ndarray
    pde_rows: np.ndarray
    bc_rows: np.ndarray
    grid: Grid
    params: LensParams | None = None

    @property
    def A_rows(self):
        return self.matrix[self.pde_rows]

    @property
    def B_rows(self):
        return self.matrix[self.bc_rows]

    @property
    def mass(self):
        """Selector that is the identity on PDE rows and zero on boundary rows."""
        m = np.zeros(self.matrix.shape[0])
        m[self.pde_rows] = 1.0
        return np.diag(m)

    def apply(self, u):
        return np.asarray(u) @ self.full.T

    def reduced(self):
        """Operator on the PDE-row unknowns after eliminating the boundary values.

        Returns ``(K, lift)`` where ``lift`` maps reduced vectors to full fields
        that satisfy the boundary rows exactly.
        """
        p, b = self.pde_rows, self.bc_rows
        M = self.matrix
        elim = -np.linalg.solve(M[np.ix_(b, b)], M[np.ix_(b, p)])
        n = M.shape[0]
        lift = np.zeros((n, len(p)))
        lift[p] = np.eye(len(p))
        lift[b] = elim
        K = M[np.ix_(p, p)] + M[np.ix_(p, b)] @ elim
        return K, lift


def assemble_linearization(grid: Grid, params: LensParams, ops=None) -> ConstrainedOperator:
    ops = grid.ops if ops is None else ops
    n = grid.n
    k2 = params.kappa_star**2
    kc = params.kappa_star * params.cot_theta
    A = ops.D2 @ (ops.D2 + k2 * np.eye(n))
    M = A.copy()
    flux = ops.D3 + k2 * ops.D1
    M[0] = -ops.D1[0]
    M[0, 0] += kc
    M[n - 1] = ops.D1[n - 1]
    M[n - 1, n - 1] += kc
    M[1] = flux[0]
    M[n - 2] = flux[n - 1]
    bc = np.array([0, 1, n - 2, n - 1])
    pde = np.arange(2, n - 2)
    return ConstrainedOperator(M, ops.D4 + k2 * ops.D2, pde, bc, grid, params)


@dataclass(frozen=True)
class Spectrum:
    """Eigenpairs sorted by real part.

    ``bc_residual`` is the largest boundary-row residual of each eigenvector,
    scaled by the row's absolute sum. ``kernel_mask`` flags eigenvalues with modulus at most ``kernel_threshold``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    bc_residual: np.ndarray
    kernel_mask: np.ndarray
    kernel_threshold: float

    @property
    def kernel_vectors(self):
        return self.eigenvectors[:, self.kernel_mask]

    @property
    def nonkernel(self):
        return self.eigenvalues[~self.kernel_mask]

    @property
    def omega(self) -> float:
        """Smallest real part off the kernel (the spectral gap)."""
        return float(np.min(self.nonkernel.real))


def kernel_threshold(op: ConstrainedOperator) -> float:
    """Ten times the residual of the closed-form kernel under the discrete operator."""
    v1, v2 = kernel_fields(op.grid, op.params)
    res = [np.max(np.abs(op.matrix @ v)) / np.max(np.abs(v)) for v in (v1, v2)]
    return 10.0 * max(res)


def spectrum(op: ConstrainedOperator, threshold=None) -> Spectrum:
    """Eigenpairs of the constrained problem via elimination of the boundary rows."""
    K, lift = op.reduced()
    try:
        lam, vec = scipy.linalg.eig(K)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    if not np.all(np.isfinite(lam)):
        raise NumericalError("eigensolver returned non-finite eigenvalues")
    order = np.lexsort((lam.imag, lam.real))
    lam = lam[order]
    full = lift @ vec[:, order]
    # fix the complex phase so real eigenvectors come out real
    pivot = full[np.argmax(np.abs(full), axis=0), np.arange(full.shape[1])]
    full = full * (np.abs(pivot) / pivot)[None, :]
    full = full / np.max(np.abs(full), axis=0)
    if np.all(np.abs(full.imag) < 1e-12 * np.abs(full).max()):
        full = full.real
    # boundary residual relative to the size of each row and of the vector
    B = op.B_rows
    scale = np.sum(np.abs(B), axis=1)[:, None] * np.max(np.abs(full), axis=0)[None, :]
    bc_res = np.max(np.abs(B @ full) / scale, axis=0)
    thr = kernel_threshold(op) if threshold is None else float(threshold)
    mask = np.abs(lam) <= thr
    return Spectrum(lam, full, bc_res, mask, thr)


def principal_angle(A, B) -> float:
    """Largest principal angle between the column spans of ``A`` and ``B``."""
    return float(np.max(scipy.linalg.subspace_angles(np.asarray(A), np.asarray(B))))


def bilinear_I(grid: Grid, u, params: LensParams) -> float:
    """Energy form ``int u'^2 - kappa^2 int u^2 + kappa cot(theta) (u(-l)^2 + u(l)^2)``."""
    u = np.asarray(u, dtype=float)
    du = grid.ops.D1 @ u
    k = params.kappa_star
    ends = u[0] ** 2 + u[-1] ** 2
    return float(integrate(grid, du * du) - k * k * integrate(grid, u * u) + k * params.cot_theta * ends)


def hminus1_asymmetry(op: ConstrainedOperator, u, v) -> float:
    """``|(A u, v) - (u, A v)|`` in the H^-1 product, relative to its Cauchy-Schwarz bound.

    ``u`` and ``v`` must be mean-zero and satisfy the boundary rows; the
    small mean of ``A u`` left by the discretization is removed first.
    """
    g = op.grid
    Au = remove_mean(g, op.apply(u))
    Av = remove_mean(g, op.apply(v))

    def norm(f):
        return np.sqrt(hminus1_inner(g, f, f))

    bound = 0.5 * (norm(Au) * norm(v) + norm(u) * norm(Av))
    if bound == 0.0:
        return 0.0
    return abs(hminus1_inner(g, Au, v) - hminus1_inner(g, u, Av)) / bound


@dataclass(frozen=True)
class ProjectionData:
    """Kernel basis and the two normalising constants of the projection."""

    v1: np.ndarray
    v2: np.ndarray
    alpha1_denominator: float
    alpha2_denominator: float
    grid: Grid


def build_projection(grid: Grid, params: LensParams) -> ProjectionData:
    v1, v2 = kernel_fields(grid, params)
    return ProjectionData(v1, v2, float(integrate(grid, v1)), hminus1_inner(grid, v2, v2), grid)


def alpha1(u, data: ProjectionData) -> float:
    return float(integrate(data.grid, u)) / data.alpha1_denominator


def alpha2(u, data: ProjectionData) -> float:
    rest = np.asarray(u, dtype=float) - alpha1(u, data) * data.v1
    return hminus1_inner(data.grid, rest, data.v2) / data.alpha2_denominator


def projection_P(grid: Grid, u, data: ProjectionData) -> np.ndarray:
    """Projection onto the kernel along the range of the operator."""
    return alpha1(u, data) * data.v1 + alpha2(u, data) * data.v2


def random_admissible_fields(
    op: ConstrainedOperator, count: int, seed: int = 0, modes: int = 8, mean_zero: bool = False
) -> np.ndarray:
    """Smooth random fields that satisfy the four discrete boundary rows.

    A random cosine series with decaying coefficients is corrected by a
    low-degree polynomial chosen to meet the boundary rows (and the zero
    mean when requested). Returns an array of shape ``(count, n)``.
    """
    rng = np.random.default_rng(seed)
    grid = op.grid
    s = (grid.x + grid.half_length) / (2.0 * grid.half_length)
    basis = np.array([np.cos(np.pi * k * s) for k in range(modes + 1)])
    weights = 1.0 / (1.0 + np.arange(modes + 1)) ** 2
    t = grid.x / grid.half_length
    # constants are annihilated by every boundary row when cot(theta) = 0
    powers = range(0 if mean_zero else 1, 5)
    corr = np.array([t**j for j in powers])
    C = op.B_rows @ corr.T
    if mean_zero:
        C = np.vstack([C, integrate(grid, corr)])
    out = []
    for _ in range(count):
        u = (rng.standard_normal(modes + 1) * weights) @ basis
        target = op.B_rows @ u
        if mean_zero:
            target = np.append(target, integrate(grid, u))
        u = u - corr.T @ np.linalg.solve(C, target)
        out.append(u)
    return np.array(out)


@dataclass
class SemisimplicityReport:
    """Outcome of the semi-simplicity test at the zero eigenvalue."""

    passed: bool
    algebraic_multiplicity: int
    geometric_multiplicity: int
    range_residuals: np.ndarray
    left_right_overlap: float
    projection_residual: float | None = None
    details: dict = field(default_factory=dict)


def zero_eigenvalue_structure(K, threshold: float, tol: float = 0.05) -> SemisimplicityReport:
    """Semi-simplicity test for the eigenvalue zero of a square matrix ``K``.

    Three numbers are combined: the algebraic and geometric multiplicities of
    the cluster ``|lam| <= threshold`` must agree; each null vector must stay
    out of the range of ``K`` (relative least-squares residual at least
    ``tol``); and left and right null vectors must pair nondegenerately.
    """
    lam, left, right = scipy.linalg.eig(K, left=True, right=True)
    near = np.abs(lam) <= threshold
    alg = int(np.sum(near))
    U, sv, _ = np.linalg.svd(K)
    keep = sv > threshold
    geo = int(np.sum(~keep))
    R = right[:, near]
    L = left[:, near]
    residuals = []
    for j in range(R.shape[1]):
        v = R[:, j] / np.linalg.norm(R[:, j])
        in_range = U[:, keep] @ (U[:, keep].conj().T @ v)
        residuals.append(float(np.linalg.norm(v - in_range)))
    residuals = np.array(residuals)
    if alg:
        Rn = R / np.linalg.norm(R, axis=0)
        Ln = L / np.linalg.norm(L, axis=0)
        overlap = float(np.min(np.linalg.svd(Ln.conj().T @ Rn, compute_uv=False)))
    else:
        overlap = 0.0
    passed = alg > 0 and alg == geo and residuals.min() >= tol and overlap >= tol
    return SemisimplicityReport(passed, alg, geo, residuals, overlap, None,
                                {"threshold": float(threshold)})


def semisimplicity_check(op: ConstrainedOperator, data: ProjectionData | None = None,
                         tol: float = 0.05, threshold=None, samples: int = 10,
                         seed: int = 0) -> SemisimplicityReport:
    """Semi-simplicity of zero for the constrained operator.

    Runs :func:`zero_eigenvalue_structure` on the operator with the boundary
    values eliminated. When ``data`` is given, the largest relative size of
    ``P(A u)`` over random admissible fields is stored as
    ``projection_residual``.
    """
    K, _ = op.reduced()
    thr = kernel_threshold(op) if threshold is None else float(threshold)
    report = zero_eigenvalue_structure(K, thr, tol)
    if data is not None:
        ratios = []
        for u in random_admissible_fields(op, samples, seed):
            Au = op.apply(u)
            pa = projection_P(data.grid, Au, data)
            ratios.append(np.sqrt(integrate(data.grid, pa**2) / integrate(data.grid, Au**2)))
        report.projection_residual = float(max(ratios))
    return report


def decaying_roots(lam: complex):
    """The two roots of ``mu^4 = -lam`` with negative real part."""
    roots = np.roots([1.0, 0.0, 0.0, 0.0, complex(lam)])
    roots = roots[np.argsort(roots.real)][:2]
    return roots[np.argsort(np.angle(roots) % (2 * np.pi))]


@dataclass
class LSReport:
    samples: np.ndarray
    determinants: np.ndarray
    normalized: np.ndarray
    degenerate: np.ndarray

    @property
    def min_normalized(self) -> float:
        return float(np.min(self.normalized))

    @property
    def passed(self) -> bool:
        return bool(np.all(self.normalized > 0.0))


def ls_condition_check(lambda_samples) -> LSReport:
    """Lopatinskii-Shapiro determinant for ``lam v + v'''' = 0``, ``v'(0) = v'''(0) = 0``.

    For each sample the matrix ``[[m1, m2], [m1^3, m2^3]]`` built from the
    decaying roots must be nonsingular; ``normalized`` divides ``|det|`` by
    ``|lam|``, which removes the degree-four homogeneity.
    """
    lams = np.asarray(list(lambda_samples), dtype=complex)
    dets, degen = [], []
    for lam in lams:
        if lam == 0 or lam.real < -1e-14 * abs(lam):
            raise ValueError(f"sample {lam} is not in the closed right half plane minus 0")
        m1, m2 = decaying_roots(lam)
        close = abs(m1 - m2) <= 1e-12 * max(1.0, abs(m1))
        if close:
            warnings.warn(f"nearly repeated decaying roots at lambda={lam}", RuntimeWarning)
        degen.append(close)
        dets.append(m1 * m2**3 - m2 * m1**3)
    dets = np.array(dets)
    return LSReport(lams, dets, np.abs(dets) / np.abs(lams), np.array(degen))


def default_ls_samples(radii=(0.1, 1.0, 10.0), angles: int = 17) -> np.ndarray:
    phis = np.linspace(-np.pi / 2, np.pi / 2, angles)
    return np.array([r * np.exp(1j * p) for r in radii for p in phis])
