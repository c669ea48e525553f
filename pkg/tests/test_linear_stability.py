import numpy as np
import pytest

from lensflow import Grid, LensParams
from lensflow.discretization import integrate
from lensflow.linear_stability import (
    assemble_linearization,
    bilinear_I,
    build_projection,
    decaying_roots,
    default_ls_samples,
    hminus1_asymmetry,
    kernel_threshold,
    ls_condition_check,
    principal_angle,
    projection_P,
    random_admissible_fields,
    semisimplicity_check,
    spectrum,
    zero_eigenvalue_structure,
)
from lensflow.manifold import kernel_fields

# At a right contact angle the continuum eigenvalues are k^4 - k^2 for k = 0, 1, 2, ...
RIGHT_ANGLE_EIGENVALUES = np.array([0.0, 0.0, 12.0, 72.0, 240.0, 600.0])


@pytest.fixture(scope="module")
def right_angle():
    p = LensParams(np.pi / 2)
    out = {}
    for n in (101, 201):
        g = Grid.for_params(p, n)
        out[n] = spectrum(assemble_linearization(g, p))
    return p, out


@pytest.fixture(scope="module")
def lens_op():
    p = LensParams(np.pi / 3)
    return assemble_linearization(Grid.for_params(p, 201), p)


def test_right_angle_spectrum_matches_continuum(right_angle):
    p, spec = right_angle
    h = Grid.for_params(p, 201).h
    lam = spec[201].eigenvalues[:6]
    assert np.max(np.abs(lam.imag)) < 1e-8
    assert spec[201].kernel_mask[:2].all() and np.max(np.abs(lam[:2])) < h**2
    assert np.allclose(lam[2:].real, RIGHT_ANGLE_EIGENVALUES[2:], rtol=10 * h**2)


def test_right_angle_spectrum_converges_second_order(right_angle):
    _, spec = right_angle
    e101 = np.abs(spec[101].eigenvalues[2:6].real - RIGHT_ANGLE_EIGENVALUES[2:])
    e201 = np.abs(spec[201].eigenvalues[2:6].real - RIGHT_ANGLE_EIGENVALUES[2:])
    assert np.all(e101 / e201 > 3.0)


def test_kernel_is_two_dimensional_and_matches_chart(lens_op):
    spec = spectrum(lens_op)
    assert int(spec.kernel_mask.sum()) == 2
    v1, v2 = kernel_fields(lens_op.grid, lens_op.params)
    assert principal_angle(spec.kernel_vectors, np.column_stack([v1, v2])) < 1e-3
    assert spec.omega > 0.0
    assert np.all(spec.nonkernel.real > 0.0)
    assert np.max(spec.bc_residual) < 1e-12


def test_kernel_threshold_positive_and_small(lens_op):
    thr = kernel_threshold(lens_op)
    assert 0.0 < thr < 1e-3 * spectrum(lens_op).omega


def test_energy_form_vanishes_on_translations(lens_op):
    # for sin(kappa x): integral of cos(2x) is sin(2 l) = sqrt(3)/2, boundary term -sqrt(3)/2
    g, p = lens_op.grid, lens_op.params
    _, v2 = kernel_fields(g, p)
    assert abs(bilinear_I(g, v2, p)) < 10 * g.h**2


def test_projection_is_idempotent_with_unit_pairing(lens_op):
    g = lens_op.grid
    data = build_projection(g, lens_op.params)
    P = lambda u: projection_P(g, u, data)  # noqa: E731
    assert np.allclose(P(data.v1), data.v1, atol=1e-10)
    assert np.max(np.abs(P(data.v2) - data.v2)) < 1e-10
    rng = np.random.default_rng(3)
    for u in rng.standard_normal((5, g.n)):
        pu = P(u)
        assert np.max(np.abs(P(pu) - pu)) <= 1e-10 * max(1.0, np.max(np.abs(pu)))


def test_projection_annihilates_range(lens_op):
    g = lens_op.grid
    data = build_projection(g, lens_op.params)
    report = semisimplicity_check(lens_op, data, samples=10)
    assert report.passed
    assert report.algebraic_multiplicity == report.geometric_multiplicity == 2
    assert report.projection_residual <= 10 * g.h**2


def test_semisimplicity_rejects_jordan_block():
    K = np.diag(np.arange(1.0, 8.0))
    K[0, 0] = K[1, 1] = 0.0
    K[0, 1] = 1.0
    bad = zero_eigenvalue_structure(K, 1e-8)
    assert not bad.passed
    assert bad.algebraic_multiplicity == 2 and bad.geometric_multiplicity == 1
    K[0, 1] = 0.0
    assert zero_eigenvalue_structure(K, 1e-8).passed


def test_random_fields_are_admissible(lens_op):
    u = random_admissible_fields(lens_op, 4, seed=1, mean_zero=True)
    assert np.max(np.abs(u @ lens_op.B_rows.T)) < 1e-8 * np.max(np.abs(lens_op.B_rows))
    assert np.max(np.abs(integrate(lens_op.grid, u))) < 1e-12


def test_random_fields_at_right_angle():
    p = LensParams(np.pi / 2)
    op = assemble_linearization(Grid.for_params(p, 101), p)
    u = random_admissible_fields(op, 2, mean_zero=True)
    assert np.all(np.isfinite(u))


def test_hminus1_asymmetry_is_second_order(lens_op):
    u = random_admissible_fields(lens_op, 10, seed=0, mean_zero=True)
    worst = max(hminus1_asymmetry(lens_op, u[i], u[i + 1]) for i in range(0, 10, 2))
    assert worst <= 10 * lens_op.grid.h**2
    assert hminus1_asymmetry(lens_op, u[0], u[0]) < 1e-12


def test_decaying_roots_solve_quartic():
    for lam in (1.0, 1j, 5 - 2j):
        roots = decaying_roots(lam)
        assert np.all(roots.real < 0)
        assert np.allclose(roots**4, -lam)


def test_ls_determinant_at_one():
    rep = ls_condition_check([1.0])
    assert abs(rep.determinants[0]) == pytest.approx(2.0, abs=1e-12)


def test_ls_sweep_bounded_below():
    rep = ls_condition_check(default_ls_samples())
    assert rep.passed and rep.min_normalized >= 1.9
    assert len(rep.samples) == 51


@pytest.mark.parametrize("lam", [0.0, -1.0, -1 + 1j])
def test_ls_rejects_left_half_plane(lam):
    with pytest.raises(ValueError):
        ls_condition_check([lam])


def test_kernel_fields_satisfy_discrete_rows(lens_op):
    h = lens_op.grid.h
    scale = np.max(np.abs(lens_op.matrix))
    for v in kernel_fields(lens_op.grid, lens_op.params):
        assert np.max(np.abs(lens_op.A_rows @ v)) < 10 * h**2
        assert np.max(np.abs(lens_op.B_rows @ v)) < 10 * h**2
    assert scale > 1.0 / h**4


def test_operator_on_double_frequency_cosine(lens_op):
    g, k = lens_op.grid, lens_op.params.kappa_star
    u = np.cos(2 * k * g.x)
    inner = slice(10, -10)
    exact = 12 * k**4 * u
    assert np.max(np.abs((lens_op.full @ u - exact)[inner])) < 50 * g.h**2


def test_energy_identity_on_eigenpairs(lens_op):
    g, p = lens_op.grid, lens_op.params
    spec = spectrum(lens_op)
    k2 = p.kappa_star**2
    for j in np.flatnonzero(~spec.kernel_mask)[:4]:
        lam = spec.eigenvalues[j].real
        u = spec.eigenvectors[:, j].real
        flux = g.ops.D1 @ (g.ops.D2 @ u + k2 * u)
        rhs = integrate(g, flux**2)
        energy = bilinear_I(g, u, p)
        assert energy > 0.0
        assert abs(lam * energy - rhs) < g.h**2 * rhs


def test_energy_form_zero_field(lens_op):
    assert bilinear_I(lens_op.grid, np.zeros(lens_op.grid.n), lens_op.params) == 0.0


def test_semisimple_at_right_angle():
    p = LensParams(np.pi / 2)
    op = assemble_linearization(Grid.for_params(p, 201), p)
    assert semisimplicity_check(op, build_projection(op.grid, p)).passed


def test_ls_roots_at_one():
    roots = decaying_roots(1.0)
    assert np.allclose(sorted(roots, key=np.angle), sorted(np.exp(1j * np.pi * np.array([0.75, 1.25])), key=np.angle))
    m1, m2 = roots
    det = m1 * m2 * (m2**2 - m1**2)
    assert abs(abs(det) - 2.0) < 1e-12


@pytest.mark.parametrize("t", [0.5, 2.0, 3.7])
def test_ls_determinant_homogeneity(t):
    base = ls_condition_check([1.0 + 0.5j]).determinants[0]
    scaled = ls_condition_check([(1.0 + 0.5j) * t**4]).determinants[0]
    assert abs(scaled) == pytest.approx(t**4 * abs(base), rel=1e-12)
