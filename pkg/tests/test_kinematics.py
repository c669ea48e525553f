import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lensflow import DegenerateParametrizationError, Grid
from lensflow.geometry import psi_jet
from lensflow.kinematics import (
    PointState,
    coeff_a,
    coeff_b,
    curvature,
    curvature_compact,
    laplace_beltrami,
    metric_J,
    unit_normal,
)
from lensflow.manifold import chart_jets
from lensflow.nonlocal_pde import evaluate_fields


def _state(params, cutoff, x, rho, rx, rxx, mu):
    return PointState(x, rho, rx, rxx, mu), psi_jet(params, cutoff, x, rho, mu)


def test_reference_arc_values(params, cutoff):
    x = np.linspace(-params.l_star, params.l_star, 9)
    z = np.zeros_like(x)
    s, g = _state(params, cutoff, x, z, z, z, z)
    assert np.allclose(metric_J(s, g), 1.0)
    assert np.allclose(curvature(s, g), params.kappa_star)
    assert np.allclose(coeff_a(s, g), 1.0)
    assert np.allclose(np.linalg.norm(unit_normal(s, g), axis=-1), 1.0)


@settings(max_examples=100, deadline=None)
@given(
    st.floats(-1.0, 1.0),
    st.floats(-0.2, 0.2),
    st.floats(-2.0, 2.0),
    st.floats(-5.0, 5.0),
    st.floats(-0.2, 0.2),
)
def test_curvature_forms_agree(params, cutoff, x, rho, rx, rxx, mu):
    s, g = _state(params, cutoff, np.array([x]), np.array([rho]), rx, rxx, np.array([mu]))
    k1, k2 = curvature(s, g), curvature_compact(s, g)
    assert np.allclose(k1, k2, rtol=1e-12, atol=1e-12)


def test_coeff_b_vanishes_where_tau_does(params, cutoff):
    s, g = _state(params, cutoff, np.array([0.0]), np.array([0.05]), 0.3, 1.0, np.array([0.02]))
    assert coeff_b(s, g) == pytest.approx(0.0, abs=1e-15)


def test_grid_fields_match_exact_chart_curvature(params, cutoff, grid):
    # a circle of radius r has curvature -1/r everywhere
    for a1, r in [(0.0, 1.1), (0.05, 0.95)]:
        rho, rx, rxx, mu = chart_jets(a1, r, grid, params, cutoff)
        s, g = _state(params, cutoff, grid.x, rho, rx, rxx, mu)
        assert np.allclose(curvature(s, g), -1.0 / r, atol=1e-10)
        f = evaluate_fields(rho, grid, params, cutoff)
        assert np.max(np.abs(f.kappa + 1.0 / r)) < 100 * grid.h**2


def test_grid_fields_stack_like_single(params, cutoff, grid):
    rho = 0.01 * np.cos(np.pi * grid.x / (2 * params.l_star)) ** 4
    one = evaluate_fields(rho, grid, params, cutoff)
    two = evaluate_fields(np.stack([rho, -rho]), grid, params, cutoff)
    assert np.allclose(two.kappa[0], one.kappa)
    assert np.allclose(two.lap_kappa[0], one.lap_kappa)


def test_laplace_beltrami_reduces_to_second_derivative():
    g = Grid(81, 1.0)
    v = np.cos(g.x)
    assert np.allclose(laplace_beltrami(v, np.ones(81), g), -v, atol=1e-3)
    with pytest.raises(DegenerateParametrizationError):
        laplace_beltrami(v, np.zeros(81), g)


def test_degenerate_metric_raises(params, cutoff):
    # geometry edited so that psi_s + rho_x psi_w is exactly zero
    x = np.array([0.5])
    g = psi_jet(params, cutoff, x, np.array([0.0]), np.array([0.0]))
    ratio = -g.psi_s[0, 0] / g.psi_w[0, 0]
    g.psi_s[0, 1] = -ratio * g.psi_w[0, 1]
    s = PointState(x, np.array([0.0]), ratio, 0.0, np.array([0.0]))
    with pytest.raises(DegenerateParametrizationError):
        curvature_compact(s, g)


def test_metric_matches_direct_norm(params, cutoff):
    rng = np.random.default_rng(5)
    x = rng.uniform(-params.l_star, params.l_star, 50)
    rho, mu = rng.uniform(-0.2, 0.2, (2, 50))
    rx = rng.uniform(-2, 2, 50)
    s, g = _state(params, cutoff, x, rho, rx, 0 * rx, mu)
    direct = np.linalg.norm(g.psi_s + g.psi_w * rx[:, None], axis=-1)
    assert np.allclose(metric_J(s, g), direct, rtol=1e-14, atol=0)


def test_metric_at_constant_height(params, cutoff):
    # height c on a circle of radius r gives a concentric circle: speed (r + c) / r
    x = np.linspace(-0.3, 0.3, 7)
    c = 0.07
    s, g = _state(params, cutoff, x, np.full(7, c), 0.0, 0.0, np.zeros(7))
    assert np.allclose(metric_J(s, g), 1 + c / params.r_star, rtol=1e-14)


def test_angle_condition_on_chart(params, cutoff, grid):
    for a1, r in [(0.05, 1.0), (-0.04, 1.1)]:
        rho, rx, rxx, mu = chart_jets(a1, r, grid, params, cutoff)
        s, g = _state(params, cutoff, grid.x, rho, rx, rxx, mu)
        ny = unit_normal(s, g)[[0, -1], 1]
        assert np.allclose(ny, np.cos(params.theta), atol=1e-12)


def test_normal_reference_and_unit(params, cutoff):
    from lensflow.geometry import reference_jet

    x = np.linspace(-params.l_star, params.l_star, 9)
    z = np.zeros_like(x)
    s, g = _state(params, cutoff, x, z, z, z, z)
    assert np.allclose(unit_normal(s, g), reference_jet(params, x, 0).normal[0])


def test_coeff_b_continuous_across_band_edge(params, cutoff):
    # largest jump of b between neighbouring nodes shrinks with the spacing
    jumps = []
    for n in (101, 201, 401):
        g = Grid.for_params(params, n)
        rho = 0.01 * np.cos(np.pi * g.x / (2 * params.l_star)) ** 2
        f = evaluate_fields(rho, g, params, cutoff)
        assert np.all(np.isfinite(f.b))
        jumps.append(np.max(np.abs(np.diff(f.b))))
    assert jumps[0] / jumps[1] > 1.8 and jumps[1] / jumps[2] > 1.8


def test_laplace_beltrami_flat_metric(params):
    g = Grid.for_params(params, 101)
    one = np.ones(g.n)
    assert np.allclose(laplace_beltrami(g.x**2, one, g), 2.0, atol=1e-9)
    assert np.allclose(laplace_beltrami(np.full(g.n, 3.0), one, g), 0.0, atol=1e-9)
    k = params.kappa_star
    v = np.sin(k * g.x)
    err = np.max(np.abs(laplace_beltrami(v, one, g) + k**2 * v))
    assert err < g.h**2
