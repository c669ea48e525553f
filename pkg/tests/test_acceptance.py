"""Acceptance suite: one test per criterion.

Each test prints its PASS/FAIL line; the lines are collected again in the
"acceptance criteria" section of the terminal summary.
"""

from lensflow import acceptance


def _check(result, record_property):
    line = result.line()
    print(line)
    record_property("acceptance", line)
    assert result.passed, line


def test_criterion_1_kernel_structure(record_property):
    _check(acceptance.kernel_structure(), record_property)


def test_criterion_2_spectral_gap_and_refinement(record_property):
    _check(acceptance.spectral_gap(), record_property)


def test_criterion_3_kernel_projection(record_property):
    _check(acceptance.projection_checks(), record_property)


def test_criterion_4_hminus1_symmetry(record_property):
    _check(acceptance.hminus1_symmetry(), record_property)


def test_criterion_5_manifold_tangents(record_property):
    _check(acceptance.manifold_checks(), record_property)


def test_criterion_6_lopatinskii_shapiro(record_property):
    _check(acceptance.lopatinskii_shapiro(), record_property)


def test_criterion_7_area_conservation(record_property):
    _check(acceptance.area_conservation(fine=True), record_property)


def test_criterion_8_exponential_convergence(record_property):
    _check(acceptance.exponential_convergence(), record_property)


def test_criterion_9_kinematic_oracles(record_property):
    _check(acceptance.kinematic_oracles(), record_property)
