import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.errors import AccuracyWarning, ConditioningWarning, DomainError, NonEigenfunctionError
from src.harmonics import ModeFamily, ModeIndex, SurfacePoint, solid_mode, trace_mode
from src.kelvin import LameParams, kelvin_matrix
from src.oracle import (FDStencil, QuadratureRule, fd_jacobian, fd_lame_operator, fd_lame_residual,
                        fd_traction, pole_frame, quad_curl_grad, quad_elastic_sl, quad_energy_shell,
                        quad_np_apply, quad_scalar_sl, quad_surface_integral, sample_directions)
from src.potentials import np_eigenvalue, pv_curl_grad_coefficient, scalar_sl_on_mode, sl_trace_coefficient
from src.transmission import ShellGeometry

TARGET = sample_directions(5)[1]


def quadratic(x):
    x = np.asarray(x, dtype=float)
    zero = np.zeros_like(x[..., 0])
    return np.stack([x[..., 0] ** 2, zero, zero], axis=-1)


def test_rule_validation():
    with pytest.raises(DomainError):
        QuadratureRule(10, 19)
    assert QuadratureRule(10, 20).size == 200
    half = QuadratureRule(64, 128).halved()
    assert (half.n_theta, half.n_phi) == (32, 64)


def test_pole_frame_is_rotation():
    frame = pole_frame([1.0, 2.0, -2.0])
    assert_allclose(frame.T @ frame, np.eye(3), atol=1e-14)
    assert_allclose(frame[:, 2], np.array([1.0, 2.0, -2.0]) / 3.0)


@pytest.mark.parametrize("radius", [1.0, 2.0])
def test_surface_area(radius):
    rule = QuadratureRule(8, 16)
    area = quad_surface_integral(lambda x: np.ones(len(x)), rule, radius)
    assert area.real == pytest.approx(4 * np.pi * radius ** 2, rel=1e-13)
    nodes, weights = rule.polar_nodes([0.0, 1.0, 0.0], radius)
    assert weights.sum() == pytest.approx(4 * np.pi * radius ** 2, rel=1e-10)
    assert_allclose(np.linalg.norm(nodes, axis=-1), radius)


def test_rotated_rule_keeps_integrals():
    rule = QuadratureRule(12, 24).rotated_to([0.3, -0.4, 0.5])
    value = quad_surface_integral(lambda x: x[:, 2] ** 2, rule)
    assert value.real == pytest.approx(4 * np.pi / 3, rel=1e-12)


@pytest.mark.slow
@pytest.mark.parametrize("family", list(ModeFamily))
@pytest.mark.parametrize("n", [1, 3, 6])
@pytest.mark.parametrize("r0", [0.5, 2.0])
def test_scalar_single_layer_quadrature(family, n, r0, unit_lame, polar_rule):
    idx = ModeIndex(family, n, min(1, n - 1 if family is ModeFamily.N else n))
    density = trace_mode(idx, unit_lame, TARGET)
    numeric = quad_scalar_sl(idx, r0 * TARGET, polar_rule, unit_lame)
    assert_allclose(numeric, scalar_sl_on_mode(idx, r0) * density, rtol=1e-6, atol=1e-9)


@pytest.mark.slow
@pytest.mark.parametrize("family", list(ModeFamily))
@pytest.mark.parametrize("n", [1, 2, 5])
def test_elastic_single_layer_quadrature(family, n, lame, polar_rule):
    idx = ModeIndex(family, n, 0)
    density = trace_mode(idx, lame, TARGET)
    numeric = quad_elastic_sl(idx, 2.0 * TARGET, lame, polar_rule)
    assert_allclose(numeric, sl_trace_coefficient(idx, 2.0, lame) * density, rtol=1e-6, atol=1e-9)


@pytest.mark.slow
@pytest.mark.parametrize("family", list(ModeFamily))
def test_curl_grad_quadrature(family, unit_lame, polar_rule):
    idx = ModeIndex(family, 3, 1)
    numeric = quad_curl_grad(idx, TARGET, unit_lame, polar_rule)
    expected = pv_curl_grad_coefficient(idx) * trace_mode(idx, unit_lame, TARGET)
    assert_allclose(numeric, expected, rtol=1e-6, atol=1e-9)


@pytest.mark.slow
@pytest.mark.parametrize("family", list(ModeFamily))
@pytest.mark.parametrize("n", range(1, 7))
def test_np_eigenvalue_by_quadrature(family, n, lame, polar_rule):
    estimate = quad_np_apply(ModeIndex(family, n), lame, polar_rule)
    closed = np_eigenvalue(family, n, lame)
    assert abs(estimate.value - closed) / abs(closed) < 1e-6
    assert estimate.residual < 1e-6


@pytest.mark.slow
@pytest.mark.parametrize("idx", [ModeIndex(ModeFamily.T, 2), ModeIndex(ModeFamily.N, 2)], ids=str)
def test_np_kernel_path(idx, unit_lame, polar_rule):
    estimate = quad_np_apply(idx, unit_lame, polar_rule, path='kernel')
    assert estimate.value == pytest.approx(np_eigenvalue(idx.family, idx.n, unit_lame), rel=1e-6)


def test_np_apply_errors(unit_lame):
    rule = QuadratureRule(16, 32)
    with pytest.raises(DomainError):
        quad_np_apply(ModeIndex(ModeFamily.T, 2), unit_lame, rule, path='direct')
    with pytest.raises(NonEigenfunctionError):
        quad_np_apply(ModeIndex(ModeFamily.T, 2), unit_lame, rule, tol=-1.0)


def test_stencil_validation():
    with pytest.raises(DomainError):
        FDStencil(h=0.0)
    with pytest.raises(DomainError):
        FDStencil(order=3)


def test_residual_of_quadratic_field(unit_lame):
    result = fd_lame_residual(quadratic, unit_lame, [0.4, -0.3, 0.9], FDStencil(h=1e-3))
    assert result.absolute == pytest.approx(2 + 2 * 2, rel=1e-6)
    assert result.relative > 0.1
    assert_allclose(fd_lame_operator(quadratic, unit_lame, [1.0, 1.0, 1.0], FDStencil(h=1e-3)),
                    [6.0, 0.0, 0.0], atol=1e-6)


def test_jacobian_layout():
    jac = fd_jacobian(quadratic, np.array([2.0, 0.0, 0.0]), FDStencil(h=1e-3, order=4))
    expected = np.zeros((3, 3))
    expected[0, 0] = 4.0
    assert_allclose(jac, expected, atol=1e-9)


@pytest.mark.parametrize("family", list(ModeFamily))
@pytest.mark.parametrize("n", [1, 2, 4, 6])
def test_solid_modes_solve_lame(family, n, lame):
    idx = ModeIndex(family, n, min(1, n - 1 if family is ModeFamily.N else n))
    stencil = FDStencil(h=1e-3, order=4)
    for p in 1.2 * sample_directions(4):
        result = fd_lame_residual(lambda x: solid_mode(idx, lame, x), lame, p, stencil)
        assert result.relative < 1e-6


@pytest.mark.parametrize("column", range(3))
def test_kelvin_columns_solve_lame(column, lame):
    stencil = FDStencil(h=1e-3, order=4)
    for p in 0.8 * sample_directions(4):
        result = fd_lame_residual(lambda x: kelvin_matrix(x, lame)[..., column], lame, p, stencil)
        assert result.relative < 1e-6


@pytest.mark.parametrize("m", [-1, 0, 1])
def test_rotations_are_traction_free(m, unit_lame):
    idx = ModeIndex(ModeFamily.T, 1, m)
    t = fd_traction(lambda x: solid_mode(idx, unit_lame, x), unit_lame, 1.7 * sample_directions(6),
                    FDStencil(h=1e-3))
    assert_allclose(t, 0, atol=1e-10)


def test_traction_of_solid_T(lame):
    idx = ModeIndex(ModeFamily.T, 3, 1)
    p = SurfacePoint(1.1, 0.4)
    t = fd_traction(lambda x: solid_mode(idx, lame, x), lame, p, FDStencil(h=1e-4, order=4))
    expected = lame.mu * 2 * trace_mode(idx, lame, p.normal)
    assert_allclose(t, expected, rtol=1e-7, atol=1e-9)


def test_energy_of_dilatation(unit_lame):
    geom = ShellGeometry(1.0, 2.0)
    rule = QuadratureRule(4, 8)
    # u = x: div u = 3, sym grad u = I, so the density is 9 lambda + 6 mu = 15
    expected = 0.5 * 0.1 * 15 * (4 * np.pi / 3) * (8 - 1)
    exact = quad_energy_shell(lambda x: x, unit_lame, 0.1, geom, rule,
                              jacobian=lambda x: np.broadcast_to(np.eye(3), x.shape + (3,)))
    assert exact == pytest.approx(expected, rel=1e-12)
    assert quad_energy_shell(lambda x: x, unit_lame, 0.1, geom, rule) == pytest.approx(expected, rel=1e-9)
    with pytest.raises(DomainError):
        quad_energy_shell(lambda x: x, unit_lame, 0.1, geom, rule, n_radial=0)


def test_tiny_step_warns_of_roundoff(unit_lame):
    idx = ModeIndex(ModeFamily.T, 2, 1)
    with pytest.warns(ConditioningWarning):
        fd_traction(lambda x: solid_mode(idx, unit_lame, x), unit_lame, SurfacePoint(1.1, 0.4), FDStencil(h=1e-9))


def test_coarse_rule_warns_in_scalar_single_layer(unit_lame):
    with pytest.warns(AccuracyWarning):
        quad_scalar_sl(ModeIndex(ModeFamily.T, 6, 1), TARGET, QuadratureRule(3, 6), unit_lame)


def test_doubling_rule_cuts_single_layer_error(unit_lame):
    idx = ModeIndex(ModeFamily.T, 4, 1)
    exact = scalar_sl_on_mode(idx, 1.0) * trace_mode(idx, unit_lame, TARGET)
    errors = []
    for n_theta in (4, 8):
        value = quad_scalar_sl(idx, TARGET, QuadratureRule(n_theta, 2 * n_theta), unit_lame, warn_tol=np.inf)
        errors.append(np.linalg.norm(value - exact))
    assert errors[0] > 0
    assert errors[1] <= errors[0] / 4


def test_halving_step_quarters_fd_error(unit_lame):
    # the solid T_3 mode is a cubic, so the central-difference error is exactly O(h^2)
    idx = ModeIndex(ModeFamily.T, 3, 1)
    p = SurfacePoint(1.1, 0.4)
    expected = unit_lame.mu * 2 * trace_mode(idx, unit_lame, p.normal)
    errors = [np.linalg.norm(fd_traction(lambda x: solid_mode(idx, unit_lame, x), unit_lame, p,
                                         FDStencil(h=h)) - expected)
              for h in (2e-2, 1e-2)]
    assert errors[0] / errors[1] == pytest.approx(4.0, rel=0.05)
