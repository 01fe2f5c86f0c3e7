import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from src.errors import SingularityError, SingularParameterError
from src.kelvin import (FOUR_PI, LameParams, antisymmetric_kernel, gamma_laplace, kelvin_matrix,
                        kernel_coeffs, symmetric_kernel, traction_kernel)
from src.oracle import FDStencil, fd_traction, sample_directions

coordinate = st.floats(min_value=-3.0, max_value=3.0, allow_nan=False)
points = st.tuples(coordinate, coordinate, coordinate).filter(lambda p: np.linalg.norm(p) > 0.1)


def test_kernel_coeffs_unit_material(unit_lame):
    k = kernel_coeffs(unit_lame)
    assert k.alpha1 == pytest.approx(2 / 3)
    assert k.alpha2 == pytest.approx(1 / 3)
    assert k.b1 == pytest.approx(1 / 3)
    assert k.b2 == pytest.approx(2.0)


def test_coeffs_are_cached(lame_21):
    assert lame_21.coeffs is lame_21.coeffs


@pytest.mark.parametrize("lam, mu", [(1.0, 0.0), (-2.0, 1.0)])
def test_singular_parameters_rejected(lam, mu):
    with pytest.raises(SingularParameterError):
        LameParams(lam, mu)


def test_material_flags(unit_lame):
    assert unit_lame.is_real and unit_lame.is_convex
    assert not unit_lame.is_lossy
    assert not LameParams(-1.0, 1.0).is_convex

    shell = unit_lame.plasmonic(complex(-4.0, 0.1))
    assert shell.lam == complex(-4.0, 0.1)
    assert shell.loss == pytest.approx(0.1)
    assert shell.is_lossy and not shell.is_real and not shell.is_convex


def test_gamma_laplace():
    assert gamma_laplace([2.0, 0.0, 0.0]) == pytest.approx(-1 / (2 * FOUR_PI))
    assert gamma_laplace(np.eye(3)).shape == (3,)
    with pytest.raises(SingularityError):
        gamma_laplace([0.0, 0.0, 0.0])


def test_kelvin_on_axis(unit_lame):
    g = kelvin_matrix([1.0, 0.0, 0.0], unit_lame)
    k = unit_lame.coeffs
    expected = -np.diag([k.alpha1 + k.alpha2, k.alpha1, k.alpha1]) / FOUR_PI
    assert_allclose(g, expected)


def test_kelvin_rejects_origin(unit_lame):
    with pytest.raises(SingularityError):
        kelvin_matrix(np.zeros(3), unit_lame)


@settings(max_examples=50, deadline=None)
@given(points)
def test_kelvin_symmetric_even_and_homogeneous(p):
    lame = LameParams(2.0, 1.0)
    x = np.array(p)
    g = kelvin_matrix(x, lame)
    assert_allclose(g, g.T, rtol=1e-12, atol=1e-15)
    assert_allclose(kelvin_matrix(-x, lame), g, rtol=1e-12, atol=1e-15)
    assert_allclose(kelvin_matrix(2.5 * x, lame), g / 2.5, rtol=1e-12, atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(points, points)
def test_traction_kernel_split(p, q):
    x, y = np.array(p), np.array(q)
    if np.linalg.norm(x - y) < 1e-3:
        return
    lame = LameParams(1.0, 1.0)
    k1 = antisymmetric_kernel(x, y)
    assert_allclose(k1, -k1.T, atol=1e-12)
    k2 = symmetric_kernel(x, y, lame)
    assert_allclose(k2, k2.T, rtol=1e-12, atol=1e-12)
    assert_allclose(traction_kernel(x, y, lame), -lame.coeffs.b1 * k1 + k2, rtol=1e-12, atol=1e-12)


def test_kernel_batches(unit_lame):
    x = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    y = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
    assert traction_kernel(x, y, unit_lame).shape == (2, 3, 3)
    with pytest.raises(SingularityError):
        traction_kernel(x, x, unit_lame)


@pytest.mark.parametrize("y", [
    np.array([0.2, -0.4, 0.1]),
    np.array([2.0, 0.5, -1.0]),
    1.3 * sample_directions(6)[3],
], ids=['inside', 'outside', 'on-sphere'])
def test_traction_kernel_is_conormal_derivative(y, lame):
    stencil = FDStencil(h=1e-4, order=4)
    for x in 1.3 * sample_directions(6):
        if np.linalg.norm(x - y) < 1e-6:
            continue
        kernel = traction_kernel(x, y, lame)
        for k in range(3):
            t = fd_traction(lambda z: kelvin_matrix(z - y, lame)[..., k], lame, x, stencil)
            assert_allclose(t, kernel[:, k], rtol=1e-6, atol=1e-9)


@pytest.mark.parametrize("r0", [0.7, 2.0])
def test_sphere_identities(r0, lame):
    pts = r0 * sample_directions(8)
    k = lame.coeffs
    for i, x in enumerate(pts):
        for y in np.delete(pts, i, axis=0):
            d = x - y
            dist = np.linalg.norm(d)
            nu_y = y / r0
            assert d.dot(nu_y) / dist ** 3 == pytest.approx(-1 / (2 * r0 * dist))
            # K1 is the same with either normal
            assert_allclose(antisymmetric_kernel(x, y, normal=nu_y), antisymmetric_kernel(x, y), atol=1e-13)
            flipped = symmetric_kernel(x, y, lame, normal=nu_y)
            expected = -(k.b1 * np.eye(3) + k.b2 * np.outer(d, d) / dist ** 2) / (2 * r0 * dist * FOUR_PI)
            assert_allclose(flipped, expected, rtol=1e-12, atol=1e-14)
            assert_allclose(symmetric_kernel(x, y, lame), -flipped, rtol=1e-12, atol=1e-14)
