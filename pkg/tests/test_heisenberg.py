import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from cr_webster.errors import ConfigurationError, PoleError, QuadratureError
from cr_webster.heisenberg import (
    HPoint,
    PROFILE,
    GaugeBall,
    cayley,
    cayley_inv,
    conformal_factor,
    convention,
    dilate,
    gauge_distance,
    gauge_norm,
    group_inverse,
    group_translate,
    quadrature_H,
    sublaplacian_H,
)

coord = st.floats(-5, 5, allow_nan=False)
point = st.tuples(coord, coord, coord).map(np.array)


@given(point, st.floats(0.01, 50))
def test_gauge_norm_homogeneous(p, lam):
    assert math.isclose(gauge_norm(dilate(p, lam)), lam * gauge_norm(p), rel_tol=1e-12, abs_tol=1e-12)


@given(point, point)
def test_translation_identity_and_inverse(p, q):
    assert np.allclose(group_translate(np.zeros(3), p), p)
    assert np.allclose(group_translate(p, group_inverse(p)), 0.0, atol=1e-12)
    # left-invariance of the gauge distance
    g = np.array([0.3, -1.2, 0.7])
    # fourth powers avoid root amplification of round-off
    assert math.isclose(gauge_distance(group_translate(g, p), group_translate(g, q)) ** 4,
                        gauge_distance(p, q) ** 4, rel_tol=1e-9, abs_tol=1e-9)


def test_translation_is_associative():
    a, b, c = np.array([1.0, 2.0, 3.0]), np.array([-0.5, 0.4, 1.0]), np.array([2.0, -1.0, 0.2])
    assert np.allclose(group_translate(group_translate(a, b), c), group_translate(a, group_translate(b, c)))


def test_hpoint_roundtrip():
    p = HPoint(1 + 2j, 3.0)
    q = group_translate(p, group_inverse(p))
    assert isinstance(q, HPoint) and abs(q.z) == 0 and q.t == 0


def test_constants_are_harmonic():
    assert sublaplacian_H(lambda P: np.full(P.shape[0], 7.0), np.array([[0.2, 0.3, 0.4]]))[0] == pytest.approx(0, abs=1e-6)


def test_sublaplacian_of_z_squared_matches_sympy():
    x, y = oracles.x, oracles.y
    exact = -oracles.horizontal_square_sum(x ** 2 + y ** 2)
    assert exact == -4
    f = lambda P: P[:, 0] ** 2 + P[:, 1] ** 2  # noqa: E731
    vals = sublaplacian_H(f, np.array([[0.1, 0.2, 0.3], [2.0, -1.0, 5.0]]))
    assert np.allclose(vals, float(exact), rtol=1e-6)


def test_sublaplacian_of_t_polynomial_matches_sympy():
    x, y, t = oracles.x, oracles.y, oracles.t
    expr = t ** 2 + x * t
    exact = sp.lambdify((x, y, t), -oracles.horizontal_square_sum(expr))
    f = lambda P: P[:, 2] ** 2 + P[:, 0] * P[:, 2]  # noqa: E731
    P = np.array([[0.3, -0.7, 1.1], [1.5, 0.2, -0.4]])
    assert np.allclose(sublaplacian_H(f, P), exact(*P.T), rtol=1e-6)


def test_profile_shape_solves_the_equation_symbolically():
    c2 = oracles.symbolic_c1_squared()
    assert c2.free_symbols == set()
    assert convention().vectorfield_sign == -1
    assert float(c2) == pytest.approx(4.0)


@given(point)
@settings(max_examples=30)
def test_analytic_and_fd_sublaplacian_agree(p):
    a = sublaplacian_H(PROFILE, p, method="analytic")
    f = sublaplacian_H(PROFILE, p, method="fd")
    assert a == pytest.approx(f, rel=1e-4, abs=1e-8)


def test_nonpositive_step_rejected():
    with pytest.raises(ConfigurationError):
        sublaplacian_H(lambda P: P[:, 0], np.zeros(3), h=0.0)


@given(point)
def test_cayley_lands_on_sphere_and_roundtrips(p):
    xi = cayley(p)
    assert np.sum(np.abs(xi) ** 2) == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(cayley_inv(xi), p, atol=1e-8 * max(1, gauge_norm(p)) ** 2)


def test_cayley_origin_and_pole():
    assert np.allclose(cayley(np.zeros(3)), [0, 1])
    with pytest.raises(PoleError):
        cayley_inv(np.array([0, -1], dtype=complex))


def test_conformal_factor_at_origin():
    assert conformal_factor(np.zeros(3)) == pytest.approx(1.0)


def test_quadrature_matches_monte_carlo_ball_volume():
    vol = quadrature_H(lambda P: np.ones(P.shape[0]), GaugeBall(HPoint(0j, 0.0), 1.0), levels=(16, 32))
    vf = convention().volume_factor
    mc, se = oracles.mc_unit_gauge_ball_volume(2_000_000)
    assert vol.value / vf == pytest.approx(np.pi ** 2 / 2, rel=1e-10)
    assert abs(vol.value / vf - mc) < 4 * se


def test_quadrature_of_odd_integrand_vanishes():
    q = quadrature_H(lambda P: P[:, 2] * PROFILE(P) ** 4, levels=(16, 32), atol=1e-12)
    assert abs(q.value) < 1e-12


def test_quadrature_gaps_shrink():
    q = quadrature_H(lambda P: PROFILE(P) ** 4, levels=(8, 16, 32), exhaust=True)
    g = q.gaps
    assert g[1] < g[0]


def test_quadrature_failure_raises_with_partials():
    with pytest.raises(QuadratureError) as e:
        quadrature_H(lambda P: PROFILE(P) ** 2.2, levels=(8, 16), rtol=1e-15, atol=0.0)
    assert len(e.value.partials) == 2


def test_dilation_preserves_origin_and_ball_sample():
    assert np.allclose(dilate(np.array([1.0, 1.0, 1.0]), 2.0), [2, 2, 4])
    p = HPoint(1j, 2.0)
    assert dilate(p, 3.0) == HPoint(3j, 18.0)
