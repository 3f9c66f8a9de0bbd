import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cr_webster import bubbles, verification
from cr_webster.bubbles import (
    Bubble,
    BubbleConfiguration,
    TruncatedBubble,
    H_field,
    c1_certificate,
    calibrate_c1,
    calibration_summary,
    chart_distance_constant,
    constants_S_c2,
    delta,
    delta_exact,
    eps_ij,
    functional_J,
    green_normalization,
    interaction_table,
    profiles_csv,
    sample_H_profile,
    sphere_integral,
)
from cr_webster.cr_sphere import SpherePoint, chart_map, constant_K, linear_K
from cr_webster.errors import InputError
from cr_webster.heisenberg import dilate

A = SpherePoint([0.6 + 0.2j, -0.3 + 0.7j])


def test_c1_is_scale_independent():
    assert c1_certificate(7.0).c1 == pytest.approx(c1_certificate(1.0).c1, abs=1e-10)
    assert calibrate_c1() == pytest.approx(2.0, abs=1e-12)


def test_constants_match_closed_forms():
    # int U^4 = pi^2 / 4 and int U^3 = 2 pi by direct integration in t, then |z|^2
    rep = constants_S_c2()
    c1 = calibrate_c1()
    assert rep.S == pytest.approx(c1 ** 4 * math.pi ** 2 / 4, rel=1e-8)
    assert rep.c2 == pytest.approx(c1 ** 3 * 2 * math.pi, rel=1e-8)


def test_green_normalization_and_chart_distance():
    assert green_normalization() == pytest.approx(1 / (2 * math.pi), rel=1e-8)
    assert chart_distance_constant() == pytest.approx(2.0, rel=1e-6)


@given(st.floats(0.5, 100))
def test_flat_bubble_peak_is_c1_lambda(lam):
    assert delta(Bubble(A, lam), A.xi) == pytest.approx(calibrate_c1() * lam, rel=1e-10)


@given(st.floats(0.5, 20), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
@settings(max_examples=30)
def test_flat_bubble_dilation_identity(lam, x, y, t):
    P = np.array([[x, y, t]])
    lhs = delta(Bubble(A, lam), chart_map(A, P))
    rhs = lam * delta(Bubble(A, 1.0), chart_map(A, dilate(P, lam)))
    assert lhs == pytest.approx(rhs, rel=1e-8)


@given(st.floats(1.0, 200))
def test_exact_bubble_at_antipode(lam):
    # lam * delta_exact(-a) = c1 for every lam
    assert lam * delta_exact(Bubble(A, lam), -A.xi) == pytest.approx(calibrate_c1(), rel=1e-12)


def test_exact_bubble_solves_the_equation():
    chk = verification.check_exact_bubble_pde()
    assert chk.passed, chk.measured


def test_H_profile_behaviour():
    chk = verification.check_H_profile()
    assert chk.passed, chk.measured


def test_H_vanishes_inside_cutoff():
    b = Bubble(A, 30.0)
    near = chart_map(A, np.array([[0.01, 0.0, 0.0]]))
    assert H_field(b, near) == 0.0
    assert TruncatedBubble(b).cutoff(-A.xi) == 0.0


def test_eps_cases():
    b = Bubble(A, 10.0)
    assert eps_ij(b, b) == pytest.approx(0.5)
    far, near = Bubble(-A.xi, 10.0), Bubble(SpherePoint(A.xi + 0.05), 10.0)
    assert eps_ij(b, far) < eps_ij(b, near)
    assert eps_ij(b, far) == pytest.approx(eps_ij(far, b))
    # decay like 1 / (lam^2 d^2) at fixed distance
    ratio = eps_ij(Bubble(A, 40.0), Bubble(-A.xi, 40.0)) / eps_ij(Bubble(A, 20.0), Bubble(-A.xi, 20.0))
    assert ratio == pytest.approx(0.25, rel=1e-2)


def test_sphere_volume_is_chart_independent():
    vol = np.pi ** 2 / 4
    one = lambda x: np.ones(x.shape[0])  # noqa: E731
    assert sphere_integral(one).value == pytest.approx(vol, rel=1e-9)
    two = [Bubble(A, 5.0), Bubble(-A.xi, 3.0)]
    assert sphere_integral(one, two, rtol=1e-9).value == pytest.approx(vol, rel=1e-8)


def test_single_bubble_norm_is_S():
    T = interaction_table([Bubble(A, 12.0)], rtol=1e-10)
    assert T[0, 0] == pytest.approx(constants_S_c2().S, rel=1e-8)


def test_J_is_homogeneous_and_permutation_invariant():
    K = linear_K(2.0, [0, 0, 1, 0])
    bs = [Bubble(SpherePoint([0, 1]), 6.0), Bubble(SpherePoint([0, -1]), 4.0)]
    j = functional_J(BubbleConfiguration([0.6, 0.8], bs), K, rtol=1e-9)
    assert functional_J(BubbleConfiguration([1.8, 2.4], bs), K, rtol=1e-9) == pytest.approx(j, rel=1e-10)
    assert functional_J(BubbleConfiguration([0.8, 0.6], bs[::-1]), K, rtol=1e-9) == pytest.approx(j, rel=1e-9)


def test_J_of_single_bubble_with_constant_K():
    j = functional_J(BubbleConfiguration([1.0], [Bubble(A, 9.0)]), constant_K(4.0), rtol=1e-10)
    assert j == pytest.approx(math.sqrt(constants_S_c2().S / 4.0), rel=1e-8)


def test_configuration_validation():
    with pytest.raises(InputError):
        BubbleConfiguration([1.0, -1.0], [Bubble(A, 2.0), Bubble(-A.xi, 2.0)])
    with pytest.raises(InputError):
        BubbleConfiguration([1.0, 1.0], [Bubble(A, 2.0), Bubble(A, 3.0)])
    with pytest.raises(InputError):
        Bubble(A, 0.0)


def test_profiles_csv_layout():
    text = profiles_csv([sample_H_profile(10.0, radii=[0.1, 1.0, 10.0])])
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["gauge_radius", "H", "lambda"]
    assert len(rows) == 4


def test_calibration_summary_keys():
    s = calibration_summary()
    for k in ("c1", "S", "c2", "c0", "c_G", "kappa", "quarter_R", "vectorfield_sign", "volume_factor"):
        assert k in s
    assert s["quarter_R"] == pytest.approx(4.0, rel=1e-10)
    assert s["c0"] == pytest.approx(1 / (8 * math.pi), rel=1e-8)


@pytest.mark.slow
def test_inner_products_are_stable():
    chk = verification.check_inner_products()
    assert chk.passed, chk.measured
    c = chk.measured["c_ij"]
    assert abs(c[-1] - c[-2]) / c[-1] < 1e-2


def test_bubble_module_exports():
    assert bubbles.CUTOFF_RADIUS == 0.5
