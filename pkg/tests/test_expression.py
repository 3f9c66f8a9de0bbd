import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cr_webster.cr_sphere import SpherePoint, riemannian_derivatives, sphere_samples
from cr_webster.errors import ExpressionError, InputError
from cr_webster.expression import parse_expression, parse_K


def test_simple_value():
    K = parse_K("2 + x2")
    assert K(SpherePoint([0, 1])) == pytest.approx(3.0)


def test_non_positive_expression_rejected():
    with pytest.raises(InputError, match="not positive"):
        parse_K("x1")


def test_caret_is_power_with_python_precedence():
    K = parse_K("x1^2 + 1")
    X = np.array([[0.6, 0.0, 0.8, 0.0]])
    assert K.ambient(X)[0] == pytest.approx(1.36)
    assert parse_K("2^3 + x1", check_samples=0).ambient(X)[0] == pytest.approx(8.6)


@pytest.mark.parametrize("text, pos", [("2 + foo", 5), ("  2 + bar(x1)", 7), ("x1^2 + $", 8), ("x1 @ 2", 1)])
def test_error_positions(text, pos):
    with pytest.raises(ExpressionError) as e:
        parse_expression(text)
    assert e.value.position == pos


def test_empty_and_bad_arity():
    with pytest.raises(ExpressionError):
        parse_expression("   ")
    with pytest.raises(ExpressionError):
        parse_expression("exp(x1, x2)")


EXPRS = ["2 + 0.3*x1*y2 - 0.2*x2^2", "exp(0.3*x1) + cos(y1) + 1", "3 + sqrt(2 + x2) * sin(y2)"]


@pytest.mark.parametrize("text", EXPRS)
def test_exact_derivatives_match_finite_differences(text):
    K = parse_K(text)
    X = sphere_samples(20, 4)
    g_exact, H_exact = riemannian_derivatives(K, X)
    K.grad = K.hess = None
    g_fd, H_fd = riemannian_derivatives(K, X)
    assert np.allclose(g_exact, g_fd, atol=1e-6)
    assert np.allclose(H_exact, H_fd, atol=1e-5)


@given(st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=30)
def test_linear_expressions_evaluate_exactly(a, b):
    K = parse_K(f"10 + ({a!r})*x1 + ({b!r})*y2", check_samples=0)
    X = sphere_samples(4, 1)
    assert np.allclose(K.ambient(X), 10 + a * X[:, 0] + b * X[:, 3], rtol=1e-14, atol=1e-13)
