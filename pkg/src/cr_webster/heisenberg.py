"""Calculus on the Heisenberg group H^1 = C x R.

Points are handled as float arrays of shape ``(..., 3)`` holding ``(x, y, t)``
with ``z = x + i y``.  :class:`HPoint` is a thin scalar wrapper for API users.

Conventions (frozen for the whole run, see :func:`convention`):

* group law ``(z, t) . (w, s) = (z + w, t + s + 2 Im(z conj(w)))``, whose
  left-invariant horizontal fields are ``X = d_x + 2y d_t`` and
  ``Y = d_y - 2x d_t``;
* sublaplacian ``Delta = -(X^2 + Y^2)`` (positive operator);
* contact form ``theta0 = (dt + 2(x dy - y dx)) / 2``, for which X, Y are
  orthonormal for the Levi metric ``dtheta0(., J.) / 2``; then
  ``theta0 ^ dtheta0 = dx dy dt`` and the volume factor is 1.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigurationError, ConventionError, EvaluationError, PoleError, QuadratureError

# Conformal factor of the Cayley chart at its center.  The pullback of the
# sphere contact form (1/4) Im(conj(xi) . dxi) is exactly |1+|z|^2-it|^-2 theta0.
KAPPA = 1.0


@dataclass(frozen=True)
class HPoint:
    z: complex
    t: float

    def __post_init__(self):
        if not (np.isfinite(complex(self.z)) and np.isfinite(self.t)):
            raise ConfigurationError(f"non-finite Heisenberg point {self!r}")

    def as_array(self) -> np.ndarray:
        return np.array([complex(self.z).real, complex(self.z).imag, float(self.t)])

    @classmethod
    def from_array(cls, a) -> "HPoint":
        a = np.asarray(a, dtype=float)
        return cls(complex(a[0], a[1]), float(a[2]))


IDENTITY = HPoint(0j, 0.0)


@dataclass(frozen=True)
class GaugeBall:
    center: HPoint = IDENTITY
    radius: float = 1.0

    def __post_init__(self):
        if self.radius < 0:
            raise ConfigurationError("gauge ball radius must be nonnegative")


@dataclass(frozen=True)
class ContactConvention:
    volume_factor: float
    vectorfield_sign: int
    contact_scale: float

    def __post_init__(self):
        if self.volume_factor <= 0:
            raise ConfigurationError("volume_factor must be positive")
        if self.vectorfield_sign not in (-1, 1):
            raise ConfigurationError("vectorfield_sign must be +1 or -1")


def _coords(p) -> np.ndarray:
    if isinstance(p, HPoint):
        return p.as_array()
    return np.asarray(p, dtype=float)


def gauge_norm(p):
    """``(|z|^4 + t^2)^(1/4)``; scalar for a single point, array otherwise."""
    P = _coords(p)
    r2 = P[..., 0] ** 2 + P[..., 1] ** 2
    g = (r2 * r2 + P[..., 2] ** 2) ** 0.25
    return float(g) if np.ndim(g) == 0 else g


def group_translate(p, q):
    """Left translation ``p . q``."""
    P, Q = _coords(p), _coords(q)
    out = np.empty(np.broadcast_shapes(P.shape, Q.shape))
    out[..., 0] = P[..., 0] + Q[..., 0]
    out[..., 1] = P[..., 1] + Q[..., 1]
    out[..., 2] = P[..., 2] + Q[..., 2] + 2.0 * (P[..., 1] * Q[..., 0] - P[..., 0] * Q[..., 1])
    if isinstance(p, HPoint) and isinstance(q, HPoint):
        return HPoint.from_array(out)
    return out


def group_inverse(p):
    if isinstance(p, HPoint):
        return HPoint(-complex(p.z), -p.t)
    return -_coords(p)


def dilate(p, lam: float):
    P = _coords(p).copy()
    P[..., :2] *= lam
    P[..., 2] *= lam * lam
    return HPoint.from_array(P) if isinstance(p, HPoint) else P


def gauge_distance(p, q):
    return gauge_norm(group_translate(group_inverse(p), q))


def translation_matrix(a) -> tuple[np.ndarray, np.ndarray]:
    """Affine form ``q -> A q + b`` of the left translation by ``a``."""
    x, y, t = _coords(a)
    A = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [2.0 * y, -2.0 * x, 1.0]])
    return A, np.array([x, y, t])


class HField:
    """Scalar field on H^1 with optional analytic Euclidean derivatives.

    ``value`` maps ``(N, 3) -> (N,)``; ``grad`` to ``(N, 3)`` and ``hess`` to
    ``(N, 3, 3)`` when given.
    """

    def __init__(self, value: Callable, grad: Callable | None = None, hess: Callable | None = None):
        self.value = value
        self.grad = grad
        self.hess = hess

    def __call__(self, P):
        return self.value(np.asarray(P, dtype=float))

    @property
    def analytic(self) -> bool:
        return self.hess is not None

    def compose_affine(self, A, b) -> "HField":
        """The field ``q -> f(A q + b)``."""
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)

        def value(P):
            return self.value(P @ A.T + b)

        grad = (lambda P: self.grad(P @ A.T + b) @ A) if self.grad is not None else None
        hess = ((lambda P: np.einsum("ia,nij,jb->nab", A, self.hess(P @ A.T + b), A))
                if self.hess is not None else None)
        return HField(value, grad, hess)

    def scaled(self, c: float) -> "HField":
        grad = (lambda P: c * self.grad(P)) if self.grad is not None else None
        hess = (lambda P: c * self.hess(P)) if self.hess is not None else None
        return HField(lambda P: c * self.value(P), grad, hess)


def _profile_F(P):
    r2 = P[..., 0] ** 2 + P[..., 1] ** 2
    return (1.0 + r2) ** 2 + P[..., 2] ** 2, r2


def _profile_value(P):
    F, _ = _profile_F(P)
    return F ** -0.5


def _profile_derivs(P):
    x, y, t = P[..., 0], P[..., 1], P[..., 2]
    F, r2 = _profile_F(P)
    dF = np.stack([4 * x * (1 + r2), 4 * y * (1 + r2), 2 * t], axis=-1)
    d2F = np.zeros(P.shape[:-1] + (3, 3))
    d2F[..., 0, 0] = 4 * (1 + r2) + 8 * x * x
    d2F[..., 1, 1] = 4 * (1 + r2) + 8 * y * y
    d2F[..., 0, 1] = d2F[..., 1, 0] = 8 * x * y
    d2F[..., 2, 2] = 2.0
    return F, dF, d2F


def _profile_grad(P):
    F, dF, _ = _profile_derivs(P)
    return -0.5 * F[..., None] ** -1.5 * dF


def _profile_hess(P):
    F, dF, d2F = _profile_derivs(P)
    outer = dF[..., :, None] * dF[..., None, :]
    return 0.75 * F[..., None, None] ** -2.5 * outer - 0.5 * F[..., None, None] ** -1.5 * d2F


#: ``|1 + |z|^2 - i t|^{-1}`` with exact derivatives; the bubble shape.
PROFILE = HField(_profile_value, _profile_grad, _profile_hess)


def _horizontal_square_sum_analytic(f: HField, P):
    H = f.hess(P)
    x, y = P[..., 0], P[..., 1]
    return (H[..., 0, 0] + H[..., 1, 1] + 4.0 * (y * H[..., 0, 2] - x * H[..., 1, 2])
            + 4.0 * (x * x + y * y) * H[..., 2, 2])


def _horizontal_square_sum_fd(f, P, h):
    def ev(Q):
        v = np.asarray(f(Q), dtype=float)
        if not np.all(np.isfinite(v)):
            raise EvaluationError("field returned non-finite values")
        return v

    hh = h[..., None]
    zero = np.zeros_like(hh)
    f0 = ev(P)
    total = -4.0 * f0
    for step in (np.concatenate([hh, zero, zero], axis=-1), np.concatenate([zero, hh, zero], axis=-1)):
        total = total + ev(group_translate(P, step)) + ev(group_translate(P, -step))
    return total / (h * h)


def sublaplacian_H(f, p, h: float | None = None, *, method: str = "auto"):
    """``Delta f(p)`` for the positive sublaplacian ``-(X^2 + Y^2)``.

    With ``method="auto"`` analytic Euclidean Hessians are used when ``f`` is
    an :class:`HField` providing them; otherwise second differences along the
    integral curves of X and Y (left translations by ``(+-h, 0, 0)`` and
    ``(0, +-h, 0)``), with default step ``1e-4 * max(1, |p|)``.
    """
    P = _coords(p)
    scalar = P.ndim == 1
    P2 = np.atleast_2d(P)
    sign = convention().vectorfield_sign
    use_analytic = method == "analytic" or (method == "auto" and isinstance(f, HField) and f.analytic)
    if use_analytic:
        if not (isinstance(f, HField) and f.analytic):
            raise ConfigurationError("analytic sublaplacian requested for a field without a Hessian")
        out = sign * _horizontal_square_sum_analytic(f, P2)
    else:
        if h is None:
            hv = 1e-4 * np.maximum(1.0, gauge_norm(P2))
        else:
            if not h > 0:
                raise ConfigurationError(f"finite-difference step must be positive, got {h}")
            hv = np.full(P2.shape[0], float(h))
        out = sign * _horizontal_square_sum_fd(f, P2, hv)
    if not np.all(np.isfinite(out)):
        raise EvaluationError("non-finite sublaplacian value")
    return float(out[0]) if scalar else out


@functools.cache
def convention() -> ContactConvention:
    """Calibrate and freeze the run-wide contact convention.

    The sign is the one making ``sign * (X^2 + Y^2)`` of the bubble profile a
    positive multiple of the profile cubed; ``theta0 = a (dt + 2(x dy - y dx))``
    with ``a = 1/2`` gives ``theta0 ^ dtheta0 = 4 a^2 dx dy dt``.
    """
    probe = np.array([[0.3, -0.2, 0.5], [1.1, 0.4, -0.7]])
    raw = _horizontal_square_sum_analytic(PROFILE, probe)
    ratio = raw / PROFILE(probe) ** 3
    if not np.allclose(ratio, ratio[0], rtol=1e-12):
        raise ConventionError("bubble profile is not a solution under the X, Y convention")
    sign = -1 if ratio[0] < 0 else 1
    a = 0.5
    return ContactConvention(volume_factor=4.0 * a * a, vectorfield_sign=sign, contact_scale=a)


# --------------------------------------------------------------------------
# quadrature


def _gauss(n, lo, hi):
    g, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (g + 1.0), half * w


def radial_nodes(n_per_panel: int, *, scale: float = 1.0, radius: float | None = None,
                 panels: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Gauge-radial nodes and weights (including ``dr/ds``, excluding ``r^3``).

    For the whole group the radius is compactified as ``r = scale * s/(1-s)``
    with Gauss panels graded toward ``s = 1`` (edges ``1 - 2^-k``); for a ball
    of radius R a single panel on ``[0, R]`` is used.
    """
    if radius is not None:
        return _gauss(n_per_panel, 0.0, float(radius))
    edges = [0.0] + [1.0 - 2.0 ** -k for k in range(1, panels + 1)] + [1.0]
    s_parts, w_parts = zip(*(_gauss(n_per_panel, a, b) for a, b in zip(edges[:-1], edges[1:])))
    s, w = np.concatenate(s_parts), np.concatenate(w_parts)
    return scale * s / (1.0 - s), w * scale / (1.0 - s) ** 2


def angular_nodes(n_angle: int, n_theta: int, theta_offset: float = 0.0):
    """Nodes ``(psi, theta)`` with weights for the gauge sphere.

    ``psi = (pi/2) sin(phi)`` removes the square-root endpoint behaviour of
    ``|z| = r sqrt(cos psi)`` at the poles ``psi = +-pi/2``.
    """
    phi, wphi = _gauss(n_angle, -0.5 * np.pi, 0.5 * np.pi)
    psi = 0.5 * np.pi * np.sin(phi)
    wpsi = wphi * 0.5 * np.pi * np.cos(phi)
    theta = theta_offset + 2.0 * np.pi * np.arange(n_theta) / n_theta
    wtheta = np.full(n_theta, 2.0 * np.pi / n_theta)
    return psi, wpsi, theta, wtheta


def polar_to_cartesian(r, psi, theta):
    c = np.sqrt(np.cos(psi))
    return np.stack([r * c * np.cos(theta), r * c * np.sin(theta), r * r * np.sin(psi)], axis=-1)


def gauge_polar_grid(n_angle: int, n_theta: int, *, scale: float = 1.0, radius: float | None = None,
                     theta_offset: float = 0.0):
    """Tensor grid ``(P, W)`` with Lebesgue weights ``r^3 dr dpsi dtheta``.

    Shapes: ``P`` is ``(n_r, n_angle, n_theta, 3)``, ``W`` matches without the
    last axis.
    """
    n_r = max(8, n_angle // 4)
    r, wr = radial_nodes(n_r, scale=scale, radius=radius)
    psi, wpsi, theta, wtheta = angular_nodes(n_angle, n_theta, theta_offset)
    R, PSI, TH = np.meshgrid(r, psi, theta, indexing="ij")
    P = polar_to_cartesian(R, PSI, TH)
    W = (wr * r ** 3)[:, None, None] * wpsi[None, :, None] * wtheta[None, None, :]
    return P, W


@dataclass(frozen=True)
class QuadResult:
    value: float
    previous: float
    gap: float
    levels: tuple
    values: tuple
    converged: bool

    @property
    def gaps(self) -> tuple:
        v = self.values
        return tuple(abs(b - a) / max(abs(b), 1e-300) for a, b in zip(v[:-1], v[1:]))


def _is_axisymmetric(g: Callable, n_angle: int, **grid_kw) -> bool:
    P0, _ = gauge_polar_grid(max(8, n_angle // 4), 1, theta_offset=0.0, **grid_kw)
    P1, _ = gauge_polar_grid(max(8, n_angle // 4), 1, theta_offset=1.2345, **grid_kw)
    v0 = np.asarray(g(P0.reshape(-1, 3)), dtype=float)
    v1 = np.asarray(g(P1.reshape(-1, 3)), dtype=float)
    scale = max(np.max(np.abs(v0)), 1e-300)
    return bool(np.max(np.abs(v0 - v1)) <= 1e-13 * scale)


def grid_integral(g: Callable, n_angle: int, n_theta: int, *, chunk: int = 400_000, **grid_kw) -> float:
    """Sum of ``g(P) * W`` over one tensor grid, evaluated in chunks."""
    P, W = gauge_polar_grid(n_angle, n_theta, **grid_kw)
    P = P.reshape(-1, 3)
    W = W.reshape(-1)
    total = 0.0
    for lo in range(0, P.shape[0], chunk):
        vals = np.asarray(g(P[lo:lo + chunk]), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise EvaluationError("integrand returned non-finite values")
        total += float(np.dot(vals, W[lo:lo + chunk]))
    return total


def quadrature_H(f: Callable, region: GaugeBall | None = None, *, levels=(32, 64, 128), rtol: float = 1e-4,
                 atol: float = 1e-12, scale: float = 1.0, axisymmetric: bool | None = None,
                 exhaust: bool = False, raise_on_failure: bool = True) -> QuadResult:
    """Integrate ``f`` against ``theta0 ^ dtheta0`` over a gauge ball or all of H^1.

    Nested tensor Gauss rules in gauge-polar coordinates; each level uses
    ``levels[k]`` angular nodes.  Stops at the first level agreeing with its
    predecessor to ``rtol`` unless ``exhaust``.  Integrands independent of
    ``arg z`` (detected numerically unless ``axisymmetric`` is given) skip the
    ``theta`` direction.
    """
    if len(levels) < 2:
        raise ConfigurationError("need at least two refinement levels")
    vf = convention().volume_factor
    if region is not None:
        center = _coords(region.center)
        radius = region.radius

        def g(P):
            return f(group_translate(center, P))
        grid_kw = {"radius": radius}
    else:
        g = f
        grid_kw = {"scale": scale}
    if axisymmetric is None:
        axisymmetric = _is_axisymmetric(g, levels[0], **grid_kw)
    values = []
    for n in levels:
        n_theta = 1 if axisymmetric else n
        values.append(vf * grid_integral(g, n, n_theta, **grid_kw))
        if len(values) >= 2 and not exhaust:
            if abs(values[-1] - values[-2]) <= rtol * abs(values[-1]) + atol:
                break
    done = tuple(levels[: len(values)])
    gap = abs(values[-1] - values[-2]) / max(abs(values[-1]), 1e-300)
    converged = abs(values[-1] - values[-2]) <= rtol * abs(values[-1]) + atol
    if not converged and raise_on_failure:
        raise QuadratureError(f"quadrature did not reach rtol={rtol}: last values {values[-2]!r}, {values[-1]!r}",
                              partials=values[-2:])
    return QuadResult(values[-1], values[-2], gap, done, tuple(values), converged)


# --------------------------------------------------------------------------
# Cayley chart


def cayley(p) -> np.ndarray:
    """``(z, t) -> (2z, 1 - |z|^2 + it) / (1 + |z|^2 - it)`` onto the unit sphere of C^2."""
    P = _coords(p)
    z = P[..., 0] + 1j * P[..., 1]
    w = P[..., 0] ** 2 + P[..., 1] ** 2 - 1j * P[..., 2]
    den = 1.0 + w
    return np.stack([2.0 * z / den, (1.0 - w) / den], axis=-1)


def cayley_inv(xi, *, pole_tol: float = 1e-14):
    """Inverse of :func:`cayley`; the pole ``(0, -1)`` has no preimage."""
    X = np.asarray(getattr(xi, "xi", xi), dtype=complex)
    den = 1.0 + X[..., 1]
    if np.any(np.abs(den) < pole_tol):
        raise PoleError("point at the Cayley pole (0, -1)")
    z = X[..., 0] / den
    w = (1.0 - X[..., 1]) / den
    out = np.stack([z.real, z.imag, -w.imag], axis=-1)
    return out


def conformal_factor(p):
    """``kappa / |1 + |z|^2 - it|``: the sphere contact form pulls back to ``u^2 theta0``."""
    P = _coords(p)
    v = KAPPA * _profile_value(P)
    return float(v) if np.ndim(v) == 0 else v
