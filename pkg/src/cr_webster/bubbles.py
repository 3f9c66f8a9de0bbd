"""Bubbles on H^1 and S^3, the constants c1, S, c2, and the functional J.

The flat bubble ``delta_(a, lam)`` lives in the Cayley chart re-centered at
``a``; its global counterpart ``delta_exact`` solves ``L u = u^3`` on the
whole sphere.  Sphere integrals use one gauge-polar chart per bubble with
radial scale ``1 / lam`` glued by a partition of unity.
"""

from __future__ import annotations

import csv
import functools
import io
import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .cr_sphere import (
    CurvatureFunction,
    SpherePoint,
    chart_inverse,
    chart_map,
    cr_distance,
    hermitian,
    quarter_webster_curvature,
    recentering_unitary,
)
from .errors import ConfigurationError, ConventionError, EvaluationError, InputError, QuadratureError
from .heisenberg import (
    KAPPA,
    PROFILE,
    HField,
    QuadResult,
    conformal_factor,
    convention,
    gauge_norm,
    gauge_polar_grid,
    quadrature_H,
    sublaplacian_H,
)

CUTOFF_RADIUS = 0.5


# --------------------------------------------------------------------------
# calibration


def dilated_profile(lam: float) -> HField:
    """``lam * U(lam z, lam^2 t)`` with exact derivatives."""
    D = np.diag([lam, lam, lam * lam])
    return PROFILE.compose_affine(D, np.zeros(3)).scaled(lam)


def gauge_ball_samples(n: int, radius: float = 2.0, seed: int = 0) -> np.ndarray:
    """Points of ``(n, 3)`` spread through a gauge ball (rejection from a box)."""
    rng = np.random.default_rng(seed)
    out = np.empty((0, 3))
    while out.shape[0] < n:
        P = rng.uniform([-radius, -radius, -radius ** 2], [radius, radius, radius ** 2], size=(4 * n, 3))
        out = np.vstack([out, P[gauge_norm(P) <= radius]])
    return out[:n]


@dataclass(frozen=True)
class C1Certificate:
    c1: float
    lam: float
    residual_analytic: float
    residual_fd: float
    n_points: int


@functools.cache
def c1_certificate(lam: float = 1.0, n_points: int = 1000, seed: int = 0) -> C1Certificate:
    """Solve for c1 at one interior point, then validate at ``n_points`` points.

    Since ``Delta(c f) = (c f)^3`` for ``c f`` with ``f`` the dilated profile,
    ``c^2 = Delta f / f^3`` at any point.
    """
    lam = float(lam)
    f = dilated_profile(lam)
    probe = np.array([[0.37 / lam, -0.21 / lam, 0.44 / lam ** 2]])
    ratio = sublaplacian_H(f, probe) / f(probe) ** 3
    if not ratio[0] > 0:
        raise ConventionError(f"bubble shape gives Delta f / f^3 = {ratio[0]:.6g}; sign convention is wrong")
    c1 = float(np.sqrt(ratio[0]))
    delta = f.scaled(c1)
    P = gauge_ball_samples(n_points, 2.0 / lam, seed)
    cube = delta(P) ** 3
    res_a = float(np.max(np.abs(sublaplacian_H(delta, P) - cube) / cube))
    res_fd = float(np.max(np.abs(sublaplacian_H(delta, P, method="fd") - cube) / cube))
    if res_a > 1e-8:
        raise ConventionError(f"bubble residual {res_a:.3g} after calibration exceeds 1e-8")
    return C1Certificate(c1, lam, res_a, res_fd, n_points)


def calibrate_c1(lam: float = 1.0) -> float:
    return c1_certificate(lam).c1


@dataclass(frozen=True)
class ConstantsReport:
    S: float
    c2: float
    S_quad: QuadResult
    c2_quad: QuadResult


@functools.cache
def constants_S_c2(levels: tuple = (32, 64, 128)) -> ConstantsReport:
    """``S = c1^4 int U^4`` and ``c2 = c1^3 int U^3`` over H^1, all levels evaluated."""
    c1 = calibrate_c1()
    q4 = quadrature_H(lambda P: PROFILE(P) ** 4, levels=levels, exhaust=True, axisymmetric=True)
    q3 = quadrature_H(lambda P: PROFILE(P) ** 3, levels=levels, exhaust=True, axisymmetric=True)
    return ConstantsReport(c1 ** 4 * q4.value, c1 ** 3 * q3.value, q4, q3)


def fundamental_solution_constant() -> float:
    """``c0`` with ``Delta (c0 |p|^-2) = Dirac`` on H^1.

    Testing ``Delta delta = delta^3`` against ``c0 |p|^-2`` at the origin gives
    ``c0 * c1^3 * int U^3 = c1``, i.e. ``c0 = c1 / c2``.
    """
    return calibrate_c1() / constants_S_c2().c2


def green_normalization() -> float:
    """``c_G`` in ``G(a, x) = c_G / d(a, x)^2`` on the sphere.

    Near ``a``, ``G`` matches ``c0 / |p|^2`` in the chart (the conformal factor
    is ``kappa`` there) and ``d^2 ~ 4 |p|^2``.
    """
    return 4.0 * fundamental_solution_constant() / KAPPA ** 2


def chart_distance_constant(eps: float = 1e-4, n_dirs: int = 16) -> float:
    """Limit of ``d(cayley(p), cayley(0)) / |p|`` as ``p -> 0`` (the same along every direction)."""
    ang = np.linspace(0.0, 2 * np.pi, n_dirs, endpoint=False)
    psi = np.linspace(-1.2, 1.2, n_dirs)
    P = np.stack([np.sqrt(np.cos(psi)) * np.cos(ang), np.sqrt(np.cos(psi)) * np.sin(ang), np.sin(psi)], axis=1)
    P = P * np.array([eps, eps, eps * eps])
    a = np.array([0.0, 1.0], dtype=complex)
    ratios = cr_distance(chart_map(a, P), a) / gauge_norm(P)
    if np.ptp(ratios) > 1e-4 * np.mean(ratios):
        raise ConventionError("chart distance ratio is direction dependent")
    return float(np.mean(ratios))


# --------------------------------------------------------------------------
# bubbles


@dataclass(frozen=True)
class Bubble:
    center: SpherePoint
    lam: float
    phase: float = 0.0

    def __post_init__(self):
        if not isinstance(self.center, SpherePoint):
            object.__setattr__(self, "center", SpherePoint(self.center))
        if not self.lam > 0:
            raise InputError(f"bubble scale must be positive, got {self.lam}")

    @property
    def chart(self) -> np.ndarray:
        return recentering_unitary(self.center, self.phase)


def smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s ** 3 * (10.0 - 15.0 * s + 6.0 * s * s)


@dataclass(frozen=True)
class TruncatedBubble:
    bubble: Bubble
    radius: float = CUTOFF_RADIUS

    def cutoff(self, x):
        """1 on ``d <= r/2``, 0 on ``d >= r``, quintic in between."""
        d = cr_distance(x, self.bubble.center)
        return 1.0 - smoothstep((np.asarray(d) - self.radius / 2) / (self.radius / 2))

    def __call__(self, x):
        return self.cutoff(x) * delta_exact(self.bubble, x)


@dataclass
class BubbleConfiguration:
    alphas: np.ndarray
    bubbles: list

    def __post_init__(self):
        self.alphas = np.asarray(self.alphas, dtype=float)
        if self.alphas.shape != (len(self.bubbles),) or not np.all(self.alphas > 0):
            raise InputError("need one positive alpha per bubble")
        for b1, b2 in itertools.combinations(self.bubbles, 2):
            if np.linalg.norm(b1.center.xi - b2.center.xi) < 1e-12:
                raise InputError("bubble centers must be pairwise distinct")

    @property
    def p(self) -> int:
        return len(self.bubbles)

    def balance_residual(self, K: CurvatureFunction) -> float:
        m = self.alphas ** 2 * np.array([K(b.center) for b in self.bubbles])
        return float(np.max(np.abs(m[:, None] / m[None, :] - 1.0)))


def delta(b: Bubble, x):
    """Flat bubble ``c1 lam / |1 + lam^2 (|z|^2 - it)|`` in the chart of ``b``."""
    P = chart_inverse(b.center, x, b.phase)
    c1 = calibrate_c1()
    w = P[..., 0] ** 2 + P[..., 1] ** 2 - 1j * P[..., 2]
    out = c1 * b.lam / np.abs(1.0 + b.lam ** 2 * w)
    return float(out) if np.ndim(out) == 0 else out


def delta_exact(b: Bubble, x):
    """``(2 c1 lam / kappa) / |1 + lam^2 - (lam^2 - 1) <x, a>|``.

    Equals ``delta / u_C`` in the chart and solves ``L u = u^3`` on all of S^3.
    """
    c1 = calibrate_c1()
    lam2 = b.lam ** 2
    den = np.abs(1.0 + lam2 - (lam2 - 1.0) * hermitian(x, b.center))
    out = (2.0 * c1 * b.lam / KAPPA) / den
    return float(out) if np.ndim(out) == 0 else out


def H_field(b: Bubble, x, radius: float = CUTOFF_RADIUS):
    """``lam (delta_exact - delta_hat)``; vanishes near the center."""
    tb = TruncatedBubble(b, radius)
    return b.lam * (1.0 - tb.cutoff(x)) * delta_exact(b, x)


def eps_ij(bi: Bubble, bj: Bubble) -> float:
    r = bi.lam / bj.lam
    d2 = cr_distance(bi.center, bj.center) ** 2
    return 1.0 / (r + 1.0 / r + bi.lam * bj.lam * d2)


# --------------------------------------------------------------------------
# sphere quadrature


@dataclass(frozen=True)
class SphereQuadResult:
    value: np.ndarray
    values: tuple
    levels: tuple
    gap: float
    converged: bool


def _bubble_weights(bubbles: Sequence[Bubble]) -> Callable:
    def weights(x):
        W = np.stack([delta_exact(b, x) ** 4 for b in bubbles], axis=-1)
        return W / np.sum(W, axis=-1, keepdims=True)
    return weights


def _chart_integrand(f, b: Bubble, weights, k: int):
    def g(P):
        x = chart_map(b.center, P, b.phase)
        vals = np.asarray(f(x), dtype=float)
        vals = vals.reshape(P.shape[0], -1)
        w = 1.0 if weights is None else weights(x)[:, k:k + 1]
        return vals * w * (conformal_factor(P) ** 4)[:, None]
    return g


def _theta_invariant(g, scale, n_angle) -> bool:
    P0, _ = gauge_polar_grid(max(8, n_angle // 4), 1, scale=scale, theta_offset=0.0)
    P1, _ = gauge_polar_grid(max(8, n_angle // 4), 1, scale=scale, theta_offset=1.2345)
    v0, v1 = g(P0.reshape(-1, 3)), g(P1.reshape(-1, 3))
    return bool(np.max(np.abs(v0 - v1)) <= 1e-13 * max(np.max(np.abs(v0)), 1e-300))


def _grid_sum(g, n_angle, n_theta, scale, chunk=200_000):
    P, W = gauge_polar_grid(n_angle, n_theta, scale=scale)
    P, W = P.reshape(-1, 3), W.reshape(-1)
    total = 0.0
    for lo in range(0, P.shape[0], chunk):
        vals = g(P[lo:lo + chunk])
        if not np.all(np.isfinite(vals)):
            raise EvaluationError("sphere integrand returned non-finite values")
        total = total + W[lo:lo + chunk] @ vals
    return total


def sphere_integral(f: Callable, bubbles: Sequence[Bubble] = (), *, levels=(32, 64, 128), rtol: float = 1e-8,
                    atol: float = 0.0, exhaust: bool = False, raise_on_failure: bool = False) -> SphereQuadResult:
    """Integrate ``f`` (complex ``(N, 2)`` -> ``(N,)`` or ``(N, m)``) over S^3.

    One Cayley chart per bubble, radial scale ``1 / lam``, glued by the
    partition ``delta_i^4 / sum_j delta_j^4``.  Without bubbles a single
    chart at ``(0, 1)`` with unit scale is used.
    """
    if len(levels) < 2:
        raise ConfigurationError("need at least two refinement levels")
    charts = list(bubbles) or [Bubble(SpherePoint([0, 1]), 1.0)]
    weights = _bubble_weights(charts) if len(charts) > 1 else None
    vf = convention().volume_factor
    parts = []
    for k, b in enumerate(charts):
        g = _chart_integrand(f, b, weights, k)
        parts.append((g, 1.0 / b.lam, _theta_invariant(g, 1.0 / b.lam, levels[0])))
    values = []
    for n in levels:
        v = sum(_grid_sum(g, n, 1 if axi else n, scale) for g, scale, axi in parts) * vf
        values.append(np.asarray(v))
        if len(values) >= 2 and not exhaust:
            if np.all(np.abs(values[-1] - values[-2]) <= rtol * np.abs(values[-1]) + atol):
                break
    diff = np.abs(values[-1] - values[-2])
    gap = float(np.max(diff / np.maximum(np.abs(values[-1]), 1e-300)))
    converged = bool(np.all(diff <= rtol * np.abs(values[-1]) + atol))
    if not converged and raise_on_failure:
        raise QuadratureError(f"sphere quadrature gap {gap:.3g} above rtol={rtol}", partials=values[-2:])
    value = values[-1]
    if value.size == 1:
        value = value.reshape(()).item()
    return SphereQuadResult(value, tuple(values), tuple(levels[:len(values)]), gap, converged)


# --------------------------------------------------------------------------
# functional and interactions


def _pair_integrand(bubbles):
    def f(x):
        D = np.stack([delta_exact(b, x) for b in bubbles], axis=-1)
        return (D[:, :, None] * D[:, None, :] ** 3).reshape(x.shape[0], -1)
    return f


def interaction_table(bubbles: Sequence[Bubble], **kw) -> np.ndarray:
    """``T[i, j] = int delta_i delta_j^3`` (= ``<delta_i, delta_j>`` since ``L delta_j = delta_j^3``)."""
    p = len(bubbles)
    res = sphere_integral(_pair_integrand(bubbles), bubbles, **kw)
    return np.asarray(res.value).reshape(p, p)


def inner_product_bubbles(bi: Bubble, bj: Bubble, **kw) -> float:
    """``int delta_i delta_j^3`` over S^3."""
    return float(interaction_table([bi, bj], **kw)[0, 1])


def functional_J(cfg: BubbleConfiguration, K: CurvatureFunction, **kw) -> float:
    """``int u L u / (int K u^4)^(1/2)`` for ``u = sum alpha_i delta_i``."""
    N, D2 = _numerator_denominator(cfg, K, **kw)
    return N / np.sqrt(D2)


def _numerator_denominator(cfg, K, **kw):
    p = cfg.p
    a = cfg.alphas
    pair = _pair_integrand(cfg.bubbles)

    def f(x):
        D = np.stack([delta_exact(b, x) for b in cfg.bubbles], axis=-1)
        u = D @ a
        Kx = K.ambient(np.stack([x[:, 0].real, x[:, 0].imag, x[:, 1].real, x[:, 1].imag], axis=-1))
        return np.concatenate([pair(x), (Kx * u ** 4)[:, None]], axis=1)

    vals = np.asarray(sphere_integral(f, cfg.bubbles, **kw).value)
    T = vals[:p * p].reshape(p, p)
    return float(a @ T @ a), float(vals[-1])


@dataclass
class ExpansionReport:
    measured_J: float
    predicted_J: float
    leading: float
    gamma1: float
    beta1: float
    eps: dict
    inner_products: dict
    c_ij: dict
    rel_gap: float
    lams: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "lams": list(self.lams),
            "measured_J": self.measured_J,
            "predicted_J": self.predicted_J,
            "leading": self.leading,
            "gamma1": self.gamma1,
            "beta1": self.beta1,
            "eps": {k: v for k, v in sorted(self.eps.items())},
            "inner_products": {k: v for k, v in sorted(self.inner_products.items())},
            "c_ij": {k: v for k, v in sorted(self.c_ij.items())},
            "rel_gap": self.rel_gap,
        }


def verify_expansion(cfg: BubbleConfiguration, K: CurvatureFunction, **kw) -> ExpansionReport:
    """Compare J with the leading bracket using measured ``c_ij = <d_i, d_j> / eps_ij``."""
    S = constants_S_c2().S
    a = cfg.alphas
    Ka = np.array([K(b.center) for b in cfg.bubbles])
    gamma1 = S * float(np.sum(a ** 2))
    beta1 = S * float(np.sum(a ** 4 * Ka))
    leading = gamma1 / np.sqrt(beta1)
    p = cfg.p
    kw.setdefault("rtol", 1e-10)
    T = interaction_table(cfg.bubbles, **kw) if p > 1 else np.zeros((1, 1))
    eps, ips, cij = {}, {}, {}
    corr = 0.0
    for i, j in itertools.permutations(range(p), 2):
        key = f"{i},{j}"
        e = eps_ij(cfg.bubbles[i], cfg.bubbles[j])
        ip = 0.5 * (T[i, j] + T[j, i])
        eps[key], ips[key], cij[key] = e, float(ip), float(ip / e)
        corr += a[i] * a[j] * ip
    predicted = leading * (1.0 - corr / gamma1)
    measured = functional_J(cfg, K, **kw)
    return ExpansionReport(measured, float(predicted), float(leading), gamma1, beta1, eps, ips, cij,
                           float(abs(measured - predicted) / abs(predicted)), [b.lam for b in cfg.bubbles])


# --------------------------------------------------------------------------
# H profile and calibration summary


@dataclass(frozen=True)
class HProfile:
    lam: float
    radii: np.ndarray
    values: np.ndarray

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))


def sample_H_profile(lam: float, radii=None, center=(0.0, 1.0)) -> HProfile:
    """``H`` along the ``x``-axis of the chart at ``center``, indexed by gauge radius."""
    radii = np.geomspace(1e-3, 1e3, 121) if radii is None else np.asarray(radii, dtype=float)
    b = Bubble(SpherePoint(center), lam)
    P = np.stack([radii, np.zeros_like(radii), np.zeros_like(radii)], axis=1)
    return HProfile(float(lam), radii, np.asarray(H_field(b, chart_map(b.center, P))))


def profiles_csv(profiles: Sequence[HProfile]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["gauge_radius", "H", "lambda"])
    for prof in profiles:
        for r, v in zip(prof.radii, prof.values):
            w.writerow([repr(float(r)), repr(float(v)), repr(prof.lam)])
    return buf.getvalue()


def calibration_summary(levels: tuple = (32, 64, 128)) -> dict:
    """Every run-wide constant with the certificate it came from."""
    cert = c1_certificate()
    cst = constants_S_c2(tuple(levels))
    conv = convention()
    return {
        "c1": cert.c1,
        "c1_residual_analytic": cert.residual_analytic,
        "c1_residual_fd": cert.residual_fd,
        "c1_points": cert.n_points,
        "S": cst.S,
        "S_levels": list(cst.S_quad.levels),
        "S_gaps": list(cst.S_quad.gaps),
        "c2": cst.c2,
        "c2_levels": list(cst.c2_quad.levels),
        "c2_gaps": list(cst.c2_quad.gaps),
        "volume_factor": conv.volume_factor,
        "vectorfield_sign": conv.vectorfield_sign,
        "kappa": KAPPA,
        "quarter_R": quarter_webster_curvature(),
        "c0": fundamental_solution_constant(),
        "c_G": green_normalization(),
        "chart_distance_constant": chart_distance_constant(),
    }
