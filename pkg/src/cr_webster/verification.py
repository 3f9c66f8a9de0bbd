"""Numerical checks of the bubble identities, Green normalization and expansion.

Each suite returns a :class:`Check` holding the measured values and a
pass/fail flag against its threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bubbles import (
    CUTOFF_RADIUS,
    Bubble,
    BubbleConfiguration,
    c1_certificate,
    constants_S_c2,
    H_field,
    delta_exact,
    eps_ij,
    functional_J,
    green_normalization,
    interaction_table,
    sample_H_profile,
    sphere_integral,
    verify_expansion,
)
from .cr_sphere import (
    GreenData,
    SpherePoint,
    constant_K,
    conformal_sublaplacian,
    greens_function,
    horizontal_laplacian,
    linear_K,
    quarter_webster_curvature,
    to_complex,
    to_real,
)
from .expression import parse_K
from .heisenberg import KAPPA
from .reduced_flow import alpha_equilibrium

GREEN_TEST_FUNCTIONS = ("1 + 0.5*x2 + 0.3*x1", "exp(0.4*x1 - 0.3*y2)", "x1^2 + 2*y1*x2 + 1.5")


@dataclass
class Check:
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "measured": self.measured}


def random_sphere_points(n: int, seed: int) -> np.ndarray:
    g = np.random.default_rng(seed).normal(size=(n, 4))
    return to_complex(g / np.linalg.norm(g, axis=1, keepdims=True))


def check_bubble_identity() -> Check:
    cert = c1_certificate()
    return Check("bubble_identity", cert.residual_analytic < 1e-8 and cert.residual_fd < 1e-4,
                 {"c1": cert.c1, "residual_analytic": cert.residual_analytic, "residual_fd": cert.residual_fd,
                  "points": cert.n_points})


def check_exact_bubble_pde(lam: float = 3.0, n: int = 500, seed: int = 0) -> Check:
    """``|L d - d^3| / d^3`` by chart finite differences at random points, near and far."""
    a = SpherePoint([0.6 + 0.2j, -0.3 + 0.7j])
    b = Bubble(a, lam)
    pts = random_sphere_points(n, seed)
    pts[: n // 10] = a.xi  # include the center
    u = lambda x: delta_exact(b, x)  # noqa: E731
    Lu = conformal_sublaplacian(u, pts, route="chart", h=1e-3 / lam)
    cube = u(pts) ** 3
    res = float(np.max(np.abs(Lu - cube) / cube))
    return Check("exact_bubble_pde", res < 1e-4, {"lam": lam, "points": n, "max_rel_residual": res})


def check_H_profile(lams=(10.0, 20.0, 40.0, 80.0)) -> Check:
    """``lam (d~ - d^)`` stays bounded, vanishes at the center and tends to the Green limit.

    The bound is the Green limit ``kappa c2 G`` on the cutoff region ``d >= r/2``.
    """
    profiles = [sample_H_profile(l) for l in lams]
    sups = [p.sup for p in profiles]
    a = SpherePoint([0, 1])
    at_center = [float(abs(p.values[0])) for p in profiles]
    green = GreenData(green_normalization())
    c2 = constants_S_c2().c2
    bound = KAPPA * c2 * green.c_G / (CUTOFF_RADIUS / 2) ** 2
    far = SpherePoint([0.6 + 0.3j, -0.2 + 0.7j])
    limit = KAPPA * c2 * float(greens_function(green, a.xi, far.xi))
    far_vals = [float(H_field(Bubble(a, l), far.xi)) for l in lams]
    far_err = [abs(v - limit) / limit for v in far_vals]
    ok = max(sups) <= bound and max(at_center) == 0.0 and all(np.diff(far_err) < 0)
    return Check("H_profile", ok, {"lams": list(lams), "sup": sups, "bound": bound, "H_at_center": at_center,
                                   "far_value": far_vals, "green_limit": limit, "far_rel_error": far_err})


def check_inner_products(lams=(10.0, 20.0, 40.0)) -> Check:
    S = constants_S_c2().S
    a1, a2 = SpherePoint([0.6 + 0.2j, -0.3 + 0.7j]), SpherePoint([-0.1j, 0.9 + 0.3j])
    ratios, asym, norms = [], [], []
    for lam in lams:
        b1, b2 = Bubble(a1, lam), Bubble(a2, lam)
        T = interaction_table([b1, b2], rtol=1e-9)
        asym.append(float(abs(T[0, 1] - T[1, 0]) / abs(T[0, 1])))
        ratios.append(float(T[0, 1] / eps_ij(b1, b2)))
        norms.append(float(abs(T[0, 0] - S) / S))
    stable = abs(ratios[-1] - ratios[-2]) < abs(ratios[1] - ratios[0]) or abs(ratios[-1] - ratios[-2]) < 1e-3 * ratios[-1]
    ok = max(asym) < 1e-6 and min(ratios) > 0 and max(norms) < 1e-6 and stable
    return Check("inner_products", ok, {"lams": list(lams), "c_ij": ratios, "asymmetry": asym,
                                        "self_norm_rel_error": norms})


def check_J_constancy(n: int = 5, seed: int = 1, K_const: float = 2.0) -> Check:
    rng = np.random.default_rng(seed)
    K = constant_K(K_const)
    pts = random_sphere_points(n, seed)
    lams = rng.uniform(1.0, 40.0, size=n)
    vals = [functional_J(BubbleConfiguration([1.0], [Bubble(SpherePoint(p), float(l))]), K, rtol=1e-10)
            for p, l in zip(pts, lams)]
    target = float(np.sqrt(constants_S_c2().S / K_const))
    spread = float((max(vals) - min(vals)) / np.mean(vals))
    err = float(max(abs(v - target) for v in vals) / target)
    return Check("J_constancy", spread < 1e-3 and err < 1e-3,
                 {"lams": [float(l) for l in lams], "J": vals, "target": target, "spread": spread,
                  "max_rel_error": err})


def expansion_gaps(lams=(20.0, 40.0)) -> list:
    """Balanced pair at the antipodal critical points of ``2 + x2``."""
    K = linear_K(2.0, [0.0, 0.0, 1.0, 0.0])
    a, b = SpherePoint([0, 1]), SpherePoint([0, -1])
    alpha = alpha_equilibrium([K(a), K(b)])
    return [verify_expansion(BubbleConfiguration(alpha, [Bubble(a, l), Bubble(b, l)]), K) for l in lams]


def check_expansion(lams=(20.0, 40.0)) -> Check:
    reps = expansion_gaps(lams)
    gaps = [r.rel_gap for r in reps]
    return Check("expansion_direction", bool(all(np.diff(gaps) < 0)),
                 {"lams": list(lams), "gaps": gaps, "reports": [r.as_dict() for r in reps]})


def green_reproduction(expr: str, a: SpherePoint, levels=(16, 32, 64)) -> tuple:
    """``int G(a, .) L u`` over S^3 against ``u(a)``; returns ``(integral, u(a), rel_error)``."""
    u = parse_K(expr, check_samples=0)
    green = GreenData(green_normalization())
    qR = quarter_webster_curvature()

    def f(x):
        Lu = -horizontal_laplacian(u, x) + qR * u.ambient(to_real(x))
        return greens_function(green, a.xi, x) * Lu

    val = float(sphere_integral(f, [Bubble(a, 1.0)], levels=levels, exhaust=True).value)
    ua = u(a.xi)
    return val, ua, abs(val - ua) / abs(ua)


GREEN_BASE_POINTS = ((0.3 + 0.1j, 0.8 - 0.2j), (1.0, 0.0), (-0.5j, 0.5 + 0.2j))


def check_green(levels=(16, 32, 64)) -> Check:
    errs = []
    for expr in GREEN_TEST_FUNCTIONS:
        for p in GREEN_BASE_POINTS:
            errs.append(green_reproduction(expr, SpherePoint(p), levels)[2])
    return Check("green_reproduction", max(errs) < 1e-3, {"c_G": green_normalization(), "rel_errors": errs})


SUITES = {
    "bubble_identity": check_bubble_identity,
    "exact_bubble_pde": check_exact_bubble_pde,
    "H_profile": check_H_profile,
    "inner_products": check_inner_products,
    "J_constancy": check_J_constancy,
    "expansion_direction": check_expansion,
    "green_reproduction": check_green,
}


def run_suites(names=None) -> list:
    return [SUITES[n]() for n in (names or SUITES)]
