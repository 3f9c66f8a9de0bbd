"""The standard CR sphere S^3 in C^2.

Sphere points are complex arrays of shape ``(..., 2)``; curvature candidates
are evaluated on the real ambient coordinates ``(x1, y1, x2, y2)``.

Sign conventions used here:

* :func:`sphere_sublaplacian` is the positive operator, the one appearing in
  ``L = Delta + R/4`` and in the bubble equation;
* :func:`sublaplacian_K_at` and :func:`horizontal_laplacian` return the
  horizontal Laplacian ``(X^2 + Y^2) K`` (negative at a nondegenerate maximum),
  which is the quantity entering the K+ margin and the interaction matrix.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.stats import norm, qmc

from .errors import (
    C0ViolationError,
    CoverageWarning,
    InputError,
    PreconditionError,
    SingularityError,
)
from .heisenberg import KAPPA, PROFILE, cayley, cayley_inv, sublaplacian_H

E2 = np.array([0.0, 1.0], dtype=complex)


@dataclass(eq=False)
class SpherePoint:
    xi: np.ndarray

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=complex).reshape(2)
        n = np.sqrt(np.sum(np.abs(xi) ** 2))
        if not np.isfinite(n) or n == 0:
            raise InputError(f"cannot normalize {xi!r} onto the sphere")
        self.xi = xi / n

    @classmethod
    def from_real(cls, v) -> "SpherePoint":
        v = np.asarray(v, dtype=float)
        return cls(np.array([v[0] + 1j * v[1], v[2] + 1j * v[3]]))

    @property
    def real(self) -> np.ndarray:
        return to_real(self.xi)

    def __repr__(self):
        a, b = self.xi
        return f"SpherePoint(({a:.6g}, {b:.6g}))"


def as_xi(x) -> np.ndarray:
    return np.asarray(x.xi if isinstance(x, SpherePoint) else x, dtype=complex)


def to_real(xi) -> np.ndarray:
    xi = as_xi(xi)
    return np.stack([xi[..., 0].real, xi[..., 0].imag, xi[..., 1].real, xi[..., 1].imag], axis=-1)


def to_complex(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return np.stack([X[..., 0] + 1j * X[..., 1], X[..., 2] + 1j * X[..., 3]], axis=-1)


def hermitian(xi, eta):
    return np.sum(as_xi(xi) * np.conj(as_xi(eta)), axis=-1)


def cr_distance(xi, eta):
    """``(2 |1 - <xi, eta>|)^(1/2)``; behaves like twice the gauge norm near the diagonal."""
    d = np.sqrt(2.0 * np.abs(1.0 - hermitian(xi, eta)))
    return float(d) if np.ndim(d) == 0 else d


def recentering_unitary(a, phase: float = 0.0) -> np.ndarray:
    """A unitary of C^2 sending ``a`` to the chart center ``(0, 1)``.

    ``phase`` composes with ``diag(e^{i phase}, 1)``, which fixes ``(0, 1)``;
    distinct phases give distinct charts at the same point.
    """
    a1, a2 = as_xi(a)
    U = np.array([[a2, -a1], [np.conj(a1), np.conj(a2)]])
    if phase:
        U = np.diag([np.exp(1j * phase), 1.0]) @ U
    return U


def chart_map(a, P, phase: float = 0.0) -> np.ndarray:
    """Sphere points ``U^* cayley(P)`` of the Cayley chart centered at ``a``."""
    U = recentering_unitary(a, phase)
    return cayley(P) @ np.conj(U)


def chart_inverse(a, x, phase: float = 0.0) -> np.ndarray:
    U = recentering_unitary(a, phase)
    return cayley_inv(as_xi(x) @ U.T)


def tangent_frame(xi) -> np.ndarray:
    """Orthonormal tangent frame ``(N, 4, 3)``: two horizontal vectors then the Reeb direction."""
    xi = np.atleast_2d(as_xi(xi))
    h1 = np.stack([-np.conj(xi[:, 1]), np.conj(xi[:, 0])], axis=-1)
    cols = [to_real(h1), to_real(1j * h1), to_real(1j * xi)]
    return np.stack(cols, axis=-1)


def exp_map(X, V) -> np.ndarray:
    """Great-circle exponential map in real coordinates (``V`` tangent at ``X``)."""
    n = np.linalg.norm(V, axis=-1, keepdims=True)
    safe = np.where(n > 0, n, 1.0)
    out = np.cos(n) * X + np.sin(n) * V / safe
    return out / np.linalg.norm(out, axis=-1, keepdims=True)


def sphere_samples(n: int, seed: int = 0) -> np.ndarray:
    """Quasi-random, approximately uniform points on S^3 as real ``(n, 4)``."""
    u = qmc.Halton(d=4, scramble=True, seed=seed).random(n)
    g = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


class CurvatureFunction:
    """A positive candidate curvature K on S^3.

    ``evaluator`` maps real ambient coordinates ``(N, 4)`` to ``(N,)``.  The
    optional ``grad``/``hess`` give ambient derivatives ``(N, 4)`` and
    ``(N, 4, 4)``; without them tangent derivatives are taken by finite
    differences along great circles.
    """

    def __init__(self, evaluator: Callable, grad: Callable | None = None, hess: Callable | None = None,
                 descriptor: str = "", *, check_samples: int = 10_000, seed: int = 0):
        self.evaluator = evaluator
        self.grad = grad
        self.hess = hess
        self.descriptor = descriptor
        if check_samples:
            X = sphere_samples(check_samples, seed)
            vals = self.ambient(X)
            bad = np.flatnonzero(~(vals > 0))
            if bad.size:
                i = bad[0]
                raise InputError(f"K = {descriptor or '<callable>'} is not positive on S^3: "
                                 f"K{tuple(round(float(v), 6) for v in X[i])} = {vals[i]:.6g}")

    @property
    def analytic(self) -> bool:
        return self.grad is not None and self.hess is not None

    def ambient(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.asarray(self.evaluator(np.atleast_2d(X)), dtype=float)
        return np.broadcast_to(out, np.atleast_2d(X).shape[:-1]).copy()

    def __call__(self, xi):
        X = to_real(xi)
        v = self.ambient(X)
        return float(v[0]) if X.ndim == 1 else v


def constant_K(c: float) -> CurvatureFunction:
    c = float(c)
    return CurvatureFunction(lambda X: np.full(X.shape[0], c), lambda X: np.zeros_like(X),
                             lambda X: np.zeros(X.shape + (4,)), f"{c!r}")


def quadratic_K(c: float, b=None, Q=None) -> CurvatureFunction:
    """``c + b . X + X^T Q X`` in ambient real coordinates (Q symmetrized)."""
    b = np.zeros(4) if b is None else np.asarray(b, dtype=float)
    Q = np.zeros((4, 4)) if Q is None else np.asarray(Q, dtype=float)
    Q = 0.5 * (Q + Q.T)
    desc = f"quadratic(c={c!r}, b={b.tolist()!r}, Q={Q.tolist()!r})"
    return CurvatureFunction(
        lambda X: c + X @ b + np.einsum("ni,ij,nj->n", X, Q, X),
        lambda X: b + 2.0 * X @ Q,
        lambda X: np.broadcast_to(2.0 * Q, (X.shape[0], 4, 4)),
        desc,
    )


def linear_K(c: float, b) -> CurvatureFunction:
    return quadratic_K(c, b, None)


FAMILIES = {"constant": constant_K, "linear": linear_K, "quadratic": quadratic_K}


def riemannian_derivatives(K: CurvatureFunction, X, *, h_grad: float = 1e-3, h_hess: float = 1e-4):
    """Gradient ``(N, 3)`` and Hessian ``(N, 3, 3)`` in :func:`tangent_frame` coordinates.

    Uses the round metric.  Finite-difference fallback works on
    ``v -> K(exp_X(B v))``, whose derivatives at 0 are the Riemannian ones.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    B = tangent_frame(to_complex(X))
    if K.analytic:
        gA = np.asarray(K.grad(X), dtype=float)
        HA = np.asarray(K.hess(X), dtype=float)
        radial = np.einsum("ni,ni->n", X, gA)
        g = np.einsum("nia,ni->na", B, gA)
        H = np.einsum("nia,nij,njb->nab", B, HA, B) - radial[:, None, None] * np.eye(3)
        return g, H

    N = X.shape[0]

    def along(V):
        return K.ambient(exp_map(X, np.einsum("nia,na->ni", B, V)))

    E = np.eye(3)
    g = np.empty((N, 3))
    for a in range(3):
        e = np.broadcast_to(E[a], (N, 3))
        h = h_grad
        g[:, a] = (-along(2 * h * e) + 8 * along(h * e) - 8 * along(-h * e) + along(-2 * h * e)) / (12 * h)
    H = np.empty((N, 3, 3))
    h = h_hess
    f0 = along(np.zeros((N, 3)))
    for a in range(3):
        ea = np.broadcast_to(E[a], (N, 3))
        H[:, a, a] = (along(h * ea) - 2 * f0 + along(-h * ea)) / (h * h)
        for b in range(a + 1, 3):
            eb = np.broadcast_to(E[b], (N, 3))
            v = (along(h * (ea + eb)) - along(h * (ea - eb)) - along(h * (eb - ea)) + along(-h * (ea + eb)))
            H[:, a, b] = H[:, b, a] = v / (4 * h * h)
    return g, H


def horizontal_laplacian(K: CurvatureFunction, xi, **kw):
    """``(X^2 + Y^2) K`` in sphere normalization: ``4 tr_H Hess K / kappa^2``.

    Chart-free route through the round Hessian restricted to the complex
    tangent plane; valid at every point.
    """
    X = to_real(np.atleast_2d(as_xi(xi)))
    _, H = riemannian_derivatives(K, X, **kw)
    out = 4.0 * (H[:, 0, 0] + H[:, 1, 1]) / KAPPA ** 2
    return float(out[0]) if np.ndim(as_xi(xi)) == 1 else out


def quarter_webster_curvature() -> float:
    """``R/4 = L(1)`` of the sphere contact form: ``Delta0 u_C (0) / kappa^2``."""
    return sublaplacian_H(PROFILE, np.zeros(3)) / KAPPA ** 2


def _chart_second_sum(u: Callable, a, phase: float, h: float) -> float:
    """``(f_xx + f_yy)(0)`` for ``f = u o chart_a`` with a fourth-order stencil."""
    steps = np.array([-2, -1, 0, 1, 2], dtype=float) * h
    coef = np.array([-1, 16, -30, 16, -1], dtype=float) / (12 * h * h)
    P = np.zeros((10, 3))
    P[:5, 0] = steps
    P[5:, 1] = steps
    vals = np.asarray(u(chart_map(a, P, phase)), dtype=float)
    return float(coef @ vals[:5] + coef @ vals[5:])


def sphere_sublaplacian(u: Callable, xi, *, route: str = "chart", h: float = 1e-3,
                        grad: Callable | None = None, hess: Callable | None = None):
    """Positive sphere sublaplacian ``Delta u`` at each point of ``xi``.

    ``route="chart"``: pull ``u`` back through the Cayley chart centered at the
    point (``u`` takes complex sphere arrays) and use
    ``Delta u(x) = -(f_xx + f_yy)(0) / kappa^2``.
    ``route="ambient"``: ``u``, ``grad``, ``hess`` act on real ambient
    coordinates and ``Delta u = -4 tr_H Hess u / kappa^2``.
    """
    pts = np.atleast_2d(as_xi(xi))
    if route == "chart":
        out = np.array([-_chart_second_sum(u, p, 0.0, h) for p in pts]) / KAPPA ** 2
    elif route == "ambient":
        K = CurvatureFunction(u, grad, hess, check_samples=0)
        out = -horizontal_laplacian(K, pts)
        out = np.atleast_1d(out)
    else:
        raise ValueError(f"unknown route {route!r}")
    return float(out[0]) if np.ndim(as_xi(xi)) == 1 else out


def conformal_sublaplacian(u: Callable, xi, **kw):
    """``L u = Delta u + (R/4) u`` on the sphere."""
    pts = np.atleast_2d(as_xi(xi))
    route = kw.get("route", "chart")
    uvals = u(to_real(pts)) if route == "ambient" else u(pts)
    out = np.atleast_1d(sphere_sublaplacian(u, pts, **kw)) + quarter_webster_curvature() * np.asarray(uvals)
    return float(out[0]) if np.ndim(as_xi(xi)) == 1 else out


# --------------------------------------------------------------------------
# critical points


@dataclass
class CriticalPointRecord:
    location: SpherePoint
    k_value: float
    grad_norm: float
    hessian_eigs: tuple
    morse_index: int
    sublap_K: float
    a_value: float
    kplus_member: bool
    kplus_margin: float
    degenerate: bool = False
    label: str = ""

    def as_dict(self) -> dict:
        xi = self.location.xi
        return {
            "label": self.label,
            "location": [float(xi[0].real), float(xi[0].imag), float(xi[1].real), float(xi[1].imag)],
            "k_value": self.k_value,
            "grad_norm": self.grad_norm,
            "hessian_eigs": list(self.hessian_eigs),
            "morse_index": self.morse_index,
            "sublap_K": self.sublap_K,
            "a_value": self.a_value,
            "kplus_margin": self.kplus_margin,
            "kplus_member": self.kplus_member,
            "degenerate": self.degenerate,
        }


@dataclass(frozen=True)
class CriticalSearchConfig:
    starts: int = 200
    grad_tol: float = 1e-10
    dedup_radius: float = 1e-5
    degeneracy_tol: float = 1e-6
    max_iter: int = 60
    max_step: float = 0.5
    seed: int = 0


def kplus_margin(k_value: float, sublap_K: float, a_value: float) -> float:
    return -sublap_K / (3.0 * k_value) - 2.0 * a_value


def _newton_step(g, H, max_step):
    lam, V = np.linalg.eigh(H)
    scale = np.max(np.abs(lam), axis=1, keepdims=True)
    floor = np.maximum(1e-12 * scale, 1e-14)
    lam = np.where(np.abs(lam) < floor, np.where(lam < 0, -floor, floor), lam)
    coeff = np.einsum("nia,ni->na", V, g) / lam
    eta = -np.einsum("nia,na->ni", V, coeff)
    n = np.linalg.norm(eta, axis=1, keepdims=True)
    return eta * np.minimum(1.0, max_step / np.maximum(n, 1e-300))


def _newton(K, X, cfg):
    X = X.copy()
    active = np.ones(X.shape[0], dtype=bool)
    converged = np.zeros(X.shape[0], dtype=bool)
    for _ in range(cfg.max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        g, H = riemannian_derivatives(K, X[idx])
        gn = np.linalg.norm(g, axis=1)
        done = gn < cfg.grad_tol
        converged[idx[done]] = True
        active[idx[done]] = False
        keep = ~done
        if not np.any(keep):
            break
        idx, g, H = idx[keep], g[keep], H[keep]
        eta = _newton_step(g, H, cfg.max_step)
        B = tangent_frame(to_complex(X[idx]))
        X[idx] = exp_map(X[idx], np.einsum("nia,na->ni", B, eta))
    return X, converged


def _polish(K, X, cfg, steps: int = 2):
    for _ in range(steps):
        if X.shape[0] == 0:
            break
        g, H = riemannian_derivatives(K, X)
        eta = _newton_step(g, H, cfg.max_step)
        B = tangent_frame(to_complex(X))
        Y = exp_map(X, np.einsum("nia,na->ni", B, eta))
        g2, _ = riemannian_derivatives(K, Y)
        better = np.linalg.norm(g2, axis=1) <= np.linalg.norm(g, axis=1)
        X = np.where(better[:, None], Y, X)
    return X


def find_critical_points(K: CurvatureFunction, cfg: CriticalSearchConfig | None = None, *,
                         a_value: Callable | None = None) -> list:
    """Multistart Riemannian Newton search for the critical points of K.

    Returns deduplicated records sorted by decreasing K value, labelled
    ``y0, y1, ...``.  ``a_value`` maps a :class:`SpherePoint` to its regular
    part A (identically 0 on the model sphere).
    """
    cfg = cfg or CriticalSearchConfig()
    starts = sphere_samples(cfg.starts, cfg.seed)
    X, ok = _newton(K, starts, cfg)
    X = X[ok]
    X = _polish(K, X, cfg)
    if X.shape[0] == 0:
        warnings.warn("Newton search found no critical points", CoverageWarning, stacklevel=2)
        return []
    g, H = riemannian_derivatives(K, X)
    gn = np.linalg.norm(g, axis=1)
    order = np.lexsort((np.round(X, 12).T[::-1].tolist() + [gn]))
    # chordal distance: cr_distance is square-root sensitive to Reeb-direction residuals
    kept: list[int] = []
    for i in order:
        if all(np.linalg.norm(X[i] - X[j]) >= cfg.dedup_radius for j in kept):
            kept.append(i)

    records = []
    for i in kept:
        loc = SpherePoint.from_real(X[i])
        eigs = np.linalg.eigvalsh(H[i])
        top = np.max(np.abs(eigs))
        degenerate = bool(top < 1e-12 or np.min(np.abs(eigs)) < cfg.degeneracy_tol * top)
        kv = float(K.ambient(X[i][None])[0])
        lap = sublaplacian_K_at(K, loc, grad_tol=None) if not degenerate else float("nan")
        A = float(a_value(loc)) if a_value is not None else 0.0
        margin = kplus_margin(kv, lap, A) if not degenerate else float("nan")
        records.append(CriticalPointRecord(
            location=loc, k_value=kv, grad_norm=float(gn[i]), hessian_eigs=tuple(float(e) for e in eigs),
            morse_index=int(np.sum(eigs < 0)), sublap_K=lap, a_value=A,
            kplus_member=bool(margin > 0), kplus_margin=margin, degenerate=degenerate))

    records.sort(key=lambda r: (-r.k_value, tuple(np.round(r.location.real, 9))))
    for n, r in enumerate(records):
        r.label = f"y{n}"
    bad = [r for r in records if r.degenerate]
    if bad:
        shown = ", ".join(repr(r.location) for r in bad[:3]) + (f" and {len(bad) - 3} more" if len(bad) > 3 else "")
        raise C0ViolationError(f"{len(bad)} degenerate critical point(s) of K: {shown}", bad)
    if len(records) < 2:
        warnings.warn(f"only {len(records)} critical point(s) found; a Morse function on S^3 has at least 2",
                      CoverageWarning, stacklevel=2)
    return records


def sublaplacian_K_at(K: CurvatureFunction, y, *, phase: float = 0.0, h: float = 1e-3,
                      grad_tol: float | None = 1e-6) -> float:
    """Horizontal Laplacian of K at a critical point via the Cayley chart.

    ``y`` is re-centered to the chart center and K pulled back to H^1; since
    the chart's conformal factor is critical at the center, the sphere value
    is ``(f_xx + f_yy)(0) / kappa^2`` with ``f = K o chart``.
    """
    loc = y.location if isinstance(y, CriticalPointRecord) else y
    xi = as_xi(loc)
    if grad_tol is not None:
        g, _ = riemannian_derivatives(K, to_real(xi)[None])
        gn = float(np.linalg.norm(g))
        if gn > grad_tol * max(1.0, abs(K(xi))):
            raise PreconditionError(f"sublaplacian_K_at needs a critical point; |grad K| = {gn:.3g}")
    return _chart_second_sum(lambda x: K.ambient(to_real(x)), xi, phase, h) / KAPPA ** 2


# --------------------------------------------------------------------------
# Green's function


@dataclass(frozen=True)
class GreenData:
    c_G: float
    a_values: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if not self.c_G > 0:
            raise InputError("Green normalization c_G must be positive")

    def regular_part(self, label) -> float:
        return float(self.a_values.get(label, 0.0))


def greens_function(g: GreenData, a, x, *, tol: float = 1e-12):
    """``c_G / (2 |1 - <x, a>|) = c_G / d(a, x)^2``."""
    den = 2.0 * np.abs(1.0 - hermitian(x, a))
    if np.any(den < tol):
        raise SingularityError("Green's function evaluated on the diagonal")
    out = g.c_G / den
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class C0Verdict:
    passed: bool
    violations: list

    def as_dict(self):
        return {"passed": self.passed, "violations": list(self.violations)}


def check_C0(records: Sequence[CriticalPointRecord], margin_tol: float = 1e-8) -> C0Verdict:
    if not records:
        return C0Verdict(False, ["no critical points"])
    violations = []
    for r in records:
        name = r.label or repr(r.location)
        if r.degenerate:
            violations.append(f"{name}: degenerate critical point")
        elif not abs(r.kplus_margin) > margin_tol:
            violations.append(f"{name}: K+ margin {r.kplus_margin:.3g} within {margin_tol:g} of zero")
    return C0Verdict(not violations, violations)
