"""Interaction matrices, F1 enumeration and the Euler-Hopf existence tests.

Tuples are unordered: ``M`` and the index are permutation invariant, so each
configuration of distinct points is counted once.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import yaml

from .errors import (
    C0ViolationError,
    C1ViolationError,
    CapExceededError,
    IncompleteInputError,
    InputError,
    InternalConsistencyError,
    PreconditionError,
)

SCHEMA_VERSION = "1.0"
MANIFOLD_DIM = 3
TUPLE_CONVENTION = "unordered"


@dataclass(frozen=True)
class PointData:
    label: str
    K: float
    lapK: float
    A: float
    morse: int

    @property
    def margin(self) -> float:
        return -self.lapK / (3.0 * self.K) - 2.0 * self.A


def _pair_key(a: str, b: str) -> tuple:
    return (a, b) if a <= b else (b, a)


def _tuple_key(labels) -> tuple:
    return tuple(sorted(labels))


@dataclass
class AbstractCriticalData:
    """Critical-point data with no geometric origin required.

    ``pairs`` maps sorted label pairs to ``G(y_i, y_j)``; ``mu`` maps
    ``(sorted labels, k)`` to an intersection number in ``{0, 1}``.
    """

    points: list
    pairs: dict
    mu: dict = field(default_factory=dict)

    def __post_init__(self):
        labels = [p.label for p in self.points]
        if len(set(labels)) != len(labels):
            raise InputError("point labels must be unique")
        for p in self.points:
            if not (math.isfinite(p.K) and p.K > 0):
                raise InputError(f"{p.label}: K must be positive, got {p.K}")
            if not (math.isfinite(p.lapK) and math.isfinite(p.A)):
                raise InputError(f"{p.label}: lapK and A must be finite")
            if p.morse not in range(MANIFOLD_DIM + 1):
                raise InputError(f"{p.label}: morse index {p.morse} outside 0..{MANIFOLD_DIM}")
        for a, b in itertools.combinations(labels, 2):
            g = self.pairs.get(_pair_key(a, b))
            if g is None:
                raise InputError(f"missing G value for pair ({a}, {b})")
            if not (math.isfinite(g) and g > 0):
                raise InputError(f"G({a}, {b}) must be positive, got {g}")
        for key, v in self.mu.items():
            if v not in (0, 1):
                raise InputError(f"intersection number for {key} must be 0 or 1, got {v}")

    @property
    def by_label(self) -> dict:
        return {p.label: p for p in self.points}

    def G(self, a: str, b: str) -> float:
        return self.pairs[_pair_key(a, b)]

    @classmethod
    def from_dict(cls, doc: Mapping) -> "AbstractCriticalData":
        try:
            points = [PointData(str(d["label"]), float(d["K"]), float(d["lapK"]), float(d.get("A", 0.0)),
                                int(d["morse"])) for d in doc["points"]]
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"malformed points table: {e}") from None
        pairs: dict = {}
        for row in doc.get("pairs") or []:
            try:
                a, b, g = str(row[0]), str(row[1]), float(row[2])
            except (IndexError, TypeError, ValueError) as e:
                raise InputError(f"malformed pair row {row!r}: {e}") from None
            if a == b:
                raise InputError(f"pair row {row!r} repeats a label")
            key = _pair_key(a, b)
            if key in pairs and pairs[key] != g:
                raise InputError(f"asymmetric G table at ({a}, {b})")
            pairs[key] = g
        mu = {}
        for row in doc.get("mu") or []:
            try:
                mu[(_tuple_key(map(str, row["tuple"])), int(row["k"]))] = int(row["value"])
            except (KeyError, TypeError, ValueError) as e:
                raise InputError(f"malformed mu row {row!r}: {e}") from None
        known = {p.label for p in points}
        for a, b in pairs:
            if a not in known or b not in known:
                raise InputError(f"pair ({a}, {b}) names an unknown point")
        return cls(points, pairs, mu)

    def to_dict(self) -> dict:
        doc = {
            "points": [{"label": p.label, "K": p.K, "lapK": p.lapK, "A": p.A, "morse": p.morse}
                       for p in self.points],
            "pairs": [[a, b, g] for (a, b), g in sorted(self.pairs.items())],
        }
        if self.mu:
            doc["mu"] = [{"tuple": list(t), "k": k, "value": v} for (t, k), v in sorted(self.mu.items())]
        return doc

    @classmethod
    def load(cls, path) -> "AbstractCriticalData":
        try:
            with open(path, encoding="utf-8") as fh:
                doc = yaml.safe_load(fh)
        except (OSError, yaml.YAMLError) as e:
            raise InputError(f"cannot read abstract data {path}: {e}") from None
        if not isinstance(doc, Mapping) or "points" not in doc:
            raise InputError(f"{path}: expected a mapping with a 'points' table")
        return cls.from_dict(doc)

    def dump(self, path=None) -> str:
        text = yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        return text


def from_records(records, green) -> AbstractCriticalData:
    """Abstract twin of a geometric critical-point list."""
    from .cr_sphere import greens_function

    points = [PointData(r.label, r.k_value, r.sublap_K, r.a_value, r.morse_index) for r in records]
    pairs = {}
    for r, s in itertools.combinations(records, 2):
        pairs[_pair_key(r.label, s.label)] = float(greens_function(green, r.location, s.location))
    return AbstractCriticalData(points, pairs)


# --------------------------------------------------------------------------
# K+ and interaction matrices


def k_plus_filter(data: AbstractCriticalData, tol: float = 1e-8) -> list:
    """Labels with positive margin ``-lapK / 3K - 2A``."""
    out = []
    for p in data.points:
        m = p.margin
        if abs(m) <= tol:
            raise C0ViolationError(f"{p.label}: K+ margin {m:.3g} is within {tol:g} of zero", [p])
        if m > 0:
            out.append(p.label)
    return out


@dataclass(frozen=True)
class InteractionMatrix:
    matrix: np.ndarray
    labels: tuple

    @property
    def p(self) -> int:
        return len(self.labels)


def build_matrix(data: AbstractCriticalData, labels: Sequence[str]) -> InteractionMatrix:
    labels = tuple(labels)
    if len(set(labels)) != len(labels):
        raise PreconditionError(f"tuple {labels} repeats a point")
    pts = data.by_label
    try:
        P = [pts[l] for l in labels]
    except KeyError as e:
        raise PreconditionError(f"unknown label {e.args[0]!r}") from None
    p = len(P)
    M = np.empty((p, p))
    for i, a in enumerate(P):
        M[i, i] = -a.lapK / (3.0 * a.K ** 2) - 2.0 * a.A / a.K
        for j in range(i + 1, p):
            b = P[j]
            M[i, j] = M[j, i] = -2.0 * data.G(a.label, b.label) / math.sqrt(a.K * b.K)
    return InteractionMatrix(M, labels)


def jacobi_eigenvalues(A, *, tol: float = 1e-15, max_sweeps: int = 64) -> np.ndarray:
    """Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations, ascending."""
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if n == 1:
        return A.reshape(1).copy()
    for _ in range(max_sweeps):
        off = math.sqrt(float(np.sum(np.triu(A, 1) ** 2)))
        if off <= tol * max(float(np.linalg.norm(A)), 1e-300):
            break
        for i in range(n - 1):
            for j in range(i + 1, n):
                aij = A[i, j]
                if aij == 0.0:
                    continue
                theta = (A[j, j] - A[i, i]) / (2.0 * aij)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                Ai, Aj = A[:, i].copy(), A[:, j].copy()
                A[:, i], A[:, j] = c * Ai - s * Aj, s * Ai + c * Aj
                Ri, Rj = A[i, :].copy(), A[j, :].copy()
                A[i, :], A[j, :] = c * Ri - s * Rj, s * Ri + c * Rj
                A[i, j] = A[j, i] = 0.0
    return np.sort(np.diag(A))


def least_eigenvalue(m) -> float:
    M = m.matrix if isinstance(m, InteractionMatrix) else np.asarray(m, dtype=float)
    if np.max(np.abs(M - M.T), initial=0.0) > 1e-12:
        raise InternalConsistencyError("interaction matrix is not symmetric")
    return float(jacobi_eigenvalues(M)[0])


def c1_tolerance(M: np.ndarray, rel: float = 1e-8) -> float:
    return rel * max(float(np.max(np.abs(M))), 1.0)


# --------------------------------------------------------------------------
# F1 and indices


def index_iota(morse: Sequence[int]) -> int:
    morse = list(morse)
    if not morse:
        raise PreconditionError("empty tuple has no index")
    return len(morse) - 1 + sum(MANIFOLD_DIM - m for m in morse)


@dataclass(frozen=True)
class TupleVerdict:
    labels: tuple
    rho: float | None
    in_F1: bool
    iota: int
    pruned: bool = False
    rho_upper: float | None = None

    def as_dict(self) -> dict:
        return {"labels": list(self.labels), "rho": self.rho, "in_F1": self.in_F1, "iota": self.iota,
                "pruned": self.pruned, "rho_upper": self.rho_upper}


def enumerate_F1(data: AbstractCriticalData, *, cap: int = 20, rel_tol: float = 1e-8,
                 kplus: Sequence[str] | None = None, prune: bool = True) -> list:
    """A verdict for every nonempty subset of K+, in increasing size.

    With ``prune``, a subset is only diagonalized when all its maximal proper
    subsets are in F1; otherwise interlacing bounds its least eigenvalue by
    theirs and it is recorded as pruned.
    """
    labels = list(k_plus_filter(data) if kplus is None else kplus)
    if len(labels) > cap:
        raise CapExceededError(f"|K+| = {len(labels)} exceeds the enumeration cap {cap}")
    pts = data.by_label
    verdicts: dict = {}
    out = []
    for size in range(1, len(labels) + 1):
        for combo in itertools.combinations(labels, size):
            iota = index_iota([pts[l].morse for l in combo])
            parents = [verdicts[sub] for sub in itertools.combinations(combo, size - 1)] if size > 1 else []
            if prune and any(not v.in_F1 for v in parents):
                bounds = [v.rho if v.rho is not None else v.rho_upper for v in parents if not v.in_F1]
                v = TupleVerdict(combo, None, False, iota, True, min(bounds))
            else:
                m = build_matrix(data, combo)
                rho = least_eigenvalue(m)
                if abs(rho) < c1_tolerance(m.matrix, rel_tol):
                    raise C1ViolationError(f"least eigenvalue {rho:.3g} of M{combo} is indistinguishable from 0",
                                           combo, rho)
                v = TupleVerdict(combo, rho, rho > 0, iota)
            verdicts[combo] = v
            out.append(v)
    return out


def f1_members(verdicts) -> list:
    return [v for v in verdicts if v.in_F1]


def l_sharp(F1) -> int:
    """Largest index in F1, ``-1`` when F1 is empty."""
    return max((v.iota for v in F1 if v.in_F1), default=-1)


def euler_hopf_sums(F1) -> dict:
    """``S_k = sum over F1 with iota <= k - 1 of (-1)^iota`` for ``k = 0 .. l# + 1``."""
    members = [v for v in F1 if v.in_F1]
    top = l_sharp(members) + 1
    return {k: sum((-1) ** v.iota for v in members if v.iota <= k - 1) for k in range(0, top + 1)}


# --------------------------------------------------------------------------
# verdicts


@dataclass(frozen=True)
class KVerdict:
    k: int
    S_k: int
    sum_condition: bool
    index_tuples: tuple
    gap_condition: bool | None
    admissible: bool | None

    def as_dict(self) -> dict:
        return {"k": self.k, "S_k": self.S_k, "sum_condition": self.sum_condition,
                "index_k_tuples": [list(t) for t in self.index_tuples],
                "gap_condition": self.gap_condition, "admissible": self.admissible}


@dataclass
class CriterionReport:
    test: str
    l_sharp: int
    sums: dict
    per_k: list
    minimal_k: int | None
    exists: bool
    morse_bound: int | None
    multiplicity_bound: int | None
    F1: list
    undetermined_k: list = field(default_factory=list)

    @property
    def conclusion(self) -> str:
        if not self.exists:
            return "inconclusive"
        return f"exists; morse <= {self.morse_bound}; count >= {self.multiplicity_bound}"

    def as_dict(self) -> dict:
        return {
            "test": self.test,
            "tuple_convention": TUPLE_CONVENTION,
            "l_sharp": self.l_sharp,
            "sums": {str(k): v for k, v in sorted(self.sums.items())},
            "per_k": [v.as_dict() for v in self.per_k],
            "undetermined_k": list(self.undetermined_k),
            "minimal_k": self.minimal_k,
            "exists": self.exists,
            "morse_bound": self.morse_bound,
            "multiplicity_bound": self.multiplicity_bound,
            "conclusion": self.conclusion,
            "F1": [{"labels": list(v.labels), "rho": v.rho, "iota": v.iota} for v in self.F1],
        }


def _scan(F1, gap_rule, test: str) -> CriterionReport:
    members = [v for v in F1 if v.in_F1]
    sums = euler_hopf_sums(members)
    per_k, undetermined = [], []
    minimal = None
    for k, S in sums.items():
        at_k = tuple(v.labels for v in members if v.iota == k)
        cond1 = S != 1
        cond2 = gap_rule(k, at_k) if cond1 else None
        if cond1 and cond2 is None:
            undetermined.append(k)
        adm = (cond1 and cond2) if cond2 is not None else (False if not cond1 else None)
        per_k.append(KVerdict(k, S, cond1, at_k, cond2, adm))
        if adm and minimal is None:
            minimal = k
    exists = minimal is not None
    return CriterionReport(
        test, l_sharp(members), sums, per_k, minimal, exists,
        minimal if exists else None, abs(1 - sums[minimal]) if exists else None, members, undetermined)


def check_theorem_main(F1) -> CriterionReport:
    """Scan ``k``: admissible when ``S_k != 1`` and no F1 tuple has index exactly ``k``."""
    return _scan(F1, lambda k, at_k: not at_k, "index_gap")


def check_theorem_general(F1, mu: Mapping | None = None, *, strict: bool = False) -> CriterionReport:
    """As :func:`check_theorem_main` with the index gap replaced by vanishing ``mu_k``.

    ``mu`` maps ``(sorted labels, k)`` to 0 or 1.  A ``k`` whose sum
    condition holds but whose index-``k`` tuples lack ``mu`` entries is left
    undetermined; this only raises when no other ``k`` decides existence, or
    always with ``strict``.
    """
    mu = dict(mu or {})
    missing: dict = {}

    def rule(k, at_k):
        vals = []
        for t in at_k:
            key = (_tuple_key(t), k)
            if key not in mu:
                missing.setdefault(k, []).append(t)
                continue
            vals.append(mu[key])
        if k in missing:
            if any(v != 0 for v in vals):
                return False
            return None
        return all(v == 0 for v in vals)

    rep = _scan(F1, rule, "intersection_number")
    if missing and (strict or not rep.exists):
        k = min(missing)
        raise IncompleteInputError(f"missing intersection number mu_{k} for tuple(s) {missing[k]}")
    return rep


@dataclass(frozen=True)
class CorollaryVerdict:
    total: int
    exists: bool
    multiplicity_bound: int | None

    def as_dict(self) -> dict:
        return {"total": self.total, "exists": self.exists, "multiplicity_bound": self.multiplicity_bound}


def check_corollary(F1) -> CorollaryVerdict:
    """Total-sum test over all of F1."""
    total = sum((-1) ** v.iota for v in F1 if v.in_F1)
    exists = total != 1
    return CorollaryVerdict(total, exists, abs(1 - total) if exists else None)


@dataclass
class CriterionRun:
    kplus: list
    verdicts: list
    main: CriterionReport
    corollary: CorollaryVerdict
    general: CriterionReport | None = None

    def as_dict(self) -> dict:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "tuple_convention": TUPLE_CONVENTION,
            "kplus": list(self.kplus),
            "tuples": [v.as_dict() for v in self.verdicts],
            "main": self.main.as_dict(),
            "corollary": self.corollary.as_dict(),
        }
        if self.general is not None:
            doc["general"] = self.general.as_dict()
        return doc


def run_criterion(data: AbstractCriticalData, *, cap: int = 20, rel_tol: float = 1e-8,
                  margin_tol: float = 1e-8, use_mu: bool | None = None) -> CriterionRun:
    """K+ filter, enumeration and all three tests; ``mu`` is used when present."""
    kplus = k_plus_filter(data, margin_tol)
    verdicts = enumerate_F1(data, cap=cap, rel_tol=rel_tol, kplus=kplus)
    F1 = f1_members(verdicts)
    main = check_theorem_main(F1)
    general = None
    if use_mu or (use_mu is None and data.mu):
        general = check_theorem_general(F1, data.mu)
    return CriterionRun(kplus, verdicts, main, check_corollary(F1), general)
