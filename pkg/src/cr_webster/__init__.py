"""Prescribed Webster curvature on the CR sphere: critical points at infinity and existence tests."""

__version__ = "0.1.0"

from .cr_sphere import (  # noqa: E402
    CriticalPointRecord,
    CurvatureFunction,
    GreenData,
    SpherePoint,
    check_C0,
    cr_distance,
    find_critical_points,
    greens_function,
    sublaplacian_K_at,
)
from .criterion import (  # noqa: E402
    AbstractCriticalData,
    build_matrix,
    check_corollary,
    check_theorem_general,
    check_theorem_main,
    enumerate_F1,
    euler_hopf_sums,
    index_iota,
    k_plus_filter,
    least_eigenvalue,
)
from .expression import parse_K  # noqa: E402
from .heisenberg import HPoint, cayley, cayley_inv, gauge_norm, group_translate, sublaplacian_H  # noqa: E402

__all__ = [
    "AbstractCriticalData", "CriticalPointRecord", "CurvatureFunction", "GreenData", "HPoint", "SpherePoint",
    "build_matrix", "cayley", "cayley_inv", "check_C0", "check_corollary", "check_theorem_general",
    "check_theorem_main", "cr_distance", "enumerate_F1", "euler_hopf_sums", "find_critical_points",
    "gauge_norm", "greens_function", "group_translate", "index_iota", "k_plus_filter", "least_eigenvalue",
    "parse_K", "sublaplacian_H", "sublaplacian_K_at",
]
