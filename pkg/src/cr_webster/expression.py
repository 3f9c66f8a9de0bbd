"""Parse curvature expressions over ``x1, y1, x2, y2``.

The grammar is Python arithmetic with ``^`` accepted for powers, numeric
constants, ``pi``, ``e`` and the functions exp, log, sin, cos, sqrt.
Derivatives come from exact differentiation of the parsed tree.
"""

from __future__ import annotations

import ast

import numpy as np
import sympy as sp

from .cr_sphere import CurvatureFunction
from .errors import ExpressionError

VARIABLES = ("x1", "y1", "x2", "y2")
_SYMBOLS = sp.symbols(VARIABLES, real=True)
_NAMES = dict(zip(VARIABLES, _SYMBOLS)) | {"pi": sp.pi, "e": sp.E}
_FUNCS = {"exp": sp.exp, "log": sp.log, "sin": sp.sin, "cos": sp.cos, "sqrt": sp.sqrt}
_BINOPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
    ast.Pow: lambda a, b: a ** b,
}


def _build(node, pos):
    if isinstance(node, ast.Expression):
        return _build(node.body, pos)
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_build(node.left, pos), _build(node.right, pos))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _build(node.operand, pos)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ExpressionError(f"unsupported constant {node.value!r}", pos(node))
        return sp.Float(node.value) if isinstance(node.value, float) else sp.Integer(node.value)
    if isinstance(node, ast.Name):
        if node.id not in _NAMES:
            raise ExpressionError(f"unknown name {node.id!r}; variables are {', '.join(VARIABLES)}", pos(node))
        return _NAMES[node.id]
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
            raise ExpressionError(f"unsupported function; allowed: {', '.join(_FUNCS)}", pos(node))
        if len(node.args) != 1 or node.keywords:
            raise ExpressionError(f"{node.func.id} takes exactly one argument", pos(node))
        return _FUNCS[node.func.id](_build(node.args[0], pos))
    raise ExpressionError(f"unsupported syntax {type(node).__name__}", pos(node))


def parse_expression(text: str) -> sp.Expr:
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("empty expression", 1)
    # '^' means power; map positions in the rewritten text back to the input
    lead = len(text) - len(text.lstrip())
    body = text.strip()
    src = body.replace("^", "**")
    carets = [i for i, c in enumerate(body) if c == "^"]

    def original(offset):
        return lead + offset - sum(1 for j, c in enumerate(carets) if c + j < offset)

    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as e:
        raise ExpressionError(f"syntax error: {e.msg}", original((e.offset or 1) - 1) + 1) from None
    return _build(tree, lambda node: original(getattr(node, "col_offset", 0)) + 1)


def _vectorize(expr):
    f = sp.lambdify(_SYMBOLS, expr, modules="numpy")

    def ev(X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        with np.errstate(all="ignore"):
            v = f(*X.T)
        return np.broadcast_to(np.asarray(v, dtype=float), X.shape[:1]).copy()
    return ev


def parse_K(text: str, *, check_samples: int = 10_000, seed: int = 0) -> CurvatureFunction:
    """Curvature function with exact ambient gradient and Hessian."""
    expr = parse_expression(text)
    value = _vectorize(expr)
    grads = [_vectorize(sp.diff(expr, s)) for s in _SYMBOLS]
    hess = [[_vectorize(sp.diff(expr, s, t)) for t in _SYMBOLS] for s in _SYMBOLS]

    def grad(X):
        return np.stack([g(X) for g in grads], axis=-1)

    def hessian(X):
        return np.stack([np.stack([h(X) for h in row], axis=-1) for row in hess], axis=-2)

    return CurvatureFunction(value, grad, hessian, text.strip(), check_samples=check_samples, seed=seed)
