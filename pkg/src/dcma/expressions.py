"""Minimal arithmetic expression evaluator for config-driven problems.

Expressions use the variables x and y and the functions exp, abs, max, min,
sqrt and log, e.g. ``"(1 + x*x + y*y) * exp(x*x + y*y)"``.  Parsing goes
through the ast module with a strict node whitelist; nothing else is
evaluated.  Compiled expressions take an (n, 2) array of points and return
an (n,) array.
"""

from __future__ import annotations

import ast

import numpy as np

__all__ = ["ExpressionError", "compile_expression"]


class ExpressionError(ValueError):
    pass


_FUNCTIONS = {
    "exp": np.exp,
    "abs": np.abs,
    "sqrt": np.sqrt,
    "log": np.log,
    "max": lambda *a: np.maximum.reduce([np.asarray(t, dtype=float) for t in _bcast(a)]),
    "min": lambda *a: np.minimum.reduce([np.asarray(t, dtype=float) for t in _bcast(a)]),
}

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
    ast.Mod: np.mod,
}

_UNARYOPS = {ast.UAdd: lambda v: v, ast.USub: np.negative}


def _bcast(args):
    return np.broadcast_arrays(*[np.asarray(a, dtype=float) for a in args])


def _eval_node(node, env):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body, env)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, (int, float)):
            return float(node.value)
        raise ExpressionError(f"literal {node.value!r} is not a number")
    if isinstance(node, ast.Name):
        if node.id in env:
            return env[node.id]
        raise ExpressionError(f"unknown variable {node.id!r} (use x, y)")
    if isinstance(node, ast.BinOp):
        op = _BINOPS.get(type(node.op))
        if op is None:
            raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
        return op(_eval_node(node.left, env), _eval_node(node.right, env))
    if isinstance(node, ast.UnaryOp):
        op = _UNARYOPS.get(type(node.op))
        if op is None:
            raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
        return op(_eval_node(node.operand, env))
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS:
            raise ExpressionError("only exp, abs, sqrt, log, max, min calls are allowed")
        if node.keywords:
            raise ExpressionError("keyword arguments are not allowed")
        args = [_eval_node(a, env) for a in node.args]
        return _FUNCTIONS[node.func.id](*args)
    raise ExpressionError(f"syntax element {type(node).__name__} not allowed")


def compile_expression(text):
    """Compile an expression string into a callable on (n, 2) point arrays."""
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc}") from None
    # validate once on dummy data so config errors surface immediately
    probe = np.zeros((2, 2))
    _eval_node(tree, {"x": probe[:, 0], "y": probe[:, 1]})

    def fn(points):
        pts = np.asarray(points, dtype=float)
        vals = _eval_node(tree, {"x": pts[..., 0], "y": pts[..., 1]})
        return np.broadcast_to(np.asarray(vals, dtype=float), pts.shape[:-1]).copy()

    fn.expression = text
    return fn
