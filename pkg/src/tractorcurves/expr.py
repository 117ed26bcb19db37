"""Small arithmetic expression language for inline metric, scale and 2-form entries.

Grammar: numbers, ``x1 .. xn``, ``pi``, ``+ - * / ^`` (``**`` also accepted),
unary minus, parentheses and the functions ``sin cos exp sqrt``. Expressions are
parsed with :mod:`ast` and checked against a whitelist before evaluation.
"""

from __future__ import annotations

import ast
import math
import operator
import re
from typing import Callable

import numpy as np

from .errors import ConfigError

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}
FUNCTIONS = {"sin": math.sin, "cos": math.cos, "exp": math.exp, "sqrt": math.sqrt}
CONSTANTS = {"pi": math.pi}
_VAR = re.compile(r"x([1-9][0-9]*)$")


def _compile(node: ast.AST, dim: int) -> Callable[[np.ndarray], float]:
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        value = float(node.value)
        return lambda x: value
    if isinstance(node, ast.Name):
        if node.id in CONSTANTS:
            value = CONSTANTS[node.id]
            return lambda x: value
        m = _VAR.match(node.id)
        if m is None:
            raise ConfigError(f"unknown symbol {node.id!r}")
        i = int(m.group(1)) - 1
        if i >= dim:
            raise ConfigError(f"variable {node.id} exceeds dimension {dim}")
        return lambda x: float(x[i])
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        op = _BINOPS[type(node.op)]
        left, right = _compile(node.left, dim), _compile(node.right, dim)
        return lambda x: op(left(x), right(x))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
        op = _UNOPS[type(node.op)]
        inner = _compile(node.operand, dim)
        return lambda x: op(inner(x))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in FUNCTIONS:
        if len(node.args) != 1 or node.keywords:
            raise ConfigError(f"{node.func.id} takes exactly one argument")
        fn = FUNCTIONS[node.func.id]
        arg = _compile(node.args[0], dim)
        return lambda x: fn(arg(x))
    raise ConfigError(f"unsupported expression element: {ast.dump(node)}")


def parse_expression(text: str, dim: int) -> Callable[[np.ndarray], float]:
    """Compile ``text`` into a function of the chart point."""
    if not isinstance(text, str):
        if isinstance(text, (int, float)) and not isinstance(text, bool):
            value = float(text)
            return lambda x: value
        raise ConfigError(f"expected an expression string, got {type(text).__name__}")
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse {text!r}: {exc.msg}") from None
    fn = _compile(tree.body, dim)

    def evaluate(x):
        try:
            return fn(np.asarray(x, dtype=float))
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise ConfigError(f"evaluating {text!r} at {x}: {exc}") from None

    return evaluate


def parse_matrix(entries, dim: int, symmetric: bool = False, antisymmetric: bool = False) -> Callable[[np.ndarray], np.ndarray]:
    """Compile an n x n nested list of expressions into a matrix-valued function."""
    if len(entries) != dim or any(len(row) != dim for row in entries):
        raise ConfigError(f"expected a {dim}x{dim} matrix of expressions")
    cells = [[parse_expression(e, dim) for e in row] for row in entries]

    def matrix(x):
        M = np.array([[c(x) for c in row] for row in cells])
        if symmetric:
            return 0.5 * (M + M.T)
        if antisymmetric:
            return 0.5 * (M - M.T)
        return M

    return matrix
