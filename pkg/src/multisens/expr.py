"""Arithmetic expressions over named inputs, used for config-declared components.

Only numeric literals, input names, ``+ - * / **``, unary minus and a small
set of numpy functions are accepted; anything else is a configuration
error.
"""
from __future__ import annotations

import ast

import numpy as np

from .errors import ConfigurationError

_FUNCS = {
    "exp": np.exp, "log": np.log, "sqrt": np.sqrt, "abs": np.abs, "sin": np.sin,
    "cos": np.cos, "tanh": np.tanh, "arctan": np.arctan,
}
_BINOPS = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
           ast.Div: np.divide, ast.Pow: np.power}


def _names(node):
    return sorted({n.id for n in ast.walk(node) if isinstance(n, ast.Name) and n.id not in _FUNCS})


class Expression:
    """Vectorised model ``(n, len(variables)) -> (n,)`` compiled from text."""

    def __init__(self, text: str, variables=None):
        self.text = text.strip()
        try:
            tree = ast.parse(self.text, mode="eval")
        except SyntaxError as exc:
            raise ConfigurationError(f"cannot parse expression {text!r}: {exc.msg}") from None
        self._check(tree.body)
        self._tree = tree.body
        used = _names(tree)
        if variables is None:
            variables = used
        missing = [v for v in used if v not in variables]
        if missing:
            raise ConfigurationError(f"expression {text!r} uses unknown inputs {missing}")
        self.variables = tuple(variables)
        self.used = tuple(used)
        self.dim = len(self.variables)

    def _check(self, node):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return
        if isinstance(node, ast.Name):
            return
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            self._check(node.left)
            self._check(node.right)
            return
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            self._check(node.operand)
            return
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS
                and len(node.args) == 1 and not node.keywords):
            self._check(node.args[0])
            return
        raise ConfigurationError(f"unsupported construct in expression {self.text!r}: {ast.dump(node)[:60]}")

    def _eval(self, node, env):
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            return env[node.id]
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            v = self._eval(node.operand, env)
            return -v if isinstance(node.op, ast.USub) else v
        return _FUNCS[node.func.id](self._eval(node.args[0], env))

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        env = {name: x[:, j] for j, name in enumerate(self.variables)}
        out = self._eval(self._tree, env)
        return np.broadcast_to(np.asarray(out, dtype=float), (x.shape[0],)).copy()

    def __repr__(self):
        return f"Expression({self.text!r})"
