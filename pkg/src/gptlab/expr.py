"""A small arithmetic expression language over ``r`` and ``theta``.

Expressions use Python operator syntax with ``^`` accepted as power and
``θ`` as an alias of ``theta``. Allowed names are ``r``, ``theta``, ``x``,
``y``, ``pi``, ``e`` and the functions listed in :data:`FUNCTIONS`;
comparisons evaluate to 0/1 so indicators such as ``(r <= 0.5)`` work.
Nothing else (attributes, subscripts, calls to other names) is accepted.
"""

import ast
import operator

import numpy as np

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "tanh": np.tanh,
    "min": np.minimum,
    "max": np.maximum,
    "where": np.where,
}
CONSTANTS = {"pi": np.pi, "e": np.e}
VARIABLES = ("r", "theta", "x", "y")

_BINARY = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_COMPARE = {
    ast.Lt: operator.lt,
    ast.LtE: operator.le,
    ast.Gt: operator.gt,
    ast.GtE: operator.ge,
    ast.Eq: operator.eq,
    ast.NotEq: operator.ne,
}


class ExpressionError(ValueError):
    pass


def _check(node):
    if isinstance(node, ast.Expression):
        return _check(node.body)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ExpressionError(f"unsupported literal {node.value!r}")
    elif isinstance(node, ast.Name):
        if node.id not in VARIABLES and node.id not in CONSTANTS:
            raise ExpressionError(f"unknown name {node.id!r}")
    elif isinstance(node, ast.BinOp):
        if type(node.op) not in _BINARY:
            raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
        _check(node.left)
        _check(node.right)
    elif isinstance(node, ast.UnaryOp):
        if type(node.op) not in _UNARY:
            raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
        _check(node.operand)
    elif isinstance(node, ast.Compare):
        if any(type(op) not in _COMPARE for op in node.ops):
            raise ExpressionError("comparison not allowed")
        for sub in [node.left, *node.comparators]:
            _check(sub)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS or node.keywords:
            raise ExpressionError(f"call not allowed: {ast.unparse(node)}")
        for arg in node.args:
            _check(arg)
    else:
        raise ExpressionError(f"syntax not allowed: {type(node).__name__}")


def _eval(node, env):
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return env[node.id] if node.id in env else CONSTANTS[node.id]
    if isinstance(node, ast.BinOp):
        return _BINARY[type(node.op)](_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, ast.UnaryOp):
        return _UNARY[type(node.op)](_eval(node.operand, env))
    if isinstance(node, ast.Compare):
        left = _eval(node.left, env)
        out = True
        for op, comp in zip(node.ops, node.comparators):
            right = _eval(comp, env)
            out = np.logical_and(out, _COMPARE[type(op)](left, right))
            left = right
        return np.asarray(out, dtype=float)
    if isinstance(node, ast.Call):
        return FUNCTIONS[node.func.id](*[_eval(a, env) for a in node.args])
    raise ExpressionError(f"cannot evaluate {type(node).__name__}")


def _radial_thresholds(tree):
    """Constants ``c`` appearing in comparisons with ``r``: likely jump radii."""
    out = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.Compare):
            terms = [node.left, *node.comparators]
            if any(isinstance(t, ast.Name) and t.id == "r" for t in terms):
                out.update(float(t.value) for t in terms if isinstance(t, ast.Constant) and float(t.value) > 0)
    return out


class Expression:
    """Parsed expression, callable as ``expr(r, theta)``.

    >>> float(Expression("(r^2 + 3)/2")(1.0, 0.0))
    2.0
    """

    def __init__(self, text):
        if not isinstance(text, str) or not text.strip():
            raise ExpressionError("empty expression")
        self.text = text
        source = text.replace("^", "**").replace("θ", "theta")
        try:
            self._tree = ast.parse(source.strip(), mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from exc
        _check(self._tree)
        names = {n.id for n in ast.walk(self._tree) if isinstance(n, ast.Name)}
        self.is_radial = not names & {"theta", "x", "y"}
        self.breakpoints = tuple(sorted(_radial_thresholds(self._tree)))

    def __call__(self, r, theta=0.0):
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        env = {"r": r, "theta": theta, "x": r * np.cos(theta), "y": r * np.sin(theta)}
        with np.errstate(all="ignore"):
            out = _eval(self._tree.body, env)
        return np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(r, theta).shape)

    def __repr__(self):
        return f"Expression({self.text!r})"
