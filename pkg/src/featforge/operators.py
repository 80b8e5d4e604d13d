"""The 14-operation algebra with domain guards and provenance expression trees.

Every generated feature carries a FeatureExpr over original column names, so
any column in any output can be re-derived from the raw dataset.  Guards keep
every operation total on finite inputs: log uses ln(|v| + 1e-6), sqrt uses
sqrt(|v|), denominators are floored at 1e-6 in magnitude, and tangent/exp
outputs are clipped to +-1e12.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

GUARD_EPS = 1e-6
CLIP_BOUND = 1e12


class OperationKind(enum.Enum):
    SQRT = "sqrt"
    SQUARE = "square"
    COSINE = "cos"
    SINE = "sin"
    TANGENT = "tan"
    EXP = "exp"
    CUBE = "cube"
    LOG = "log"
    RECIPROCAL = "reciprocal"
    SIGMOID = "sigmoid"
    PLUS = "+"
    SUBTRACT = "-"
    MULTIPLY = "*"
    DIVIDE = "/"

    @property
    def is_unary(self) -> bool:
        return self in _UNARY

    @property
    def is_binary(self) -> bool:
        return self in _BINARY


_UNARY = frozenset(
    {
        OperationKind.SQRT,
        OperationKind.SQUARE,
        OperationKind.COSINE,
        OperationKind.SINE,
        OperationKind.TANGENT,
        OperationKind.EXP,
        OperationKind.CUBE,
        OperationKind.LOG,
        OperationKind.RECIPROCAL,
        OperationKind.SIGMOID,
    }
)
_BINARY = frozenset(
    {
        OperationKind.PLUS,
        OperationKind.SUBTRACT,
        OperationKind.MULTIPLY,
        OperationKind.DIVIDE,
    }
)

ALL_OPERATIONS: tuple[OperationKind, ...] = (
    OperationKind.SQRT,
    OperationKind.SQUARE,
    OperationKind.COSINE,
    OperationKind.SINE,
    OperationKind.TANGENT,
    OperationKind.EXP,
    OperationKind.CUBE,
    OperationKind.LOG,
    OperationKind.RECIPROCAL,
    OperationKind.SIGMOID,
    OperationKind.PLUS,
    OperationKind.SUBTRACT,
    OperationKind.MULTIPLY,
    OperationKind.DIVIDE,
)

COMMUTATIVE = frozenset({OperationKind.PLUS, OperationKind.MULTIPLY})


def _guard_denominator(v: np.ndarray) -> np.ndarray:
    sign = np.where(v < 0, -1.0, 1.0)  # g(0) = +1e-6
    return sign * np.maximum(np.abs(v), GUARD_EPS)


def _finalize(v: np.ndarray) -> np.ndarray:
    v = np.nan_to_num(v, nan=0.0, posinf=CLIP_BOUND, neginf=-CLIP_BOUND)
    return np.clip(v, -CLIP_BOUND, CLIP_BOUND)


def apply_unary(op: OperationKind, x) -> np.ndarray:
    if not op.is_unary:
        raise ValueError(f"{op} is not a unary operation")
    x = np.asarray(x, dtype=float)
    # overflow/invalid intermediates are deliberate: _finalize clips them
    with np.errstate(over="ignore", invalid="ignore"):
        if op is OperationKind.SQRT:
            out = np.sqrt(np.abs(x))
        elif op is OperationKind.SQUARE:
            out = x * x
        elif op is OperationKind.COSINE:
            out = np.cos(x)
        elif op is OperationKind.SINE:
            out = np.sin(x)
        elif op is OperationKind.TANGENT:
            out = np.tan(x)
        elif op is OperationKind.EXP:
            out = np.exp(np.clip(x, -700, 700))
        elif op is OperationKind.CUBE:
            out = x * x * x
        elif op is OperationKind.LOG:
            out = np.log(np.abs(x) + GUARD_EPS)
        elif op is OperationKind.RECIPROCAL:
            out = 1.0 / _guard_denominator(x)
        else:  # sigmoid
            out = 1.0 / (1.0 + np.exp(-np.clip(x, -700, 700)))
    return _finalize(out)


def apply_binary(op: OperationKind, x, y) -> np.ndarray:
    if not op.is_binary:
        raise ValueError(f"{op} is not a binary operation")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("operand length mismatch")
    with np.errstate(over="ignore", invalid="ignore"):
        if op is OperationKind.PLUS:
            out = x + y
        elif op is OperationKind.SUBTRACT:
            out = x - y
        elif op is OperationKind.MULTIPLY:
            out = x * y
        else:  # divide
            out = x / _guard_denominator(y)
    return _finalize(out)


@dataclass(frozen=True)
class FeatureExpr:
    """Provenance tree: leaf(original name) | unary(op, child) | binary(op, l, r)."""

    op: OperationKind | None
    name: str | None = None
    left: "FeatureExpr | None" = None
    right: "FeatureExpr | None" = None

    @staticmethod
    def leaf(name: str) -> "FeatureExpr":
        return FeatureExpr(op=None, name=name)

    @staticmethod
    def unary(op: OperationKind, child: "FeatureExpr") -> "FeatureExpr":
        if not op.is_unary:
            raise ValueError(f"{op} is not unary")
        return FeatureExpr(op=op, left=child)

    @staticmethod
    def binary(op: OperationKind, left: "FeatureExpr", right: "FeatureExpr") -> "FeatureExpr":
        if not op.is_binary:
            raise ValueError(f"{op} is not binary")
        return FeatureExpr(op=op, left=left, right=right)

    @property
    def is_leaf(self) -> bool:
        return self.op is None

    @property
    def depth(self) -> int:
        if self.is_leaf:
            return 0
        if self.op in _UNARY:
            return 1 + self.left.depth
        return 1 + max(self.left.depth, self.right.depth)


def expr_to_string(e: FeatureExpr) -> str:
    """Canonical fully-parenthesized rendering; injective over distinct trees."""
    if e.is_leaf:
        return e.name
    if e.op.is_unary:
        name = {
            OperationKind.SQRT: "sqrt",
            OperationKind.SQUARE: "square",
            OperationKind.COSINE: "cos",
            OperationKind.SINE: "sin",
            OperationKind.TANGENT: "tan",
            OperationKind.EXP: "exp",
            OperationKind.CUBE: "cube",
            OperationKind.LOG: "log",
            OperationKind.RECIPROCAL: "reciprocal",
            OperationKind.SIGMOID: "sigmoid",
        }[e.op]
        return f"{name}({expr_to_string(e.left)})"
    return f"({expr_to_string(e.left)}{e.op.value}{expr_to_string(e.right)})"


def evaluate_expr(e: FeatureExpr, original) -> np.ndarray:
    """Re-derive a feature column from the original dataset's columns.

    ``original`` is a Dataset or any object with .samples and .feature_names.
    """
    name_to_col = {name: i for i, name in enumerate(original.feature_names)}

    def rec(node: FeatureExpr) -> np.ndarray:
        if node.is_leaf:
            if node.name not in name_to_col:
                raise KeyError(f"unknown original feature {node.name!r}")
            return np.asarray(original.samples[:, name_to_col[node.name]], dtype=float)
        if node.op.is_unary:
            return apply_unary(node.op, rec(node.left))
        return apply_binary(node.op, rec(node.left), rec(node.right))

    return rec(e)


_UNARY_NAMES = {
    "sqrt": OperationKind.SQRT,
    "square": OperationKind.SQUARE,
    "cos": OperationKind.COSINE,
    "sin": OperationKind.SINE,
    "tan": OperationKind.TANGENT,
    "exp": OperationKind.EXP,
    "cube": OperationKind.CUBE,
    "log": OperationKind.LOG,
    "reciprocal": OperationKind.RECIPROCAL,
    "sigmoid": OperationKind.SIGMOID,
}
_BINARY_SYMBOLS = {
    "+": OperationKind.PLUS,
    "-": OperationKind.SUBTRACT,
    "*": OperationKind.MULTIPLY,
    "/": OperationKind.DIVIDE,
}


def parse_expression(text: str) -> FeatureExpr:
    """Inverse of :func:`expr_to_string` for canonical renderings."""
    text = text.strip()
    if text.startswith("("):
        if not text.endswith(")"):
            raise ValueError(f"unbalanced parentheses in {text!r}")
        inner = text[1:-1]
        depth = 0
        for i, ch in enumerate(inner):
            if ch == "(":
                depth += 1
            elif ch == ")":
                depth -= 1
            elif depth == 0 and ch in _BINARY_SYMBOLS and i > 0:
                left = parse_expression(inner[:i])
                right = parse_expression(inner[i + 1 :])
                return FeatureExpr.binary(_BINARY_SYMBOLS[ch], left, right)
        raise ValueError(f"no top-level binary operator in {text!r}")
    if text.endswith(")"):
        head, _, rest = text.partition("(")
        if head in _UNARY_NAMES:
            return FeatureExpr.unary(_UNARY_NAMES[head], parse_expression(rest[:-1]))
        raise ValueError(f"unknown unary operation {head!r}")
    return FeatureExpr.leaf(text)


def make_binary_expr(op: OperationKind, left: FeatureExpr, right: FeatureExpr) -> FeatureExpr:
    """Binary expr with commutative operands ordered by rendered string.

    Keeps "(a*b)" and "(b*a)" from coexisting as distinct features.
    """
    if op in COMMUTATIVE and expr_to_string(left) > expr_to_string(right):
        left, right = right, left
    return FeatureExpr.binary(op, left, right)
