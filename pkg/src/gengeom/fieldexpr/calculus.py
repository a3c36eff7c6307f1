"""Exact symbolic differentiation."""

from __future__ import annotations

from ..errors import DifferentiationError
from . import nodes as n
from .nodes import (
    MAX_DELTA_ORDER,
    Add,
    Call,
    Delta,
    Div,
    Expr,
    Heaviside,
    Mul,
    Neg,
    Num,
    Pos,
    Pow,
    Sub,
    Var,
)


def differentiate(e: Expr, var: str) -> Expr:
    """Partial derivative of ``e`` with respect to the variable ``var``.

    Subtrees that do not mention ``var`` differentiate to zero without being
    visited, so a ``delta2(u)`` can be differentiated in ``x``.  Raises
    :class:`DifferentiationError` when a delta net would need a third
    derivative or when a reference-only symbol (heaviside, pos) depends on
    ``var``.
    """
    memo: dict[int, Expr] = {}

    def d(node: Expr) -> Expr:
        if var not in node.free_vars:
            return n.ZERO
        key = id(node)
        if key in memo:
            return memo[key]
        out = _rule(node, d)
        memo[key] = out
        return out

    def _rule(node: Expr, d) -> Expr:
        match node:
            case Var():
                return n.ONE
            case Add(a, b):
                return n.add(d(a), d(b))
            case Sub(a, b):
                return n.sub(d(a), d(b))
            case Neg(a):
                return n.neg(d(a))
            case Mul(a, b):
                return n.add(n.mul(d(a), b), n.mul(a, d(b)))
            case Div(a, b):
                da, db = d(a), d(b)
                if db.is_zero:
                    return n.div(da, b)
                return n.div(n.sub(n.mul(da, b), n.mul(a, db)), n.power(b, n.num(2)))
            case Pow(a, b):
                if var not in b.free_vars:
                    exponent = n.sub(b, n.ONE)
                    return n.mul(n.mul(b, n.power(a, exponent)), d(a))
                if var not in a.free_vars:
                    return n.mul(n.mul(node, n.call("log", a)), d(b))
                inner = n.add(
                    n.mul(d(b), n.call("log", a)),
                    n.div(n.mul(b, d(a)), a),
                )
                return n.mul(node, inner)
            case Call(f, a):
                return n.mul(_outer(f, a, node), d(a))
            case Delta(k, a):
                if k >= MAX_DELTA_ORDER:
                    raise DifferentiationError(
                        f"delta net derivative of order {k + 1} exceeds the cap of {MAX_DELTA_ORDER}",
                        expression=str(node),
                        variable=var,
                    )
                return n.mul(n.delta(k + 1, a), d(a))
            case Heaviside() | Pos():
                raise DifferentiationError(
                    f"{type(node).__name__.lower()} is reference-only and cannot be differentiated",
                    expression=str(node),
                    variable=var,
                )
            case Num():
                return n.ZERO
        raise TypeError(node)

    return d(e)


def _outer(f: str, a: Expr, whole: Expr) -> Expr:
    if f == "sin":
        return n.call("cos", a)
    if f == "cos":
        return n.neg(n.call("sin", a))
    if f == "exp":
        return whole
    if f == "log":
        return n.div(n.ONE, a)
    if f == "sqrt":
        return n.div(n.ONE, n.mul(n.num(2), whole))
    if f == "tanh":
        return n.sub(n.ONE, n.power(whole, n.num(2)))
    raise ValueError(f)


def gradient(e: Expr, variables) -> list[Expr]:
    return [differentiate(e, v) for v in variables]
