"""Compile expression trees to Python functions.

Each distinct subtree is emitted once as a local temporary, so shared
subexpressions (common in Christoffel and curvature arrays) are evaluated
once per call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from ..errors import EvaluationError
from .nodes import EPS, Add, Call, Delta, Div, Expr, Heaviside, Mul, Neg, Num, Pos, Pow, Sub, Var


def _heaviside(a: float) -> float:
    if a > 0.0:
        return 1.0
    if a < 0.0:
        return 0.0
    return 0.5


def _pos(a: float) -> float:
    return a if a > 0.0 else 0.0


def _no_net(order, arg, eps):
    raise EvaluationError("expression uses delta but no delta net is active")


_GLOBALS = {
    "_sin": math.sin,
    "_cos": math.cos,
    "_exp": math.exp,
    "_log": math.log,
    "_sqrt": math.sqrt,
    "_tanh": math.tanh,
    "_pow": math.pow,
    "_H": _heaviside,
    "_P": _pos,
}


class CompiledExprs:
    """Callable evaluating several expressions at once.

    ``fn(values, eps, net)`` takes the variable values in the order of
    ``names`` and returns a tuple with one float per expression.
    """

    def __init__(self, exprs: Sequence[Expr], names: Sequence[str]):
        self.exprs = tuple(exprs)
        self.names = tuple(names)
        missing = set().union(*(e.free_vars for e in self.exprs)) - set(self.names) - {EPS}
        if missing:
            raise EvaluationError(f"unbound variables {sorted(missing)}", names=list(self.names))
        self.source = _generate(self.exprs, self.names)
        scope = dict(_GLOBALS)
        exec(compile(self.source, "<fieldexpr>", "exec"), scope)
        self._fn = scope["_f"]

    def __call__(self, values: Sequence[float], eps: float, net=None) -> tuple:
        d = net.value if net is not None else _no_net
        try:
            out = self._fn(values, eps, d)
        except EvaluationError as exc:
            exc.payload.update(self._snapshot(values, eps))
            raise
        except (ZeroDivisionError, ValueError, OverflowError) as exc:
            raise EvaluationError(f"evaluation failed: {exc}", **self._snapshot(values, eps)) from exc
        for v in out:
            if not math.isfinite(v):
                raise EvaluationError("non-finite result", **self._snapshot(values, eps))
        return out

    def _snapshot(self, values, eps) -> dict:
        return {"bindings": dict(zip(self.names, map(float, values))), "eps": eps}


def _generate(exprs: Sequence[Expr], names: Sequence[str]) -> str:
    local = {name: f"v_{name}" for name in names}
    lines = ["def _f(_vals, eps, _d):"]
    if names:
        lines.append("    " + ", ".join(local[name] for name in names) + (", " if len(names) == 1 else "") + " = _vals")
    temps: dict[Expr, str] = {}

    def ref(node: Expr) -> str:
        if isinstance(node, Num):
            return repr(node.value)
        if isinstance(node, Var):
            return "eps" if node.name == EPS else local[node.name]
        if node in temps:
            return temps[node]
        code = emit(node)
        name = f"t{len(temps)}"
        temps[node] = name
        lines.append(f"    {name} = {code}")
        return name

    def emit(node: Expr) -> str:
        match node:
            case Add(a, b):
                return f"{ref(a)} + {ref(b)}"
            case Sub(a, b):
                return f"{ref(a)} - {ref(b)}"
            case Mul(a, b):
                return f"{ref(a)} * {ref(b)}"
            case Div(a, b):
                return f"{ref(a)} / {ref(b)}"
            case Neg(a):
                return f"-{ref(a)}"
            case Pow(a, Num(v)) if v.is_integer() and abs(v) <= 64:
                return f"{ref(a)} ** {int(v)}"
            case Pow(a, b):
                return f"_pow({ref(a)}, {ref(b)})"
            case Call(f, a):
                return f"_{f}({ref(a)})"
            case Delta(k, a):
                return f"_d({k}, {ref(a)}, eps)"
            case Heaviside(a):
                return f"_H({ref(a)})"
            case Pos(a):
                return f"_P({ref(a)})"
        raise TypeError(node)

    results = [ref(e) for e in exprs]
    lines.append("    return (" + "".join(f"float({r})," for r in results) + ")")
    return "\n".join(lines) + "\n"


@dataclass
class Bindings:
    """Values for every free variable of an expression, plus the active ε and delta net."""

    values: Mapping[str, float] = field(default_factory=dict)
    eps: float = 1.0
    delta_net: object | None = None


def compile_expr(e: Expr, names: Sequence[str]) -> Callable:
    names = tuple(names)
    cache = e._cache
    if cache is None:
        cache = {}
        e._cache = cache
    fn = cache.get(names)
    if fn is None:
        fn = CompiledExprs([e], names)
        cache[names] = fn
    return fn


def evaluate(e: Expr, b: Bindings) -> float:
    """Evaluate ``e`` under the bindings ``b``.

    Raises :class:`EvaluationError` (with a snapshot of the bindings) on
    division by zero, logarithms of non-positive numbers, overflow and other
    non-finite results.
    """
    if not 0.0 < b.eps <= 1.0:
        raise EvaluationError("eps must lie in (0, 1]", eps=b.eps)
    names = tuple(sorted(e.free_vars - {EPS}))
    missing = [name for name in names if name not in b.values]
    if missing:
        raise EvaluationError(f"unbound variables {missing}", bindings=dict(b.values), eps=b.eps)
    fn = compile_expr(e, names)
    return fn([b.values[name] for name in names], b.eps, b.delta_net)[0]
