"""Render expression trees back to parseable text."""

from __future__ import annotations

from .nodes import Add, Call, Delta, Div, Expr, Heaviside, Mul, Neg, Num, Pos, Pow, Sub, Var

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}
_ATOM = 5


def _prec(e: Expr) -> int:
    if isinstance(e, Num) and e.value < 0:
        return 3
    return _PREC.get(type(e), _ATOM)


def _fmt_num(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def to_text(e: Expr) -> str:
    match e:
        case Num(v):
            return _fmt_num(v)
        case Var(name):
            return name
        case Neg(a):
            return "-" + _wrap(a, 3, strict=True)
        case Pow(a, b):
            # right-associative; the base binds tighter than unary minus
            return _wrap(a, 4, strict=True) + "^" + _wrap(b, 3)
        case Add(a, b):
            return _wrap(a, 1) + " + " + _wrap(b, 1, strict=True)
        case Sub(a, b):
            return _wrap(a, 1) + " - " + _wrap(b, 1, strict=True)
        case Mul(a, b):
            return _wrap(a, 2) + "*" + _wrap(b, 2, strict=True)
        case Div(a, b):
            return _wrap(a, 2) + "/" + _wrap(b, 2, strict=True)
        case Call(f, a):
            return f"{f}({to_text(a)})"
        case Delta(k, a):
            return ("delta" if k == 0 else f"delta{k}") + f"({to_text(a)})"
        case Heaviside(a):
            return f"heaviside({to_text(a)})"
        case Pos(a):
            return f"pos({to_text(a)})"
    raise TypeError(e)


def _wrap(e: Expr, prec: int, strict: bool = False) -> str:
    p = _prec(e)
    text = to_text(e)
    if strict and prec <= 2 and p == 3:
        return f"({text})"
    if p < prec or (strict and p == prec and p != _ATOM):
        return f"({text})"
    return text
