"""Immutable expression trees for scalar fields.

Nodes hash structurally (the hash is computed once, at construction) so
that trees can be used as dict keys for common-subexpression elimination
during code generation.  Build trees through the lowercase constructors
(``add``, ``mul``, ...) which fold constants and apply the 0/1 identities;
the node classes themselves never simplify.
"""

from __future__ import annotations

import math

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "tanh")
DELTA_NAMES = ("delta", "delta1", "delta2")
MAX_DELTA_ORDER = 2
EPS = "eps"


class Expr:
    __slots__ = ("_hash", "_free", "_cache")

    children: tuple = ()

    def _key(self) -> tuple:
        raise NotImplementedError

    def _init(self) -> None:
        self._hash = hash((type(self).__name__,) + self._key())
        free = frozenset()
        for c in self.children:
            free |= c.free_vars
        self._free = free
        self._cache = None

    @property
    def free_vars(self) -> frozenset:
        return self._free

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, Expr) or type(other) is not type(self):
            return False
        if self._hash != other._hash:
            return False
        return self._key() == other._key()

    def __ne__(self, other: object) -> bool:
        return not self.__eq__(other)

    def __setattr__(self, name, value):
        if name in ("_hash", "_free", "_cache") or not hasattr(self, "_hash"):
            object.__setattr__(self, name, value)
        else:
            raise AttributeError("expressions are immutable")

    @property
    def is_zero(self) -> bool:
        return isinstance(self, Num) and self.value == 0.0

    @property
    def is_one(self) -> bool:
        return isinstance(self, Num) and self.value == 1.0

    def walk(self):
        """Yield every node, parents before children."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def __str__(self) -> str:
        from .printer import to_text

        return to_text(self)


class Num(Expr):
    __slots__ = ("value",)
    __match_args__ = ("value",)

    def __init__(self, value: float):
        self.value = float(value)
        self._init()

    def _key(self):
        return (self.value,)

    def __repr__(self):
        v = self.value
        return repr(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)


class Var(Expr):
    __slots__ = ("name",)
    __match_args__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self._init()
        self._free = frozenset((name,))

    def _key(self):
        return (self.name,)

    def __repr__(self):
        return self.name


class _Binary(Expr):
    __slots__ = ("left", "right")
    __match_args__ = ("left", "right")

    def __init__(self, left: Expr, right: Expr):
        self.left = left
        self.right = right
        self._init()

    @property
    def children(self):
        return (self.left, self.right)

    def _key(self):
        return (self.left, self.right)

    def __repr__(self):
        return f"{type(self).__name__}({self.left!r}, {self.right!r})"


class Add(_Binary):
    __slots__ = ()


class Sub(_Binary):
    __slots__ = ()


class Mul(_Binary):
    __slots__ = ()


class Div(_Binary):
    __slots__ = ()


class Pow(_Binary):
    __slots__ = ()


class _Unary(Expr):
    __slots__ = ("arg",)
    __match_args__ = ("arg",)

    def __init__(self, arg: Expr):
        self.arg = arg
        self._init()

    @property
    def children(self):
        return (self.arg,)

    def _key(self):
        return (self.arg,)

    def __repr__(self):
        return f"{type(self).__name__}({self.arg!r})"


class Neg(_Unary):
    __slots__ = ()


class Heaviside(_Unary):
    __slots__ = ()


class Pos(_Unary):
    __slots__ = ()


class Call(Expr):
    """Elementary function application: sin, cos, exp, log, sqrt, tanh."""

    __slots__ = ("func", "arg")
    __match_args__ = ("func", "arg")

    def __init__(self, func: str, arg: Expr):
        if func not in FUNCTIONS:
            raise ValueError(f"unknown function {func!r}")
        self.func = func
        self.arg = arg
        self._init()

    @property
    def children(self):
        return (self.arg,)

    def _key(self):
        return (self.func, self.arg)

    def __repr__(self):
        return f"{self.func.capitalize()}({self.arg!r})"


class Delta(Expr):
    """The active delta net (order 0) or its first/second derivative."""

    __slots__ = ("order", "arg")
    __match_args__ = ("order", "arg")

    def __init__(self, order: int, arg: Expr):
        if not 0 <= order <= MAX_DELTA_ORDER:
            raise ValueError(f"delta order {order} outside 0..{MAX_DELTA_ORDER}")
        self.order = order
        self.arg = arg
        self._init()

    @property
    def children(self):
        return (self.arg,)

    def _key(self):
        return (self.order, self.arg)

    def __repr__(self):
        name = "Delta" if self.order == 0 else f"Delta{self.order}"
        return f"{name}({self.arg!r})"


ZERO = Num(0.0)
ONE = Num(1.0)


def num(value: float) -> Num:
    value = float(value)
    if value == 0.0:
        return ZERO
    if value == 1.0:
        return ONE
    return Num(value)


def var(name: str) -> Var:
    return Var(name)


def _finite(value: float) -> bool:
    return isinstance(value, float) and math.isfinite(value)


def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and isinstance(b, Num):
        return num(a.value + b.value)
    if a.is_zero:
        return b
    if b.is_zero:
        return a
    if isinstance(b, Neg):
        return sub(a, b.arg)
    return Add(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and isinstance(b, Num):
        return num(a.value - b.value)
    if b.is_zero:
        return a
    if a.is_zero:
        return neg(b)
    if a == b:
        return ZERO
    if isinstance(b, Neg):
        return add(a, b.arg)
    return Sub(a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Num):
        return num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and isinstance(b, Num):
        return num(a.value * b.value)
    if a.is_zero or b.is_zero:
        return ZERO
    if a.is_one:
        return b
    if b.is_one:
        return a
    if isinstance(a, Num) and a.value == -1.0:
        return neg(b)
    if isinstance(b, Num) and b.value == -1.0:
        return neg(a)
    if isinstance(a, Neg) and isinstance(b, Neg):
        return mul(a.arg, b.arg)
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if a.is_zero and not b.is_zero:
        return ZERO
    if b.is_one:
        return a
    if isinstance(a, Num) and isinstance(b, Num) and b.value != 0.0:
        return num(a.value / b.value)
    return Div(a, b)


def power(a: Expr, b: Expr) -> Expr:
    if b.is_zero:
        return ONE
    if b.is_one:
        return a
    if a.is_one:
        return ONE
    if a.is_zero and isinstance(b, Num) and b.value > 0:
        return ZERO
    if isinstance(a, Num) and isinstance(b, Num):
        try:
            value = math.pow(a.value, b.value)
        except (ValueError, OverflowError):
            return Pow(a, b)
        if _finite(value):
            return num(value)
    return Pow(a, b)


_NUMERIC = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
    "tanh": math.tanh,
}


def call(func: str, a: Expr) -> Expr:
    if isinstance(a, Num):
        try:
            value = _NUMERIC[func](a.value)
        except (ValueError, OverflowError):
            return Call(func, a)
        if _finite(value):
            return num(value)
    return Call(func, a)


def delta(order: int, a: Expr) -> Expr:
    return Delta(order, a)


def heaviside(a: Expr) -> Expr:
    return Heaviside(a)


def pos(a: Expr) -> Expr:
    return Pos(a)


def total(terms) -> Expr:
    """Fold a sequence of expressions with ``add``."""
    out: Expr = ZERO
    for t in terms:
        out = add(out, t)
    return out


def is_singular(e: Expr) -> bool:
    return isinstance(e, (Delta, Heaviside, Pos))


def contains_delta(e: Expr) -> bool:
    return any(isinstance(n, Delta) for n in e.walk())


def contains_reference_only(e: Expr) -> bool:
    return any(isinstance(n, (Heaviside, Pos)) for n in e.walk())


def delta_arguments(e: Expr) -> list[Expr]:
    """Distinct argument expressions of all delta nodes in ``e``."""
    seen: dict[Expr, None] = {}
    for n in e.walk():
        if isinstance(n, Delta):
            seen.setdefault(n.arg, None)
    return list(seen)


def substitute(e: Expr, mapping: dict[str, Expr]) -> Expr:
    """Replace variables by expressions, rebuilding through the folding constructors."""
    memo: dict[int, Expr] = {}

    def go(node: Expr) -> Expr:
        key = id(node)
        if key in memo:
            return memo[key]
        match node:
            case Num():
                out = node
            case Var(name):
                out = mapping.get(name, node)
            case Add(a, b):
                out = add(go(a), go(b))
            case Sub(a, b):
                out = sub(go(a), go(b))
            case Mul(a, b):
                out = mul(go(a), go(b))
            case Div(a, b):
                out = div(go(a), go(b))
            case Pow(a, b):
                out = power(go(a), go(b))
            case Neg(a):
                out = neg(go(a))
            case Call(f, a):
                out = call(f, go(a))
            case Delta(k, a):
                out = delta(k, go(a))
            case Heaviside(a):
                out = heaviside(go(a))
            case Pos(a):
                out = pos(go(a))
            case _:
                raise TypeError(node)
        memo[key] = out
        return out

    return go(e)
