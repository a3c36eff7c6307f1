"""Recursive-descent parser for the field expression language.

Grammar (``^`` is right-associative and binds tighter than unary minus, so
``-x^2`` is ``-(x^2)`` and ``2^-1`` is ``2^(-1)``)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := number | ident | ident '(' expr ')' | '(' expr ')'
"""

from __future__ import annotations

import re

from ..errors import ParseError, ValidationError
from . import nodes as n
from .nodes import DELTA_NAMES, EPS, FUNCTIONS, Expr

RESERVED = frozenset((EPS, "heaviside", "pos") + DELTA_NAMES + FUNCTIONS)

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    text = text.replace("−", "-")
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos:].lstrip()[:1]!r}", text, pos)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.next()
        if text != value:
            found = "end of input" if kind == "end" else repr(text)
            raise ParseError(f"expected {value!r}, found {found}", self.text, pos)

    def parse(self) -> Expr:
        e = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {text!r}", self.text, pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.next()[1]
            rhs = self.term()
            e = n.Add(e, rhs) if op == "+" else n.Sub(e, rhs)
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.next()[1]
            rhs = self.unary()
            e = n.Mul(e, rhs) if op == "*" else n.Div(e, rhs)
        return e

    def unary(self) -> Expr:
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.next()
            arg = self.unary()
            if isinstance(arg, n.Num):
                return n.Num(-arg.value)
            return n.Neg(arg)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            self.next()
            return n.Pow(base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, text, pos = self.next()
        if kind == "num":
            return n.Num(float(text))
        if kind == "ident":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                self.next()
                arg = self.expr()
                self.expect(")")
                return self.apply(text, arg, pos)
            if text in RESERVED and text != EPS:
                raise ParseError(f"{text!r} is a function and needs an argument", self.text, pos)
            return n.Var(text)
        if text == "(":
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if kind == "end" else repr(text)
        raise ParseError(f"unexpected {found}", self.text, pos)

    def apply(self, name: str, arg: Expr, pos: int) -> Expr:
        if name in FUNCTIONS:
            return n.Call(name, arg)
        if name in DELTA_NAMES:
            if any(n.is_singular(node) for node in arg.walk()):
                raise ValidationError(
                    f"nested singular composition inside {name}(...)",
                    text=self.text,
                    position=pos,
                )
            return n.Delta(DELTA_NAMES.index(name), arg)
        if name == "heaviside":
            return n.Heaviside(arg)
        if name == "pos":
            return n.Pos(arg)
        raise ParseError(f"unknown function {name!r}", self.text, pos)


def parse(text: str) -> Expr:
    """Parse ``text`` into an expression tree.

    The tree mirrors the input literally (no folding), so ``parse("x^2 - y^2")``
    is ``Sub(Pow(x, 2), Pow(y, 2))``.  Unknown identifiers become variables.
    """
    if not text or not text.strip():
        raise ParseError("empty expression", text or "", 0)
    return _Parser(text).parse()


def parse_folded(text: str) -> Expr:
    """Parse and rebuild through the folding constructors."""
    return n.substitute(parse(text), {})
