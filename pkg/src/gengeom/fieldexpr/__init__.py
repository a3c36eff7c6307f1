"""Scalar field expressions with exact differentiation and delta-net primitives."""

from .calculus import differentiate, gradient
from .codegen import Bindings, CompiledExprs, compile_expr, evaluate
from .deltanet import DeltaNet, DeltaNetReport, validate_strict_delta_net
from .nodes import Expr
from .parser import parse, parse_folded
from .printer import to_text

__all__ = [
    "Bindings",
    "CompiledExprs",
    "DeltaNet",
    "DeltaNetReport",
    "Expr",
    "compile_expr",
    "differentiate",
    "evaluate",
    "gradient",
    "parse",
    "parse_folded",
    "to_text",
    "validate_strict_delta_net",
]
