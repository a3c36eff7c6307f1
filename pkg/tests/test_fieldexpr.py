import math

import numpy as np
import pytest
from scipy import integrate, optimize

from conftest import bump_constant
from gengeom.asymptotics import make_epsilon_grid
from gengeom.errors import DifferentiationError, EvaluationError, ParseError, ValidationError
from gengeom.fieldexpr import Bindings, DeltaNet, differentiate, evaluate, parse, parse_folded, to_text, validate_strict_delta_net
from gengeom.fieldexpr import nodes as n


def ev(text_or_expr, eps=0.1, net=None, **values):
    e = parse_folded(text_or_expr) if isinstance(text_or_expr, str) else text_or_expr
    return evaluate(e, Bindings(values, eps, net))


def test_parse_tree_shape():
    x, y, two = n.Var("x"), n.Var("y"), n.Num(2.0)
    assert parse("x^2 - y^2") == n.Sub(n.Pow(x, two), n.Pow(y, two))


def test_parse_parameter_times_delta():
    assert parse("f0*delta(u)") == n.Mul(n.Var("f0"), n.Delta(0, n.Var("u")))


def test_nested_delta_rejected():
    with pytest.raises(ValidationError):
        parse("delta(delta(u))")


@pytest.mark.parametrize("text", ["x +", "sin(x", "2 ** x", "foo(x)", ""])
def test_parse_errors(text):
    with pytest.raises(ParseError):
        parse(text)


def test_power_binds_tighter_than_unary_minus():
    assert ev("-x^2", x=3.0) == -9.0


def test_roundtrip_through_text():
    e = parse_folded("sin(x*y) + exp(-x)/(1 + y^2) - delta1(u)")
    assert parse_folded(to_text(e)) == e


def test_derivative_polynomial():
    d = differentiate(parse_folded("x^2 - y^2"), "x")
    assert d.free_vars == {"x"}
    for x in (-1.5, 0.0, 2.0):
        assert ev(d, x=x) == pytest.approx(2 * x)


def test_derivative_of_delta_by_linearity():
    d = differentiate(parse_folded("f0*delta(u)"), "u")
    assert d == parse_folded("f0*delta1(u)")


def test_chain_rule():
    d = differentiate(parse_folded("sin(x*y)"), "x")
    assert ev(d, x=0.7, y=1.3) == pytest.approx(1.3 * math.cos(0.7 * 1.3), rel=1e-14)


def test_delta_order_cap():
    d2 = differentiate(differentiate(parse_folded("delta(u)"), "u"), "u")
    assert d2 == parse_folded("delta2(u)")
    with pytest.raises(DifferentiationError):
        differentiate(d2, "u")


@pytest.mark.parametrize("text", ["heaviside(u)", "pos(u)"])
def test_reference_only_not_differentiable(text):
    with pytest.raises(DifferentiationError):
        differentiate(parse_folded(text), "u")


def test_delta_outside_support(bump):
    assert ev("delta(u)", eps=0.1, net=bump, u=0.2) == 0.0


def test_delta_at_origin_matches_bump_constant(bump):
    c = bump_constant()
    assert ev("delta(u)", eps=0.1, net=bump, u=0.0) == pytest.approx(c * math.exp(-1) / 0.1, rel=1e-10)


def test_polynomial_value():
    assert ev("x^2 - y^2", x=1.0, y=1.0) == 0.0


@pytest.mark.parametrize("text,values", [("1/x", {"x": 0.0}), ("log(x)", {"x": -1.0}), ("exp(x)", {"x": 1e5})])
def test_evaluation_errors_carry_bindings(text, values):
    with pytest.raises(EvaluationError) as info:
        ev(text, **values)
    assert "x" in str(info.value.to_json())


def test_bump_net_is_strict():
    r = validate_strict_delta_net(DeltaNet("bump"), make_epsilon_grid(0.2, 0.0125, 5))
    assert r.passed
    assert all(abs(i - 1) <= 1e-8 for i in r.integrals)
    assert all(abs(l - 1) <= 1e-8 for l in r.l1_norms)


def _three_times_l1_profile() -> str:
    # even, sign-changing family (1 - s²)³(1 - k s²); pick k so that ∫|ρ| / ∫ρ = 3
    def ratio(k):
        f = lambda s: (1 - s * s) ** 3 * (1 - k * s * s)
        signed = integrate.quad(f, -1, 1)[0]
        l1 = integrate.quad(lambda s: abs(f(s)), -1, 1, points=[-(1 / math.sqrt(k)), 1 / math.sqrt(k)], limit=200)[0]
        return l1 / signed - 3.0

    k = optimize.brentq(ratio, 3.5, 8.9, xtol=1e-14)
    return f"(1 - s^2)^3*(1 - {k!r}*s^2)"


def test_oscillatory_profile_has_l1_bound_three():
    net = DeltaNet("custom", expression=_three_times_l1_profile())
    r = validate_strict_delta_net(net, make_epsilon_grid(0.2, 0.0125, 5))
    assert r.passed
    assert r.l1_bound == pytest.approx(3.0, rel=1e-6)


def test_constant_radius_does_not_shrink():
    net = DeltaNet("bump", radius_rule="0.5")
    r = validate_strict_delta_net(net, make_epsilon_grid(0.2, 0.0125, 5))
    assert not r.shrinking and not r.passed


def test_profile_may_not_use_other_variables():
    with pytest.raises(ValidationError):
        DeltaNet("custom", expression="exp(-x^2)")


@pytest.mark.parametrize("profile", ["bump", "gaussian-truncated", "signed"])
def test_builtin_profiles_normalized(profile):
    net = DeltaNet(profile)
    total = integrate.quad(lambda s: net.profile_value(s), -1, 1, epsabs=1e-14)[0]
    assert total == pytest.approx(1.0, abs=1e-10)


def test_signed_profile_goes_negative():
    net = DeltaNet("signed")
    assert min(net.profile_value(s) for s in np.linspace(-0.99, 0.99, 199)) < 0
