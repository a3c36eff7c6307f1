"""Property-based checks of the invariants each module promises."""

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from gengeom.asymptotics import (
    FieldNet,
    Region,
    ScalarNet,
    check_invertible_on,
    estimate_growth_order,
    is_strictly_nonzero,
    make_epsilon_grid,
)
from gengeom.curvature import curvature_bundle, curvature_diagnostics
from gengeom.fieldexpr import Bindings, DeltaNet, differentiate, evaluate, parse_folded
from gengeom.geodesic import GeodesicInit, PPWaveReduced, integrate_geodesic, norm_drift
from gengeom.levicivita import christoffel, metric_compatibility_residual
from gengeom.metric import (
    compute_index,
    eigenvalue_perturbation_check,
    evaluate_metric,
    inverse_metric_at,
    perturbed,
    scaled,
)
from gengeom.scenarios import get_scenario
from gengeom.shadow import TestDensity, estimate_shadow, pair

FAST = settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
SLOW = settings(max_examples=6, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])

eps_values = st.floats(0.005, 1.0)
geometric_grids = st.builds(
    lambda e_max, ratio, count: make_epsilon_grid(e_max, e_max * ratio ** (count - 1), count),
    st.floats(0.05, 0.5),
    st.floats(0.3, 0.8),
    st.integers(6, 10),
)

_metrics = {}


def metric(name):
    if name not in _metrics:
        m = get_scenario(name).build_metric()
        _metrics[name] = (m, christoffel(m))
    return _metrics[name]


def point_for(name, draw_unit):
    """Map unit-cube coordinates into the scenario's own region."""
    box = get_scenario(name).region_obj().box
    return tuple(a + (b - a) * u for (a, b), u in zip(box, draw_unit))


units = st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4)
scenario_names = st.sampled_from(["ppwave", "minkowski", "sphere2", "remark35"])


# -- asymptotics ---------------------------------------------------------------


@FAST
@given(k=st.integers(0, 3), grid=geometric_grids)
def test_growth_recovers_power(k, grid):
    r = estimate_growth_order(ScalarNet(lambda e: e ** (-k)), grid)
    assert r.estimated_order == pytest.approx(k, abs=0.05)


@FAST
@given(c=st.floats(1e-3, 1e3) | st.floats(-1e3, -1e-3), q=st.floats(0, 6), grid=geometric_grids)
def test_strict_nonzero_scale_invariant(c, q, grid):
    base = ScalarNet(lambda e: e**q)
    assert is_strictly_nonzero(base, grid).decision == is_strictly_nonzero(base.scaled(c), grid).decision


@FAST
@given(a=st.floats(0.1, 2.0), b=st.floats(-1.0, 1.0), grid=geometric_grids)
def test_uniform_implies_pointwise(a, b, grid):
    net = FieldNet.from_expr(f"{a!r} + {b!r}*x^2 + eps*sin(x)", ["x"])
    region = Region(((0.0, 1.0),), 9)
    if check_invertible_on(net, region, grid).decision:
        assert all(is_strictly_nonzero(net.at(p), grid).decision for p in region.lattice())


# -- fieldexpr -------------------------------------------------------------------

SMOOTH = ["x^2*y - sin(x*y)", "exp(-x^2)*cos(y)", "sqrt(1 + x^2 + y^2)", "tanh(x - y)/(2 + y^2)", "log(2 + sin(x))*y^3"]


@FAST
@given(text=st.sampled_from(SMOOTH), x=st.floats(-1.5, 1.5), y=st.floats(-1.5, 1.5), var=st.sampled_from("xy"))
def test_derivative_matches_central_difference(text, x, y, var):
    e = parse_folded(text)
    d = differentiate(e, var)
    h = 1e-5
    shift = {"x": (h, 0.0), "y": (0.0, h)}[var]
    up = evaluate(e, Bindings({"x": x + shift[0], "y": y + shift[1]}))
    dn = evaluate(e, Bindings({"x": x - shift[0], "y": y - shift[1]}))
    exact = evaluate(d, Bindings({"x": x, "y": y}))
    assert abs((up - dn) / (2 * h) - exact) <= 1e-6 * max(1.0, abs(exact))


NETS = {p: DeltaNet(p) for p in ("bump", "gaussian-truncated", "signed")}


@FAST
@given(profile=st.sampled_from(sorted(NETS)), eps=st.floats(0.01, 1.0))
def test_delta_moments(profile, eps):
    from scipy import integrate

    net = NETS[profile]
    kw = dict(points=[0.0], epsabs=1e-13, epsrel=1e-12, limit=400)
    total = integrate.quad(lambda u: net.value(0, u, eps), -eps, eps, **kw)[0]
    # ∫δ' is exactly zero, so only an absolute tolerance is meaningful
    d1 = integrate.quad(lambda u: net.value(1, u, eps), -eps, eps, **{**kw, "epsabs": 1e-10})[0]
    ud1 = integrate.quad(lambda u: u * net.value(1, u, eps), -eps, eps, **kw)[0]
    assert total == pytest.approx(1.0, abs=1e-8)
    assert abs(d1) <= 1e-6
    assert ud1 == pytest.approx(-1.0, abs=1e-6)


# -- metric ------------------------------------------------------------------------


@FAST
@given(name=scenario_names, unit=units, eps=st.floats(0.01, 1.0))
def test_inverse_identity(name, unit, eps):
    m, _ = metric(name)
    p = point_for(name, unit)
    g = evaluate_metric(m, p, eps).matrix
    assume(abs(np.linalg.det(g)) > 1e-12)
    prod = g @ inverse_metric_at(m, p, eps)
    eye = np.eye(m.dim)
    assert np.linalg.norm(prod - eye) <= 1e-10 * max(1.0, np.linalg.norm(g) * np.linalg.norm(prod))


H_FIELDS = {
    "ppwave": {"u,u": "0.5*sin(x)", "v,x": "0.3*cos(y)", "y,y": "0.2"},
    "minkowski": {"t,x": "0.5*sin(y)", "z,z": "cos(t)*0.4"},
    "sphere2": {"th,ph": "0.6*cos(ph)", "th,th": "0.3"},
}


@SLOW
@given(name=st.sampled_from(sorted(H_FIELDS)))
def test_index_invariant_under_negligible_perturbation(name):
    sc = get_scenario(name)
    m, _ = metric(name)
    q = perturbed(m, H_FIELDS[name], power=8)
    region = Region(sc.region_obj().box, 3)
    grid = make_epsilon_grid(0.2, 0.0125, 5)
    a, b = compute_index(m, region, grid), compute_index(q, region, grid)
    assert a.stable and b.stable and a.index == b.index
    assert eigenvalue_perturbation_check(m, q, region, grid).holds


# -- connection ------------------------------------------------------------------


@FAST
@given(name=scenario_names, unit=units, eps=st.floats(0.01, 1.0))
def test_metric_compatibility(name, unit, eps):
    m, G = metric(name)
    assert metric_compatibility_residual(m, G, [point_for(name, unit)], eps) <= 1e-8


@FAST
@given(name=scenario_names)
def test_torsion_free_by_construction(name):
    _, G = metric(name)
    d = G.dim
    assert all(G.symbols[k][i][j] is G.symbols[k][j][i] for k in range(d) for i in range(d) for j in range(d))


# -- geodesics -------------------------------------------------------------------

F = parse_folded("x^2 - y^2")


@SLOW
@given(
    x0=st.floats(-1, 1), y0=st.floats(-1, 1), xd=st.floats(-0.5, 0.5), yd=st.floats(-0.5, 0.5), vd=st.floats(-1, 1),
    eps=st.sampled_from([0.2, 0.1, 0.05]),
)
def test_norm_conservation(x0, y0, xd, yd, vd, eps):
    _, G = metric("ppwave")
    tol = 1e-10
    tr = integrate_geodesic(G, GeodesicInit(-1.0, (-1.0, 0.0, x0, y0), (1.0, vd, xd, yd)), 1.0, eps, tol)
    drift, scale = norm_drift(G, tr)
    assert drift <= 10 * tol * max(1.0, scale)


@SLOW
@given(x0=st.floats(-1, 1), y0=st.floats(-1, 1), xd=st.floats(-0.5, 0.5), yd=st.floats(-0.5, 0.5), eps=st.sampled_from([0.2, 0.1, 0.05]))
def test_reduced_and_full_agree(x0, y0, xd, yd, eps):
    _, G = metric("ppwave")
    full = integrate_geodesic(G, GeodesicInit(-1.0, (-1.0, 0.0, x0, y0), (1.0, 0.0, xd, yd)), 1.0, eps, 1e-12)
    _, Y, _ = PPWaveReduced(F, NETS["bump"]).integrate((0.0, 0.0, x0, xd, y0, yd), -1.0, 1.0, eps, 1e-12)
    for col, k in ((0, 1), (2, 2), (4, 3)):
        assert np.max(np.abs(Y[:, col] - full.positions[:, k])) <= 1e-8


# -- curvature -------------------------------------------------------------------

_bundles = {}


def bundle(name):
    if name not in _bundles:
        _bundles[name] = curvature_bundle(metric(name)[0])
    return _bundles[name]


@FAST
@given(name=st.sampled_from(["ppwave", "sphere2", "minkowski"]), unit=units, eps=st.floats(0.02, 1.0))
def test_curvature_identities(name, unit, eps):
    m, _ = metric(name)
    p = point_for(name, unit)
    if name == "ppwave":
        p = (p[0] * eps * 3,) + p[1:]  # concentrate samples on the impulse
    r = curvature_diagnostics(bundle(name), m, [p], eps)
    assert r.passed(1e-8)


@SLOW
@given(c=st.floats(0.1, 10.0), unit=units)
def test_mixed_riemann_scale_invariant(c, unit):
    m, _ = metric("sphere2")
    p = point_for("sphere2", unit)
    a = bundle("sphere2").evaluate(p, 1.0)["riemann"]
    b = curvature_bundle(scaled(m, c)).evaluate(p, 1.0)["riemann"]
    assert np.allclose(a, b, atol=1e-9, rtol=1e-9)


# -- shadows ---------------------------------------------------------------------

PHI = TestDensity.parse("exp(-t^2)*(1 + t/3)", "t", (-3.0, 3.0))
U = FieldNet.from_expr("delta(t)", ["t"], delta_net=NETS["bump"])
W = FieldNet.from_expr("t^2 + eps*cos(t)", ["t"])


@FAST
@given(a=st.floats(-5, 5), b=st.floats(-5, 5), eps=st.floats(0.01, 0.5))
def test_pairing_linear(a, b, eps):
    combo = FieldNet.from_expr(f"({a!r})*delta(t) + ({b!r})*(t^2 + eps*cos(t))", ["t"], delta_net=NETS["bump"])
    lhs = pair(combo, PHI, eps)
    rhs = a * pair(U, PHI, eps) + b * pair(W, PHI, eps)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(a) + abs(b))


@FAST
@given(L=st.floats(-10, 10), C=st.floats(0.1, 5) | st.floats(-5, -0.1), p=st.floats(0.5, 3.0))
def test_shadow_recovers_exact_model(L, C, p):
    samples = [(e, L + C * e**p) for e in (0.2, 0.1, 0.05, 0.025, 0.0125)]
    est = estimate_shadow(samples)
    assert est.limit == pytest.approx(L, abs=1e-6 * max(1.0, abs(C)))
    assert est.fitted_order == pytest.approx(p, abs=1e-3)
    assert est.trustworthy
