import math

import numpy as np
import pytest
import sympy as sp

from gengeom.curvature import curvature_bundle, curvature_diagnostics, lowered_riemann
from gengeom.metric import build_metric
from gengeom.scenarios import get_scenario


def sympy_ricci(coords, g):
    """Ricci tensor R_ab = R_cab^c with the same index convention, done in sympy."""
    d = len(coords)
    ginv = g.inv()
    Gam = [[[sp.simplify(sum(ginv[k, m] * (sp.diff(g[j, m], coords[i]) + sp.diff(g[i, m], coords[j]) - sp.diff(g[i, j], coords[m])) for m in range(d)) / 2)
             for j in range(d)] for i in range(d)] for k in range(d)]

    def riem(a, b, c, e):
        out = sp.diff(Gam[e][b][c], coords[a]) - sp.diff(Gam[e][a][c], coords[b])
        out += sum(Gam[e][a][f] * Gam[f][b][c] - Gam[e][b][f] * Gam[f][a][c] for f in range(d))
        return out

    return sp.Matrix(d, d, lambda a, b: sp.simplify(sum(riem(c, a, b, c) for c in range(d))))


def ppwave_with(f):
    s = get_scenario("ppwave")
    s.profile = f
    return s.build_metric()


def test_sympy_oracle_ricci_constant():
    u, v, x, y = sp.symbols("u v x y")
    D = sp.Function("D")(u)
    f = sp.Function("f")(x, y)
    g = sp.Matrix([[f * D, -sp.Rational(1, 2), 0, 0], [-sp.Rational(1, 2), 0, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]])
    ric = sympy_ricci((u, v, x, y), g)
    lap = sp.diff(f, x, 2) + sp.diff(f, y, 2)
    assert sp.simplify(ric[0, 0] - sp.Rational(-1, 2) * lap * D) == 0
    assert all(sp.simplify(ric[a, b]) == 0 for a in range(4) for b in range(4) if (a, b) != (0, 0))


def test_minkowski_riemann_literal_zero(minkowski):
    b = curvature_bundle(minkowski)
    assert all(e.is_zero for a in b.riemann for bb in a for c in bb for e in c)
    assert all(e.is_zero for row in b.ricci for e in row)
    assert b.scalar.is_zero


def test_sphere_values(sphere):
    b = curvature_bundle(sphere)
    th = 1.1
    vals = b.evaluate((th, 0.3), 1.0)
    g = sphere.matrix((th, 0.3), 1.0)
    assert vals["scalar"] == pytest.approx(2.0, abs=1e-13)
    assert np.allclose(vals["ricci"], g, atol=1e-13)
    assert np.allclose(vals["einstein"], 0.0, atol=1e-13)
    # in this convention R_{θφθ}^φ = -1 and R_{θφφ}^θ = sin²θ
    R = vals["riemann"]
    assert R[0, 1, 0, 1] == pytest.approx(-1.0, abs=1e-13)
    assert R[0, 1, 1, 0] == pytest.approx(math.sin(th) ** 2, rel=1e-12)
    low = lowered_riemann(R, g)
    assert abs(low[0, 1, 0, 1]) == pytest.approx(math.sin(th) ** 2, rel=1e-12)


@pytest.mark.parametrize("point", [(0.0, 0.0, 0.3, -0.2), (0.04, 1.0, 1.5, 0.7), (-0.07, -1.0, -0.5, 1.1)])
def test_harmonic_profile_is_vacuum(point):
    m = ppwave_with("x^2 - y^2")
    vals = curvature_bundle(m).evaluate(point, 0.1)
    scale = max(1.0, float(np.max(np.abs(vals["riemann"]))))
    assert np.max(np.abs(vals["ricci"])) <= 1e-9 * scale


def test_non_harmonic_profile_ricci(bump):
    m = ppwave_with("x^2 + y^2")
    b = curvature_bundle(m)
    eps = 0.1
    for u in (-0.05, 0.0, 0.03):
        ric = b.evaluate((u, 0.2, 0.4, -0.6), eps)["ricci"]
        expected = np.zeros((4, 4))
        expected[0, 0] = -0.5 * 4.0 * bump(u, eps)
        assert np.allclose(ric, expected, rtol=1e-12, atol=1e-12)


def test_diagnostics_minkowski(minkowski):
    r = curvature_diagnostics(curvature_bundle(minkowski), minkowski, [(0, 0, 0, 0), (1, 2, 3, 4)], 0.1)
    assert all(v.max_abs == 0.0 for v in r.identities.values())


def test_diagnostics_sphere(sphere):
    rng = np.random.default_rng(3)
    pts = [(rng.uniform(0.3, 2.8), rng.uniform(0, 6)) for _ in range(10)]
    r = curvature_diagnostics(curvature_bundle(sphere), sphere, pts, 1.0)
    assert all(v.max_abs <= 1e-9 for v in r.identities.values())


def test_diagnostics_ppwave_inside_impulse():
    m = ppwave_with("x^2 + y^2 + x*y^3")
    eps = 0.05
    pts = [(0.03, 0.1, 0.5, -0.4), (-0.02, 0.0, 1.0, 1.0), (0.0, 0.3, -0.7, 0.2)]
    r = curvature_diagnostics(curvature_bundle(m), m, pts, eps)
    assert r.identities
    assert r.passed(1e-8)


def test_scale_covariance(sphere):
    from gengeom.metric import scaled

    p = (0.7, 1.9)
    a = curvature_bundle(sphere).evaluate(p, 1.0)["riemann"]
    b = curvature_bundle(scaled(sphere, 4.0)).evaluate(p, 1.0)["riemann"]
    assert np.allclose(a, b, atol=1e-9)


def test_constant_metric_is_flat():
    m = build_metric(3, ["a", "b", "c"], {"a,a": "2", "a,b": "0.3", "b,b": "-1", "c,c": "5"})
    b = curvature_bundle(m)
    assert all(e.is_zero for a in b.riemann for bb in a for c in bb for e in c)
