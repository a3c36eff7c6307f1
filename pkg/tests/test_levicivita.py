import math

import numpy as np
import pytest

from gengeom.geodesic import GeodesicInit, integrate_geodesic
from gengeom.levicivita import (
    VectorFieldExpr,
    along_curve_derivative,
    christoffel,
    covariant_derivative,
    koszul_residual,
    metric_compatibility_residual,
)
from gengeom.metric import build_metric
from gengeom.errors import ConfigurationError


def fd_christoffel(m, point, eps, h=1e-6):
    """Γ from central differences of the evaluated metric and a dense inverse."""
    d = m.dim
    point = np.asarray(point, float)
    dg = np.empty((d, d, d))
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        dg[i] = (m.matrix(point + e, eps) - m.matrix(point - e, eps)) / (2 * h)
    ginv = np.linalg.inv(m.matrix(point, eps))
    low = 0.5 * (np.einsum("ijm->mij", dg) + np.einsum("jim->mij", dg) - dg)
    return np.einsum("km,mij->kij", ginv, low)


@pytest.fixture(scope="module")
def plane():
    return build_metric(2, ["x", "y"], {"x,x": "1", "y,y": "1"})


def test_minkowski_symbols_fold_to_zero(minkowski):
    G = christoffel(minkowski)
    assert all(G.symbols[k][i][j].is_zero for k in range(4) for i in range(4) for j in range(4))


def test_sphere_symbols(sphere_gamma):
    th = 1.1
    G = sphere_gamma.values((th, 0.4), 1.0)
    assert G[0, 1, 1] == pytest.approx(-math.sin(th) * math.cos(th), rel=1e-14)
    assert G[1, 0, 1] == pytest.approx(math.cos(th) / math.sin(th), rel=1e-14)
    assert len(sphere_gamma.nonzero()) == 2


def test_sphere_matches_finite_differences(sphere, sphere_gamma):
    p = (0.9, 2.0)
    assert np.allclose(sphere_gamma.values(p, 1.0), fd_christoffel(sphere, p, 1.0), atol=1e-8)


def test_ppwave_symbols(ppwave, ppwave_gamma, bump):
    eps = 0.1
    u, x, y = 0.03, 0.7, -0.4
    G = ppwave_gamma.values((u, 0.0, x, y), eps)
    d0, d1 = bump.value(0, u, eps), bump.value(1, u, eps)
    f, fx, fy = x * x - y * y, 2 * x, -2 * y
    U, V, X, Y = range(4)
    expected = np.zeros((4, 4, 4))
    expected[V, U, U] = -f * d1
    expected[V, U, X] = expected[V, X, U] = -fx * d0
    expected[V, U, Y] = expected[V, Y, U] = -fy * d0
    expected[X, U, U] = -0.5 * fx * d0
    expected[Y, U, U] = -0.5 * fy * d0
    assert np.allclose(G, expected, rtol=1e-13, atol=1e-13)
    assert np.allclose(G, fd_christoffel(ppwave, (u, 0.0, x, y), eps, h=1e-7), rtol=1e-5, atol=1e-5)


def test_symbols_are_the_same_object(sphere_gamma):
    S = sphere_gamma.symbols
    assert all(S[k][i][j] is S[k][j][i] for k in range(2) for i in range(2) for j in range(2))


def test_flat_covariant_derivative(plane):
    G = christoffel(plane)
    D = covariant_derivative(plane, G, VectorFieldExpr.parse(["x", "y"]), 0)
    assert [str(c) for c in D.components] == ["1", "0"]
    D = covariant_derivative(plane, G, VectorFieldExpr.parse(["3", "-2"]), 1)
    assert all(c.is_zero for c in D.components)


def test_sphere_covariant_derivative(sphere, sphere_gamma):
    D = covariant_derivative(sphere, sphere_gamma, VectorFieldExpr.coordinate(2, 1), 0)
    fn = sphere.compile(list(D.components))
    th = 0.8
    assert fn((th, 0.0), 1.0) == pytest.approx((0.0, math.cos(th) / math.sin(th)), rel=1e-14)


def test_vector_field_dimension_checked(sphere, sphere_gamma):
    with pytest.raises(ConfigurationError):
        covariant_derivative(sphere, sphere_gamma, VectorFieldExpr.parse(["1"]), 0)


def test_koszul_minkowski_coordinate_field(minkowski):
    dx = VectorFieldExpr.coordinate(4, 1)
    r = koszul_residual(minkowski, christoffel(minkowski), dx, dx, dx, [(0, 0, 0, 0)], 0.1)
    assert r.max_abs == 0.0


def test_koszul_sphere(sphere, sphere_gamma):
    a, b = VectorFieldExpr.coordinate(2, 0), VectorFieldExpr.coordinate(2, 1)
    for xi, eta, zeta in [(a, b, b), (b, a, b), (b, b, a), (a, a, a)]:
        assert koszul_residual(sphere, sphere_gamma, xi, eta, zeta, [(1.0, 1.0)], 1.0).max_abs <= 1e-10


def test_koszul_ppwave_general_fields(ppwave, ppwave_gamma):
    xi = VectorFieldExpr.parse(["1", "x*y", "sin(u)", "v"])
    eta = VectorFieldExpr.parse(["x", "1", "0", "u^2"])
    zeta = VectorFieldExpr.parse(["y", "0", "1", "cos(x)"])
    r = koszul_residual(ppwave, ppwave_gamma, xi, eta, zeta, [(0.01, 0.2, 0.5, -0.3), (-0.04, 0, 1, 1)], 0.05)
    assert r.within(1e-9)


def test_compatibility(ppwave, ppwave_gamma):
    pts = [(0.02, 0.1, 0.3, -0.7), (-0.05, 1.0, 1.2, 0.4)]
    assert metric_compatibility_residual(ppwave, ppwave_gamma, pts, 0.1) <= 1e-8


def _line(t):
    return [(s, (s, 2 * s), (1.0, 2.0)) for s in t]


def test_along_curve_constant_field(plane):
    t = np.linspace(0, 1, 11)
    out = along_curve_derivative(plane, christoffel(plane), _line(t), [[1.0, -3.0]] * len(t), 0.1)
    assert np.max(np.abs(out)) <= 1e-10


def test_along_curve_linear_field(plane):
    t = np.linspace(0, 1, 11)
    out = along_curve_derivative(plane, christoffel(plane), _line(t), [[s, 0.0] for s in t], 0.1)
    assert np.allclose(out, [[1.0, 0.0]] * len(t), atol=1e-12)


def test_along_curve_needs_five_samples(plane):
    t = np.linspace(0, 1, 4)
    with pytest.raises(ConfigurationError):
        along_curve_derivative(plane, christoffel(plane), _line(t), [[0, 0]] * 4, 0.1)


def test_velocity_of_geodesic_is_parallel(sphere, sphere_gamma):
    traj = integrate_geodesic(sphere_gamma, GeodesicInit(0.0, (1.0, 0.0), (0.3, 1.0)), 2.0, 1.0, 1e-11)
    samples = [(t, p, v) for t, p, v in zip(traj.t, traj.positions, traj.velocities)]
    out = along_curve_derivative(sphere, sphere_gamma, samples, traj.velocities, 1.0)
    assert np.max(np.abs(out)) <= 1e-6
