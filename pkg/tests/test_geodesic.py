import math

import numpy as np
import pytest

from gengeom.errors import ConfigurationError
from gengeom.fieldexpr import parse_folded
from gengeom.geodesic import (
    GeodesicInit,
    PPWaveReduced,
    fd_residual,
    geodesic_rhs,
    integrate_geodesic,
    norm_drift,
    ppwave_reduced_rhs,
    solve_family,
)
from gengeom.levicivita import christoffel
from gengeom.metric import build_metric

F = parse_folded("x^2 - y^2")
PP_INIT = GeodesicInit(-1.0, (-1.0, 0.0, 1.0, 1.0), (1.0, 0.0, 0.0, 0.0))


@pytest.fixture(scope="module")
def line():
    return christoffel(build_metric(1, ["x"], {"x,x": "1"}))


def test_flat_rhs(minkowski):
    G = christoffel(minkowski)
    vel, acc = geodesic_rhs(G, ((0.1, 0.2, 0.3, 0.4), (1.0, -2.0, 0.5, 3.0)), 0.1)
    assert np.array_equal(acc, np.zeros(4))


def test_equator_is_geodesic(sphere_gamma):
    _, acc = geodesic_rhs(sphere_gamma, ((math.pi / 2, 0.3), (0.0, 1.0)), 1.0)
    assert np.allclose(acc, 0.0, atol=1e-16)


def test_ppwave_transverse_kick(ppwave_gamma, bump):
    eps = 0.1
    u, x = 0.02, 0.8
    _, acc = geodesic_rhs(ppwave_gamma, ((u, 0.0, x, 1.0), (1.0, 0.0, 0.0, 0.0)), eps)
    assert acc[2] == pytest.approx(0.5 * (2 * x) * bump(u, eps), rel=1e-13)


def test_straight_line(line):
    tr = integrate_geodesic(line, GeodesicInit(0.0, (0.0,), (1.0,)), 1.0, 0.1)
    assert np.max(np.abs(tr.positions[:, 0] - tr.t)) <= 1e-10


def test_bad_eps_rejected(line):
    with pytest.raises(ConfigurationError):
        integrate_geodesic(line, GeodesicInit(0.0, (0.0,), (1.0,)), 1.0, 1.5)


def _closed_form_error(gamma, eps):
    tr = integrate_geodesic(gamma, PP_INIT, 1.0, eps)
    _, v, x, y = tr.positions[-1]
    return max(abs(x - 2.0), abs(y), abs(v - 2.0))


def test_ppwave_endpoint_close_to_shadow(ppwave_gamma):
    e1 = _closed_form_error(ppwave_gamma, 0.05)
    e2 = _closed_form_error(ppwave_gamma, 0.025)
    assert e1 <= 0.05 and e2 <= 0.025
    assert 1.5 <= e1 / e2 <= 2.5


def test_flat_family_members_identical(line):
    fam = solve_family(line, GeodesicInit(0.0, (0.0,), (2.0,)), 1.0, (0.2, 0.1, 0.05, 0.025))
    assert all(np.array_equal(m.positions, fam.members[0].positions) for m in fam.members)


def test_sphere_family_eps_independent(sphere_gamma):
    fam = solve_family(sphere_gamma, GeodesicInit(0.0, (math.pi / 2, 0.0), (0.0, 1.0)), 3.0, (0.2, 0.1, 0.05, 0.025))
    ph = fam.coordinate("ph")
    assert np.array_equal(ph, np.repeat(ph[:1], 4, axis=0))
    assert np.allclose(fam.coordinate("th"), math.pi / 2, atol=1e-12)


def test_ppwave_family_approaches_shadow(ppwave_gamma):
    fam = solve_family(ppwave_gamma, PP_INIT, 1.0, (0.2, 0.1, 0.05, 0.025))
    err = np.abs(fam.coordinate("x")[:, -1] - 2.0)
    assert np.all(np.diff(err) < 0)


def test_reduced_outside_support(bump):
    d = ppwave_reduced_rhs(F, (0, 0.3, 1, 0.2, 1, -0.1), 0.5, 0.1, bump)
    assert np.array_equal(d[[1, 3, 5]], np.zeros(3))


def test_reduced_at_centre(bump):
    eps = 0.1
    d = ppwave_reduced_rhs(F, (0, 0, 1, 0, 1, 0), 0.0, eps, bump)
    d0 = bump(0.0, eps)
    assert d[3] == pytest.approx(d0, rel=1e-14)
    assert d[5] == pytest.approx(-d0, rel=1e-14)
    assert d[1] == 0.0


def test_reduced_rejects_foreign_variables(bump):
    with pytest.raises(ConfigurationError):
        PPWaveReduced(parse_folded("x*z"), bump)


@pytest.mark.parametrize("eps", [0.2, 0.05])
def test_reduced_agrees_with_full(ppwave_gamma, bump, eps):
    full = integrate_geodesic(ppwave_gamma, PP_INIT, 1.0, eps, 1e-12)
    grid, Y, _ = PPWaveReduced(F, bump).integrate((0, 0, 1, 0, 1, 0), -1.0, 1.0, eps, 1e-12)
    assert np.allclose(grid, full.t)
    gap = max(
        np.max(np.abs(Y[:, 0] - full.positions[:, 1])),
        np.max(np.abs(Y[:, 2] - full.positions[:, 2])),
        np.max(np.abs(Y[:, 4] - full.positions[:, 3])),
    )
    assert gap <= 1e-8


def test_norm_conserved(ppwave_gamma):
    tol = 1e-10
    tr = integrate_geodesic(ppwave_gamma, GeodesicInit(-1.0, (-1, 0, 0.5, -0.3), (1, 0.4, 0.2, 0.1)), 1.0, 0.05, tol)
    drift, scale = norm_drift(ppwave_gamma, tr)
    assert drift <= 10 * tol * max(1.0, scale)


def test_sphere_fd_residual(sphere_gamma):
    tol = 1e-10
    tr = integrate_geodesic(sphere_gamma, GeodesicInit(0.0, (1.2, 0.0), (0.4, 0.8)), 3.0, 1.0, tol)
    assert fd_residual(sphere_gamma, tr) <= 100 * tol
