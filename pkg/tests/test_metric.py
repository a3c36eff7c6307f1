import math

import numpy as np
import pytest

from conftest import bump_constant
from gengeom.asymptotics import Region, make_epsilon_grid, parse_region
from gengeom.errors import SingularityError, ValidationError
from gengeom.fieldexpr import DeltaNet
from gengeom.metric import (
    build_metric,
    check_nondegenerate,
    compute_index,
    eigenvalue_perturbation_check,
    evaluate_metric,
    inverse_metric_at,
    perturbed,
)
from gengeom.scenarios import get_scenario

GRID = make_epsilon_grid(0.1, 0.0125, 4)


def delta_line_metric(profile="bump"):
    return get_scenario("remark35").with_overrides(delta=profile).build_metric()


def test_ppwave_components(ppwave):
    g = ppwave.matrix((0.5, 0.0, 0.3, 0.2), 0.1)
    expected = np.array([[0, -0.5, 0, 0], [-0.5, 0, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]], dtype=float)
    assert np.array_equal(g, expected)


def test_minkowski_evaluation(minkowski):
    ev = evaluate_metric(minkowski, (0.3, -0.2, 0.1, 0.9), 0.5)
    assert np.allclose(ev.eigenvalues, [1, 1, 1, -1])
    assert ev.det == pytest.approx(-1.0)


def test_ppwave_outside_impulse(ppwave):
    ev = evaluate_metric(ppwave, (1.0, 0.0, 1.0, 1.0), 0.1)
    assert ev.matrix[0, 0] == 0.0
    # hand cofactor expansion of the constant background: -(−1/2)(−1/2) = -1/4
    assert ev.det == pytest.approx(-0.25, abs=1e-15)


def test_delta_line_at_origin():
    ev = evaluate_metric(delta_line_metric(), (0.0,), 0.1)
    assert ev.matrix[0, 0] == pytest.approx(bump_constant() * math.exp(-1) / 0.1, rel=1e-10)
    assert ev.matrix[0, 0] > 0


def test_minkowski_nondegenerate(minkowski):
    r = check_nondegenerate(minkowski, parse_region("[-1,1]x[-1,1]x[-1,1]x[-1,1]", 3), GRID)
    assert r.decision and r.exponent == 0


def test_delta_line_bump_nondegenerate():
    r = check_nondegenerate(delta_line_metric(), Region(((-1.0, 1.0),), 1025), GRID)
    assert r.decision
    # oracle: the lattice inf of x² + δ_ε(x) over the same points
    net = DeltaNet("bump")
    xs = np.linspace(-1, 1, 1025)
    for eps, inf in r.inf_table:
        assert inf == pytest.approx(min(abs(x * x + net(x, eps)) for x in xs), rel=1e-12)


def test_delta_line_signed_degenerates():
    r = check_nondegenerate(delta_line_metric("signed"), Region(((-1.0, 1.0),), 1025), GRID)
    assert not r.decision
    assert r.sign_change
    x = r.worst_point[0]
    # x² + δ_ε crosses zero at the reported point
    net = DeltaNet("signed")
    assert abs(x * x + net(x, GRID.smallest)) < 1e-6


def test_index_minkowski(minkowski):
    r = compute_index(minkowski, parse_region("[-1,1]x[-1,1]x[-1,1]x[-1,1]", 2), GRID)
    assert r.index == 1 and r.stable


def test_index_ppwave_across_impulse(ppwave):
    region = parse_region("[-0.3,0.3]x[-1,1]x[-1,2]x[-1,2]", 5)
    r = compute_index(ppwave, region, GRID)
    assert r.index == 1 and r.stable
    # oracle: direct eigensolve at the same lattice
    for eps in GRID.tail:
        for p in region.lattice():
            assert int(np.sum(np.linalg.eigvalsh(ppwave.matrix(p, eps)) < 0)) == 1


def test_index_euclidean_plane():
    m = build_metric(2, ["x", "y"], {"x,x": "1", "y,y": "1"})
    r = compute_index(m, parse_region("[-1,1]x[-1,1]", 3), GRID)
    assert r.index == 0 and r.stable


def test_unstable_index_reports_witnesses():
    m = build_metric(1, ["x"], {"x,x": "x"})
    r = compute_index(m, Region(((-1.0, 1.0),), 4), GRID)
    assert not r.stable and r.index is None
    assert len(r.witnesses) == 2
    assert r.witnesses[0].negative_count != r.witnesses[1].negative_count


def test_inverse_minkowski(minkowski):
    assert np.array_equal(inverse_metric_at(minkowski, (0, 0, 0, 0), 0.1), np.diag([-1.0, 1, 1, 1]))


def test_inverse_two_by_two():
    m = build_metric(2, ["x", "y"], {"x,x": "2", "x,y": "1", "y,y": "3"})
    assert np.allclose(inverse_metric_at(m, (0, 0), 0.1), [[0.6, -0.2], [-0.2, 0.4]], atol=1e-15)


def test_inverse_ppwave_background(ppwave):
    G = inverse_metric_at(ppwave, (1.0, 0.0, 0.0, 0.0), 0.1)
    assert np.allclose(G[:2, :2], [[0, -2], [-2, 0]], atol=1e-15)


def test_singular_inverse():
    m = build_metric(1, ["x"], {"x,x": "x"})
    with pytest.raises(SingularityError):
        inverse_metric_at(m, (0.0,), 0.1)


def test_perturbation_bound(sphere):
    q = perturbed(sphere, {"th,th": "sin(ph)", "th,ph": "0.5*cos(th)"}, power=8)
    r = eigenvalue_perturbation_check(sphere, q, parse_region("[0.3,2.8]x[0,6]", 6), GRID)
    assert r.holds


def test_unknown_component_key():
    with pytest.raises(ValidationError):
        build_metric(2, ["x", "y"], {"x,z": "1"})
