"""The acceptance criteria as runnable checks.

Each ``criterion_<k>`` returns a :class:`CriterionResult`; ``run_all``
executes them in order.  Runtime budgets are part of the pass condition.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .asymptotics import EpsilonGrid, FieldNet, Region, check_invertible_on, is_strictly_nonzero
from .curvature import curvature_bundle, curvature_diagnostics, lowered_riemann
from .fieldexpr import parse_folded
from .geodesic import PPWaveReduced, integrate_geodesic, solve_family
from .levicivita import VectorFieldExpr, christoffel, koszul_residual, metric_compatibility_residual
from .metric import check_nondegenerate, compute_index, eigenvalue_perturbation_check, perturbed
from .scenarios import ACCEPTANCE_GRID, get_scenario
from .shadow import TestDensity, estimate_shadow, geodesic_shadow, pair


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    runtime: float = 0.0
    budget: float = math.inf
    details: dict = field(default_factory=dict)

    @property
    def within_budget(self) -> bool:
        return self.runtime <= self.budget

    @property
    def ok(self) -> bool:
        return self.passed and self.within_budget

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        note = "" if self.within_budget else f" (over budget {self.budget:g} s)"
        return f"{status} criterion {self.number:>2}: {self.title} [{self.runtime:.2f} s]{note}"

    def to_json(self) -> dict:
        return {
            "number": self.number,
            "title": self.title,
            "passed": self.ok,
            "runtime": self.runtime,
            "budget": self.budget,
            "details": _plain(self.details),
        }


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


CRITERIA: dict[int, tuple[str, float, Callable[[], tuple[bool, dict]]]] = {}


def _criterion(number: int, title: str, budget: float):
    def wrap(fn):
        CRITERIA[number] = (title, budget, fn)
        return fn

    return wrap


def run_criterion(number: int) -> CriterionResult:
    title, budget, fn = CRITERIA[number]
    start = time.perf_counter()
    passed, details = fn()
    return CriterionResult(number, title, bool(passed), time.perf_counter() - start, budget, details)


def run_all(numbers=None, echo: Callable[[str], None] | None = None) -> list[CriterionResult]:
    results = []
    for k in sorted(numbers or CRITERIA):
        res = run_criterion(k)
        if echo is not None:
            echo(res.line())
        results.append(res)
    return results


# -- shared pp-wave data -----------------------------------------------------


def ppwave_family(x0: float = 1.0, y0: float = 1.0, f: str = "x^2 - y^2", grid=ACCEPTANCE_GRID):
    sc = get_scenario("ppwave").with_overrides(f=f)
    m = sc.build_metric()
    gamma = christoffel(m)
    init = sc.geodesic_init()
    init = type(init)(init.t0, (init.position[0], init.position[1], x0, y0), init.velocity)
    return m, gamma, solve_family(gamma, init, 1.0, grid)


@_criterion(1, "pp-wave geodesic shadow", 60.0)
def criterion_1():
    m, gamma, fam = ppwave_family(1.0, 1.0)
    grid = fam.eps
    targets = {"x": 2.0, "y": 0.0, "v": 2.0}
    end = {}
    ok = True
    for c, target in targets.items():
        est = estimate_shadow(list(zip(grid, fam.coordinate(c)[:, -1])))
        good = abs(est.limit - target) <= 1e-2 and 0.5 <= est.fitted_order <= 2.0
        ok &= good
        end[c] = {"limit": est.limit, "order": est.fitted_order, "trustworthy": est.trustworthy, "ok": good}
    rep = geodesic_shadow(fam, get_scenario("ppwave").closed_forms, exclusion_radius=0.05)
    curves = {c: rep.coordinates[c].max_deviation for c in targets}
    ok &= all(d <= 1e-2 for d in curves.values())
    return ok, {"endpoint": end, "curve_max_deviation": curves, "flagged": rep.flagged}


@_criterion(2, "v-jump case", 60.0)
def criterion_2():
    m, gamma, fam = ppwave_family(2.0, 1.0)
    rep = geodesic_shadow(fam, {"v": "3*heaviside(u) + 5*pos(u)"}, exclusion_radius=0.05)
    t = fam.t
    L = rep.coordinates["v"].limits
    post = t >= 0.1 - 1e-12
    slope = float(np.polyfit(t[post], L[post], 1)[0])
    i_plus = int(np.argmin(np.abs(t - 0.1)))
    i_minus = int(np.argmin(np.abs(t + 0.1)))
    jump = float(L[i_plus] - L[i_minus] - slope * t[i_plus])
    ok = abs(jump - 3.0) <= 5e-2 and abs(slope - 5.0) <= 5e-2
    return ok, {"jump": jump, "slope": slope, "curve_max_deviation": rep.coordinates["v"].max_deviation}


def _ppwave_points(rng: np.random.Generator, eps_values, count: int, inside: int):
    out = []
    for k in range(count):
        eps = float(eps_values[k % len(eps_values)])
        u = rng.uniform(-eps, eps) if k < inside else rng.choice([-1, 1]) * rng.uniform(1.05 * eps, 1.0)
        out.append(((u, rng.uniform(-1, 1), rng.uniform(-2, 2), rng.uniform(-2, 2)), eps))
    return out


@_criterion(3, "vacuum consistency", 30.0)
def criterion_3():
    m = get_scenario("ppwave").build_metric()
    bundle = curvature_bundle(m)
    rng = np.random.default_rng(3)
    worst = 0.0
    inside = 0
    for p, eps in _ppwave_points(rng, ACCEPTANCE_GRID, 50, 40):
        ev = bundle.evaluate(p, eps)
        scale = float(np.max(np.abs(lowered_riemann(ev["riemann"], m.matrix(p, eps)))))
        ric = float(np.max(np.abs(ev["ricci"])))
        inside += abs(p[0]) < eps
        worst = max(worst, ric / scale if scale > 0 else (0.0 if ric == 0 else math.inf))
    return worst <= 1e-8, {"max_ricci_over_riemann": worst, "points_inside_impulse": inside}


# smooth test densities in u: (expression, support, value at 0)
DENSITIES = (
    ("exp(-u^2)", (-3.0, 3.0)),
    ("2*(1 - u^2)^4", (-1.0, 1.0)),
    ("(1 + u/2)*(1 - u^2)^3*cos(u)", (-1.0, 1.0)),
)


@_criterion(4, "non-vacuum impulse pairing", 60.0)
def criterion_4():
    m = get_scenario("ppwave").with_overrides(f="x^2 + y^2").build_metric()
    bundle = curvature_bundle(m)
    point = {"v": 0.3, "x": 0.5, "y": -0.2}
    ruu = FieldNet.from_expr(bundle.ricci[0][0], ["u"], point, m.delta_net, label="R_uu")
    laplacian = 4.0
    constants = []
    for text, support in DENSITIES:
        phi = TestDensity.parse(text, "u", support)
        est = estimate_shadow([(e, pair(ruu, phi, e)) for e in ACCEPTANCE_GRID])
        constants.append(est.limit / (laplacian * phi(0.0)))
    c = float(np.mean(constants))
    spread = float(max(abs(k - c) for k in constants) / abs(c))
    return spread <= 0.01, {"constants": constants, "c": c, "relative_spread": spread}


@_criterion(5, "strict nonzeroness dichotomy", 10.0)
def criterion_5():
    sc = get_scenario("example24")
    net = sc.build_field()
    grid = sc.grid_obj()
    expected = {0.25: 16, 0.5: 4, 1.0: 1}
    witnesses = {}
    ok = True
    for x0, m in expected.items():
        res = is_strictly_nonzero(net.at((x0,)), grid)
        witnesses[x0] = res.witness_exponent
        ok &= res.decision and abs(res.witness_exponent - m) <= 1
    region = sc.region_obj()
    inv = check_invertible_on(net, region, grid)
    cell = region.cell_size()[0]
    distance = abs(inv.worst_point[0] - grid.smallest) / cell
    ok &= (not inv.decision) and distance <= 2
    return ok, {"witnesses": witnesses, "invertible": inv.decision, "worst_point": inv.worst_point, "cells_from_eps": distance}


@_criterion(6, "delta-profile dependence", 10.0)
def criterion_6():
    base = get_scenario("remark35")
    out = {}
    for profile in ("bump", "signed"):
        sc = base.with_overrides(delta=profile)
        rep = check_nondegenerate(sc.build_metric(), sc.region_obj(), sc.grid_obj())
        out[profile] = {"decision": rep.decision, "exponent": rep.exponent, "worst_point": rep.worst_point}
    return out["bump"]["decision"] and not out["signed"]["decision"], out


PERTURBATIONS = {
    "ppwave": {"u,u": "0.3*sin(x + v)", "u,x": "0.2*cos(u*y)", "v,v": "0.1", "x,y": "0.2*sin(u)"},
    "minkowski": {"t,t": "0.3*cos(x)", "t,y": "0.2*sin(z)", "x,x": "0.1*x", "z,z": "0.2"},
}


@_criterion(7, "index stability", 20.0)
def criterion_7():
    out = {}
    ok = True
    for name, h in PERTURBATIONS.items():
        sc = get_scenario(name)
        m = sc.build_metric()
        mp = perturbed(m, h, 8)
        region, grid = sc.region_obj(), sc.grid_obj()
        a, b = compute_index(m, region, grid), compute_index(mp, region, grid)
        check = eigenvalue_perturbation_check(m, mp, region, grid)
        good = a.index == b.index == 1 and a.stable and b.stable and check.holds
        ok &= good
        out[name] = {"index": a.index, "perturbed_index": b.index, "stable": [a.stable, b.stable], "max_excess": check.max_violation}
    return ok, out


VECTOR_FIELDS = {
    "sphere2": (("1", "th"), ("sin(ph)", "0.5"), ("cos(th)", "ph^2")),
    "ppwave": (("1", "x", "0", "y"), ("u", "0.5", "sin(y)", "1"), ("0", "1", "x*y", "cos(u)")),
}


def _connection_points(name: str, rng: np.random.Generator, eps: float, count: int = 20):
    if name == "sphere2":
        return [(rng.uniform(0.3, 2.8), rng.uniform(0, 6)) for _ in range(count)]
    return [(rng.uniform(-eps, eps), rng.uniform(-1, 1), rng.uniform(-2, 2), rng.uniform(-2, 2)) for _ in range(count)]


@_criterion(8, "connection identities", 10.0)
def criterion_8():
    rng = np.random.default_rng(8)
    out = {}
    ok = True
    for name, fields in VECTOR_FIELDS.items():
        m = get_scenario(name).build_metric()
        gamma = christoffel(m)
        xi, eta, zeta = (VectorFieldExpr.parse(f) for f in fields)
        worst_k, worst_c = 0.0, 0.0
        for eps in ACCEPTANCE_GRID:
            pts = _connection_points(name, rng, eps)
            kres = koszul_residual(m, gamma, xi, eta, zeta, pts, eps)
            worst_k = max(worst_k, kres.relative)
            worst_c = max(worst_c, metric_compatibility_residual(m, gamma, pts, eps))
        ok &= worst_k <= 1e-8 and worst_c <= 1e-8
        out[name] = {"koszul_relative": worst_k, "compatibility": worst_c}
    m = get_scenario("sphere2").build_metric()
    gamma = christoffel(m)
    err = 0.0
    for th in np.linspace(0.3, 2.8, 11):
        G = gamma.values((th, 0.7), 0.1)
        err = max(err, abs(G[0, 1, 1] + math.sin(th) * math.cos(th)), abs(G[1, 0, 1] - math.cos(th) / math.sin(th)))
    ok &= err <= 1e-9
    out["sphere_symbols_error"] = err
    return ok, out


@_criterion(9, "curvature identities", 30.0)
def criterion_9():
    rng = np.random.default_rng(9)
    out = {}
    ok = True
    for name in ("sphere2", "minkowski", "ppwave"):
        m = get_scenario(name).build_metric()
        bundle = curvature_bundle(m)
        worst = {}
        skipped = set()
        for eps in ACCEPTANCE_GRID:
            if name == "ppwave":
                pts = _connection_points(name, rng, eps, 10)
            elif name == "sphere2":
                pts = [(rng.uniform(0.3, 2.8), rng.uniform(0, 6)) for _ in range(10)]
            else:
                pts = [tuple(rng.uniform(-1, 1, 4)) for _ in range(3)]
            diag = curvature_diagnostics(bundle, m, pts, eps)
            skipped |= set(diag.skipped)
            for k, r in diag.identities.items():
                worst[k] = max(worst.get(k, 0.0), r.relative)
        ok &= all(v <= 1e-8 for v in worst.values())
        out[name] = {"relative": worst, "skipped": sorted(skipped)}
    m = get_scenario("sphere2").build_metric()
    bundle = curvature_bundle(m)
    err = max(abs(bundle.evaluate((th, 1.0), 0.1)["scalar"] - 2.0) for th in np.linspace(0.3, 2.8, 11))
    ok &= err <= 1e-9
    out["sphere_scalar_error"] = err
    return ok, out


CROSS_PATH_TOL = 1e-12


@_criterion(10, "cross-path oracle", 30.0)
def criterion_10():
    sc = get_scenario("ppwave")
    m = sc.build_metric()
    gamma = christoffel(m)
    reduced = PPWaveReduced(parse_folded(sc.profile), m.delta_net)
    init = sc.geodesic_init()
    worst = {}
    for x0, y0 in ((1.0, 1.0), (2.0, 1.0)):
        start = type(init)(init.t0, (init.position[0], init.position[1], x0, y0), init.velocity)
        for eps in ACCEPTANCE_GRID:
            tr = integrate_geodesic(gamma, start, 1.0, eps, tol=CROSS_PATH_TOL)
            _, Y, _ = reduced.integrate((0.0, 0.0, x0, 0.0, y0, 0.0), init.t0, 1.0, eps, tol=CROSS_PATH_TOL, samples=tr.t.size)
            full = np.column_stack([tr.positions[:, 1], tr.velocities[:, 1], tr.positions[:, 2], tr.velocities[:, 2], tr.positions[:, 3], tr.velocities[:, 3]])
            worst[f"x0={x0},eps={eps}"] = float(np.max(np.abs(full - Y)))
    return max(worst.values()) <= 1e-8, {"max_deviation": worst}


@_criterion(11, "property suite", 120.0)
def criterion_11():
    from .properties import run_properties

    results = run_properties()
    failed = [name for name, ok, _ in results if not ok]
    return not failed, {"checked": len(results), "failed": failed, "results": {name: detail for name, _, detail in results}}
