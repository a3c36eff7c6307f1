"""Association: pairings with test densities, ε→0 extrapolation and shadows."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize

from .asymptotics import EpsilonGrid, FieldNet, Region
from .errors import ConfigurationError, QuadratureError, ValidationError
from .fieldexpr import CompiledExprs, DeltaNet, differentiate, parse_folded
from .fieldexpr import nodes as n
from .fieldexpr.nodes import Expr
from .geodesic import GeodesicFamily

PAIR_EPSABS = 1e-11
ROUNDOFF_ACCEPT = 1e-9
MIN_ORDER, MAX_ORDER = 0.25, 4.0
TRUST_RESIDUAL = 0.3
TRUST_POINTS = 4
UNTRUSTWORTHY_LIMIT = 0.10


@dataclass(eq=False)
class TestDensity:
    """A compactly supported density φ(var) on [a, b]; zero outside by definition.

    ``edge_value`` is the largest |φ| found at 16 points hugging the support
    ends from inside (the ends themselves are never evaluated).  Above 1e-12 the density is a truncation (discontinuous
    at the edges) and ``truncated`` is set.
    """

    __test__ = False  # not a pytest class

    expression: Expr
    variable: str
    support: tuple[float, float]
    label: str = ""
    edge_value: float = field(init=False, default=0.0)

    def __post_init__(self):
        a, b = map(float, self.support)
        if not (math.isfinite(a) and math.isfinite(b) and a < b):
            raise ConfigurationError("test density support must be a bounded interval", support=[a, b])
        self.support = (a, b)
        extra = self.expression.free_vars - {self.variable}
        if extra:
            raise ConfigurationError("test density may depend only on its variable", unknown=sorted(extra))
        if n.contains_delta(self.expression) or n.contains_reference_only(self.expression):
            raise ValidationError("test density must be smooth")
        self._fn = CompiledExprs([self.expression], (self.variable,))
        w = (b - a) * 1e-4
        probes = [a + w * k / 8 for k in range(1, 9)] + [b - w * k / 8 for k in range(1, 9)]
        self.edge_value = max(abs(self._fn((t,), 1.0)[0]) for t in probes)

    @classmethod
    def parse(cls, text: str, variable: str, support: tuple[float, float]) -> "TestDensity":
        return cls(parse_folded(text), variable, support, label=text)

    @property
    def truncated(self) -> bool:
        return self.edge_value > 1e-12

    def __call__(self, t: float) -> float:
        a, b = self.support
        # the ends are excluded so bump densities never divide by zero there
        if t <= a or t >= b:
            return 0.0
        return self._fn((t,), 1.0)[0]

    def derivative(self, order: int = 1) -> "TestDensity":
        e = self.expression
        for _ in range(order):
            e = differentiate(e, self.variable)
        return TestDensity(e, self.variable, self.support, f"d^{order}({self.label or self.expression})")


def _breakpoints(u: FieldNet, variable: str, eps: float, support: tuple[float, float]) -> list[float]:
    """Panel boundaries at the edges of each delta window along the pairing variable."""
    net = u.delta_net
    if u.expression is None or net is None:
        return []
    r = net.support_radius(eps)
    a, b = support
    pts = []
    for arg in n.delta_arguments(u.expression):
        if arg.free_vars - {variable}:
            continue
        slope = differentiate(arg, variable)
        if slope.free_vars or not differentiate(slope, variable).is_zero:
            continue  # not affine in the variable
        fn = CompiledExprs([arg, slope], (variable,))
        a0, s = fn((0.0,), eps, net)
        if s == 0:
            continue
        centre = -a0 / s
        half = r / abs(s)
        pts += [centre - half, centre, centre + half]
    return sorted({p for p in pts if a < p < b})


def pair(u: FieldNet, phi: TestDensity, eps: float) -> float:
    """∫ u_ε(t) φ(t) dt over the support of φ (adaptive Gauss-Kronrod).

    ``u`` must be a one-variable field net; its variable is paired with φ's.
    """
    if u.dim != 1:
        raise ConfigurationError("pairing needs a field net in one variable", dim=u.dim)
    if u.variables and u.variables[0] != phi.variable:
        raise ConfigurationError("field and test density use different variables", field=u.variables[0], density=phi.variable)
    a, b = phi.support
    pts = _breakpoints(u, phi.variable, eps, phi.support)

    def integrand(t):
        return u(eps, (t,)) * phi(t)

    res = integrate.quad(integrand, a, b, points=pts or None, epsabs=PAIR_EPSABS, epsrel=1e-12, limit=500, full_output=1)
    value, abserr = res[0], res[1]
    if len(res) > 3 and abserr > ROUNDOFF_ACCEPT * max(1.0, abs(value)):
        # QUADPACK flags roundoff long before the result is unusable; only a large error estimate fails
        raise QuadratureError(f"pairing quadrature did not converge: {res[3]}", label=u.label, eps=eps, abserr=abserr)
    return value


@dataclass
class ShadowEstimate:
    limit: float
    fitted_order: float
    coefficient: float
    samples: list[tuple[float, float]]
    fit_residual: float
    trustworthy: bool

    def to_json(self) -> dict:
        return {
            "limit": self.limit,
            "fitted_order": self.fitted_order,
            "coefficient": self.coefficient,
            "samples": [{"eps": e, "value": v} for e, v in self.samples],
            "fit_residual": self.fit_residual,
            "trustworthy": self.trustworthy,
        }


def _linear_fit(eps: np.ndarray, vals: np.ndarray, p) -> tuple:
    """Least-squares L, C of vals ≈ L + C ε^p; vectorized over an array of p."""
    X = eps[None, :] ** np.atleast_1d(p)[:, None]
    xm = X.mean(axis=1, keepdims=True)
    vm = vals.mean()
    dx = X - xm
    C = (dx @ (vals - vm)) / np.einsum("ij,ij->i", dx, dx)
    L = vm - C * xm[:, 0]
    r = vals[None, :] - L[:, None] - C[:, None] * X
    sse = np.einsum("ij,ij->i", r, r)
    if np.ndim(p) == 0:
        return float(L[0]), float(C[0]), float(sse[0])
    return L, C, sse


def estimate_shadow(samples: Sequence[tuple[float, float]]) -> ShadowEstimate:
    """Fit value = L + C ε^p (p in [0.25, 4]) and report L as the ε→0 limit.

    All supplied samples are used: the caller's grid plays the role of the
    tail.  The fit residual is the RMS misfit of log|value - L| against the
    line log|C| + p log ε.
    """
    samples = [(float(e), float(v)) for e, v in samples]
    eps = np.array([e for e, _ in samples])
    vals = np.array([v for _, v in samples])
    if len(samples) < 2 or np.any(np.diff(eps) >= 0):
        raise ConfigurationError("shadow extrapolation needs decreasing ε samples", count=len(samples))
    spread = float(np.max(vals) - np.min(vals))
    if spread <= 4 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(vals)))):
        # ε-independent values: the limit is the value itself
        return ShadowEstimate(float(vals[-1]), math.inf, 0.0, samples, 0.0, len(samples) >= TRUST_POINTS)
    if len(samples) < 3:
        return ShadowEstimate(float(vals[-1]), math.nan, math.nan, samples, math.inf, False)

    ps = np.linspace(MIN_ORDER, MAX_ORDER, 376)
    sse = _linear_fit(eps, vals, ps)[2]
    k = int(np.argmin(sse))
    lo, hi = ps[max(k - 1, 0)], ps[min(k + 1, len(ps) - 1)]
    if hi > lo:
        res = optimize.minimize_scalar(lambda p: _linear_fit(eps, vals, p)[2], bounds=(lo, hi), method="bounded", options={"xatol": 1e-8})
        p = float(res.x) if res.fun <= sse[k] else float(ps[k])
    else:
        p = float(ps[k])
    L, C, _ = _linear_fit(eps, vals, p)

    dev = np.abs(vals - L)
    floor = 1e-300
    if C == 0 or np.any(dev <= floor):
        resid = math.inf
    else:
        resid = float(np.sqrt(np.mean((np.log(dev) - np.log(abs(C)) - p * np.log(eps)) ** 2)))
        # sign flips of value - L are not a power law
        if np.any(np.sign(vals - L) != np.sign(C)):
            resid = math.inf
    trustworthy = bool(len(samples) >= TRUST_POINTS and resid <= TRUST_RESIDUAL)
    return ShadowEstimate(L, p, C, samples, resid, trustworthy)


# -- k-association -----------------------------------------------------------


@dataclass
class KAssociationReport:
    k: int
    eps: list[float]
    sups: dict[str, list[float]]
    passed: bool
    failing: list[str]

    def to_json(self) -> dict:
        return {"k": self.k, "eps": self.eps, "sups": self.sups, "passed": self.passed, "failing": self.failing}


def _multi_indices(variables: Sequence[str], k: int):
    yield ()
    for order in range(1, k + 1):
        yield from itertools.combinations_with_replacement(variables, order)


def k_association_check(u: FieldNet, target: Expr | str, k: int, region: Region, grid: EpsilonGrid) -> KAssociationReport:
    """sup over the region of |∂^α(u_ε - f)| for every |α| ≤ k, per ε.

    Passes iff every table tends to 0 monotonically on the grid tail
    (non-increasing, and either identically 0 or strictly smaller at the end).
    Derivatives are coordinate partials.
    """
    if not 0 <= k <= 2:
        raise ConfigurationError("k-association is supported for 0 <= k <= 2", k=k)
    if u.expression is None:
        raise ConfigurationError("k-association needs a field net built from an expression")
    if isinstance(target, str):
        target = parse_folded(target)
    if target.free_vars - set(u.variables) or n.contains_delta(target):
        raise ConfigurationError("target must be a smooth ε-free field in the net's variables")
    if n.EPS in target.free_vars:
        raise ConfigurationError("target must not depend on eps")
    if region.dim != u.dim:
        raise ConfigurationError("region dimension differs from the field's", region=region.dim, field=u.dim)
    diff = n.sub(u.expression, target)
    exprs, labels = [], []
    for alpha in _multi_indices(u.variables, k):
        e = diff
        for x in alpha:
            e = differentiate(e, x)
        exprs.append(e)
        labels.append("d" + "".join(alpha) if alpha else "value")
    fn = CompiledExprs(exprs, u.variables)
    pts = region.lattice()
    sups = {lab: [] for lab in labels}
    for eps in grid:
        worst = np.zeros(len(exprs))
        for p in pts:
            worst = np.maximum(worst, np.abs(fn(tuple(p), eps, u.delta_net)))
        for lab, w in zip(labels, worst):
            sups[lab].append(float(w))
    tail_start = len(grid) - len(grid.tail)
    failing = []
    for lab, vals in sups.items():
        tail = vals[tail_start:]
        monotone = all(b <= a for a, b in zip(tail, tail[1:]))
        shrinking = all(v == 0.0 for v in tail) or tail[-1] < tail[0]
        if not (monotone and shrinking):
            failing.append(lab)
    return KAssociationReport(k, list(grid), sups, not failing, failing)


# -- geodesic shadows --------------------------------------------------------


@dataclass
class CoordinateShadow:
    limits: np.ndarray
    orders: np.ndarray
    trustworthy: np.ndarray
    max_deviation: float | None = None

    @property
    def trustworthy_fraction(self) -> float:
        return float(np.mean(self.trustworthy))

    def to_json(self) -> dict:
        finite = self.orders[np.isfinite(self.orders)]
        return {
            "max_dev": self.max_deviation,
            "fitted_orders": {
                "median": float(np.median(finite)) if finite.size else None,
                "min": float(np.min(finite)) if finite.size else None,
                "max": float(np.max(finite)) if finite.size else None,
            },
            "trustworthy_fraction": self.trustworthy_fraction,
        }


@dataclass
class GeodesicShadowReport:
    t: np.ndarray
    coordinates: dict[str, CoordinateShadow]
    exclusion_radius: float
    flagged: bool

    def to_json(self) -> dict:
        out = {name: c.to_json() for name, c in self.coordinates.items()}
        return {"coordinates": out, "exclusion_radius": self.exclusion_radius, "flagged": self.flagged}


def parse_closed_forms(text: str) -> dict[str, str]:
    """'x:1+pos(u);y:1-pos(u)' -> {'x': '1+pos(u)', 'y': '1-pos(u)'}."""
    out = {}
    for part in filter(None, (p.strip() for p in text.split(";"))):
        name, sep, expr = part.partition(":")
        if not sep or not name.strip() or not expr.strip():
            raise ConfigurationError("closed forms must read 'coord:expr;...'", text=text)
        out[name.strip()] = expr.strip()
    return out


def geodesic_shadow(
    family: GeodesicFamily,
    closed_forms: dict[str, str] | None = None,
    exclusion_radius: float | None = None,
    impulse_at: float = 0.0,
    support_radius: Callable[[float], float] | None = None,
) -> GeodesicShadowReport:
    """Per-t extrapolated limit curves of every coordinate.

    At each t the fit uses the members whose impulse window
    |t - impulse_at| < support_radius(ε) does not contain t, when at least
    three do; members still inside the impulse are not yet asymptotic.
    Closed forms may use heaviside/pos in a single variable, which is bound
    to the curve parameter.  Deviations exclude |t - impulse_at| <
    exclusion_radius (default: the widest support radius of the family).
    """
    closed_forms = dict(closed_forms or {})
    radius = support_radius or (lambda e: e)
    if exclusion_radius is None:
        exclusion_radius = max(radius(e) for e in family.eps)
    unknown = set(closed_forms) - set(family.coordinates)
    if unknown:
        raise ConfigurationError("closed form names an unknown coordinate", unknown=sorted(unknown))
    order = np.argsort(family.eps)[::-1]
    eps = np.array([family.eps[i] for i in order])
    radii = np.array([radius(e) for e in eps])
    t = family.t
    keep = np.abs(t - impulse_at) >= exclusion_radius
    members = []
    for tt in t:
        outside = np.abs(tt - impulse_at) >= radii
        members.append(np.flatnonzero(outside) if outside.sum() >= 3 else np.arange(eps.size))
    coords = {}
    flagged = False
    for name in family.coordinates:
        data = family.coordinate(name)[order]
        limits = np.empty(t.size)
        orders = np.empty(t.size)
        trust = np.empty(t.size, dtype=bool)
        for s, idx in enumerate(members):
            est = estimate_shadow(list(zip(eps[idx], data[idx, s])))
            limits[s], orders[s], trust[s] = est.limit, est.fitted_order, est.trustworthy
        shadow = CoordinateShadow(limits, orders, trust)
        if 1.0 - shadow.trustworthy_fraction > UNTRUSTWORTHY_LIMIT:
            flagged = True
        if name in closed_forms:
            expr = parse_folded(closed_forms[name])
            free = sorted(expr.free_vars)
            if len(free) > 1:
                raise ConfigurationError("closed form must use one variable", coordinate=name, variables=free)
            fn = CompiledExprs([expr], tuple(free) or ("_t",))
            ref = np.array([fn((tt,), 1.0)[0] for tt in t])
            shadow.max_deviation = float(np.max(np.abs(limits - ref)[keep])) if keep.any() else 0.0
        coords[name] = shadow
    return GeodesicShadowReport(t, coords, float(exclusion_radius), flagged)
