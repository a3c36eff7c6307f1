"""Generalized pseudo-Riemannian metrics given by ε-dependent component expressions."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .asymptotics import EpsilonGrid, FieldNet, InvertibilityReport, Region, check_invertible_on
from .errors import ConfigurationError, SingularityError, ValidationError
from .fieldexpr import CompiledExprs, DeltaNet, differentiate, parse_folded
from .fieldexpr import nodes as n
from .fieldexpr.nodes import EPS, Expr

MAX_DIM = 6
SINGULAR_DET = 1e-300


@dataclass(eq=False)
class GeneralizedMetric:
    dim: int
    coordinates: tuple[str, ...]
    components: tuple[tuple[Expr, ...], ...]
    parameters: dict[str, float] = field(default_factory=dict)
    delta_net: DeltaNet | None = None
    label: str = ""

    @cached_property
    def names(self) -> tuple[str, ...]:
        """Argument order of compiled functions: coordinates, then parameters."""
        return self.coordinates + tuple(self.parameters)

    @cached_property
    def param_values(self) -> tuple[float, ...]:
        return tuple(float(v) for v in self.parameters.values())

    def args(self, point: Sequence[float]) -> tuple[float, ...]:
        if len(point) != self.dim:
            raise ConfigurationError("point has wrong dimension", point=list(point), dim=self.dim)
        return tuple(float(p) for p in point) + self.param_values

    def compile(self, exprs: Sequence[Expr]) -> CompiledExprs:
        return CompiledExprs(exprs, self.names)

    @cached_property
    def _upper(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.dim) for j in range(i, self.dim)]

    @cached_property
    def _matrix_fn(self) -> CompiledExprs:
        return self.compile([self.components[i][j] for i, j in self._upper])

    def matrix(self, point: Sequence[float], eps: float) -> np.ndarray:
        vals = self._matrix_fn(self.args(point), eps, self.delta_net)
        g = np.empty((self.dim, self.dim))
        for (i, j), v in zip(self._upper, vals):
            g[i, j] = g[j, i] = v
        return g

    @cached_property
    def derivatives(self) -> list[list[list[Expr]]]:
        """d[k][i][j] = ∂_k g_ij, sharing objects across i <-> j."""
        out = []
        for k, x in enumerate(self.coordinates):
            rows = [[n.ZERO] * self.dim for _ in range(self.dim)]
            for i, j in self._upper:
                rows[i][j] = rows[j][i] = differentiate(self.components[i][j], x)
            out.append(rows)
        return out

    @cached_property
    def determinant_expr(self) -> Expr:
        return det_expr([list(row) for row in self.components])

    @cached_property
    def inverse_exprs(self) -> tuple[tuple[Expr, ...], ...]:
        """Symbolic inverse g^ij = cof(g)_ij / det g (symmetric, shared objects)."""
        det = self.determinant_expr
        rows = [[n.ZERO] * self.dim for _ in range(self.dim)]
        mat = [list(row) for row in self.components]
        for i, j in self._upper:
            cof = det_expr(_minor(mat, j, i))
            if (i + j) % 2:
                cof = n.neg(cof)
            rows[i][j] = rows[j][i] = n.div(cof, det)
        return tuple(tuple(r) for r in rows)

    def component(self, i: int, j: int) -> Expr:
        return self.components[i][j]

    def map_components(self, fn, label: str | None = None) -> "GeneralizedMetric":
        rows = [[n.ZERO] * self.dim for _ in range(self.dim)]
        for i, j in self._upper:
            rows[i][j] = rows[j][i] = fn(i, j, self.components[i][j])
        return GeneralizedMetric(
            self.dim,
            self.coordinates,
            tuple(tuple(r) for r in rows),
            dict(self.parameters),
            self.delta_net,
            label if label is not None else self.label,
        )

    def to_config(self) -> dict:
        comps = {}
        for i, j in self._upper:
            c = self.components[i][j]
            if not c.is_zero:
                comps[f"{self.coordinates[i]},{self.coordinates[j]}"] = str(c)
        out = {
            "label": self.label,
            "dim": self.dim,
            "coords": list(self.coordinates),
            "components": comps,
            "parameters": dict(self.parameters),
        }
        if self.delta_net is not None:
            out["delta"] = self.delta_net.to_config()
        return out


def _minor(mat: list[list[Expr]], row: int, col: int) -> list[list[Expr]]:
    return [[x for c, x in enumerate(r) if c != col] for rr, r in enumerate(mat) if rr != row]


def det_expr(mat: list[list[Expr]]) -> Expr:
    """Determinant by Laplace expansion along the sparsest row."""
    size = len(mat)
    if size == 0:
        return n.ONE
    if size == 1:
        return mat[0][0]
    if size == 2:
        return n.sub(n.mul(mat[0][0], mat[1][1]), n.mul(mat[0][1], mat[1][0]))
    row = max(range(size), key=lambda r: sum(x.is_zero for x in mat[r]))
    terms = []
    for col, entry in enumerate(mat[row]):
        if entry.is_zero:
            continue
        term = n.mul(entry, det_expr(_minor(mat, row, col)))
        terms.append(n.neg(term) if (row + col) % 2 else term)
    return n.total(terms)


def _split_key(key: str, coords: Sequence[str]) -> tuple[int, int]:
    if "," in key:
        a, b = (s.strip() for s in key.split(","))
        if a in coords and b in coords:
            return coords.index(a), coords.index(b)
    else:
        for i, a in enumerate(coords):
            if key.startswith(a) and key[len(a) :] in coords:
                return i, coords.index(key[len(a) :])
    raise ValidationError(f"component key {key!r} does not name two coordinates", coords=list(coords))


def build_metric(
    dim: int,
    coordinates: Sequence[str],
    component_texts,
    parameters: Mapping[str, float] | None = None,
    delta_net: DeltaNet | None = None,
    label: str = "",
) -> GeneralizedMetric:
    """Build a symmetric metric from component texts.

    ``component_texts`` is either a dim x dim matrix of strings or a mapping
    from keys like ``"uv"`` / ``"u,v"`` to strings; missing entries are "0".
    Giving only one of (i, j) and (j, i) is fine; giving both with different
    expressions is a validation error.
    """
    coordinates = tuple(coordinates)
    parameters = dict(parameters or {})
    if dim != len(coordinates) or len(set(coordinates)) != dim:
        raise ValidationError("need dim distinct coordinate names", dim=dim, coordinates=list(coordinates))
    if dim > MAX_DIM:
        raise ValidationError(f"dimension {dim} exceeds the supported maximum {MAX_DIM}")
    clash = set(coordinates) & (set(parameters) | {EPS})
    if clash:
        raise ValidationError("coordinate names clash with parameters or eps", names=sorted(clash))

    given: dict[tuple[int, int], str] = {}
    if isinstance(component_texts, Mapping):
        for key, text in component_texts.items():
            given[_split_key(key, coordinates)] = str(text)
    else:
        rows = list(component_texts)
        if len(rows) != dim or any(len(r) != dim for r in rows):
            raise ValidationError("component matrix must be dim x dim")
        for i, row in enumerate(rows):
            for j, text in enumerate(row):
                given[(i, j)] = str(text)

    allowed = set(coordinates) | set(parameters) | {EPS}
    comps = [[n.ZERO] * dim for _ in range(dim)]
    for i in range(dim):
        for j in range(i, dim):
            texts = [t for t in (given.get((i, j)), given.get((j, i))) if t is not None]
            exprs = [parse_folded(t) for t in texts]
            if len(exprs) == 2 and exprs[0] != exprs[1]:
                raise ValidationError(
                    "component matrix is not symmetric",
                    entry=[coordinates[i], coordinates[j]],
                    texts=texts,
                )
            e = exprs[0] if exprs else n.ZERO
            if n.contains_reference_only(e):
                raise ValidationError("heaviside/pos are reference-only and not allowed in metrics", component=texts[0])
            unknown = e.free_vars - allowed
            if unknown:
                raise ValidationError(f"unknown identifiers {sorted(unknown)}", component=texts[0])
            if n.contains_delta(e) and delta_net is None:
                raise ValidationError("metric uses delta but no delta net was given", component=texts[0])
            comps[i][j] = comps[j][i] = e
    return GeneralizedMetric(dim, coordinates, tuple(tuple(r) for r in comps), parameters, delta_net, label)


def metric_from_line_element(
    text: str,
    coordinates: Sequence[str],
    parameters: Mapping[str, float] | None = None,
    delta_net: DeltaNet | None = None,
    label: str = "",
) -> GeneralizedMetric:
    """Build a metric from a line element written with differentials ``d<coord>``.

    Coefficients are symmetrized: ``g_ij = 1/2 ∂²(ds²)/∂dx^i ∂dx^j``, so
    ``-du*dv`` puts -1/2 in both the uv and vu slots.
    """
    coordinates = tuple(coordinates)
    ds2 = parse_folded(text)
    diffs = [f"d{c}" for c in coordinates]
    comps = {}
    for i in range(len(coordinates)):
        for j in range(i, len(coordinates)):
            second = differentiate(differentiate(ds2, diffs[i]), diffs[j])
            if second.free_vars & set(diffs):
                raise ValidationError("line element is not quadratic in the differentials", text=text)
            coeff = n.mul(n.num(0.5), second)
            comps[f"{coordinates[i]},{coordinates[j]}"] = str(coeff)
    residual = n.substitute(ds2, {d: n.ZERO for d in diffs})
    if not residual.is_zero:
        raise ValidationError("line element has terms without differentials", text=text)
    return build_metric(len(coordinates), coordinates, comps, parameters, delta_net, label)


@dataclass
class MetricEvaluation:
    point: tuple[float, ...]
    eps: float
    matrix: np.ndarray
    det: float
    eigenvalues: np.ndarray

    @property
    def negative_count(self) -> int:
        return int(np.sum(self.eigenvalues < 0.0))


def evaluate_metric(m: GeneralizedMetric, point: Sequence[float], eps: float) -> MetricEvaluation:
    if not 0.0 < eps <= 1.0:
        raise ConfigurationError("eps must lie in (0, 1]", eps=eps)
    g = m.matrix(point, eps)
    g = 0.5 * (g + g.T)
    eig = np.linalg.eigvalsh(g)[::-1]
    det = float(np.linalg.det(g))
    return MetricEvaluation(tuple(float(p) for p in point), eps, g, det, eig)


def determinant_net(m: GeneralizedMetric) -> FieldNet:
    """The field net (ε, p) -> det g_ε(p)."""

    def sampler(eps, point):
        return evaluate_metric(m, point, eps).det

    return FieldNet(sampler, m.dim, f"det({m.label})")


def check_nondegenerate(m: GeneralizedMetric, region: Region, grid: EpsilonGrid) -> InvertibilityReport:
    """Grid test of inf_K |det g_ε| >= ε^m on the grid tail."""
    return check_invertible_on(determinant_net(m), region, grid)


@dataclass
class IndexReport:
    index: int | None
    stable: bool
    per_eps_signatures: list[tuple[float, tuple[int, int]]]
    min_abs_eigenvalue_table: list[tuple[float, float]]
    witnesses: list[MetricEvaluation] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "stable": self.stable,
            "signatures": [{"eps": e, "min": lo, "max": hi} for e, (lo, hi) in self.per_eps_signatures],
            "min_abs_eigenvalue": [{"eps": e, "value": v} for e, v in self.min_abs_eigenvalue_table],
            "witnesses": [
                {"point": list(w.point), "eps": w.eps, "eigenvalues": w.eigenvalues.tolist()} for w in self.witnesses
            ],
        }


def compute_index(m: GeneralizedMetric, region: Region, grid: EpsilonGrid) -> IndexReport:
    """Count negative eigenvalues over the lattice for every grid ε.

    The index is stable when the count is identical at every lattice point
    for every ε in the grid tail; otherwise the report carries two
    evaluations with different counts.
    """
    points = region.lattice()
    tail = set(grid.tail)
    signatures, min_abs = [], []
    first: MetricEvaluation | None = None
    witnesses: list[MetricEvaluation] = []
    for eps in grid:
        counts = []
        smallest = math.inf
        for p in points:
            ev = evaluate_metric(m, p, eps)
            counts.append(ev.negative_count)
            smallest = min(smallest, float(np.min(np.abs(ev.eigenvalues))))
            if eps in tail:
                if first is None:
                    first = ev
                elif ev.negative_count != first.negative_count and not witnesses:
                    witnesses = [first, ev]
        signatures.append((eps, (min(counts), max(counts))))
        min_abs.append((eps, smallest))
    stable = not witnesses
    index = first.negative_count if (stable and first is not None) else None
    return IndexReport(index, stable, signatures, min_abs, witnesses)


def inverse_metric_at(m: GeneralizedMetric, point: Sequence[float], eps: float) -> np.ndarray:
    """Pointwise inverse via the cofactor formula g^ij = cof(g)_ji / det g."""
    g = evaluate_metric(m, point, eps).matrix
    return cofactor_inverse(g, point=list(point), eps=eps)


def cofactor_inverse(g: np.ndarray, **context) -> np.ndarray:
    d = g.shape[0]
    det = float(np.linalg.det(g)) if d > 1 else float(g[0, 0])
    if abs(det) < SINGULAR_DET:
        raise SingularityError("metric determinant vanishes", det=det, **context)
    if d == 1:
        return np.array([[1.0 / det]])
    cof = np.empty_like(g)
    for i, j in itertools.product(range(d), repeat=2):
        minor = np.delete(np.delete(g, i, axis=0), j, axis=1)
        cof[i, j] = (-1) ** (i + j) * np.linalg.det(minor)
    return cof.T / det


def perturbed(m: GeneralizedMetric, h_texts, power: int = 8, label: str | None = None) -> GeneralizedMetric:
    """g + ε^power · h for a symmetric field h given like ``build_metric`` components."""
    h = build_metric(m.dim, m.coordinates, h_texts, m.parameters, m.delta_net)
    scale = n.power(n.var(EPS), n.num(power))
    return m.map_components(
        lambda i, j, c: n.add(c, n.mul(scale, h.components[i][j])),
        label if label is not None else f"{m.label}+eps^{power}h",
    )


def scaled(m: GeneralizedMetric, c: float) -> GeneralizedMetric:
    return m.map_components(lambda i, j, e: n.mul(n.num(c), e), f"{c}*{m.label}")


@dataclass
class PerturbationCheck:
    max_violation: float
    samples: int

    @property
    def holds(self) -> bool:
        return self.max_violation <= 0.0


def eigenvalue_perturbation_check(
    a: GeneralizedMetric, b: GeneralizedMetric, region: Region, grid: EpsilonGrid
) -> PerturbationCheck:
    """Check max_i |λ_a^i - λ_b^i| <= ‖g_a - g_b‖₂ at every (lattice point, ε).

    Reports the largest excess over the bound, less a rounding allowance of
    a few ulps of the eigenvalue scale (negative means the inequality holds).
    """
    worst = -math.inf
    count = 0
    for eps in grid:
        for p in region.lattice():
            ea, eb = evaluate_metric(a, p, eps), evaluate_metric(b, p, eps)
            gap = float(np.max(np.abs(ea.eigenvalues - eb.eigenvalues)))
            bound = float(np.linalg.norm(ea.matrix - eb.matrix, 2))
            slack = 8 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(ea.eigenvalues))))
            worst = max(worst, gap - bound - slack)
            count += 1
    return PerturbationCheck(worst, count)
