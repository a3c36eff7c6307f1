"""ε-nets of numbers and fields, and grid-based asymptotic classifiers.

Every quantifier "for ε small enough" is realized on the tail of a finite
:class:`EpsilonGrid` (its last half).  These are heuristics that report grid
evidence; they certify nothing about ε outside the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, EvaluationError
from .fieldexpr import CompiledExprs, DeltaNet, parse_folded
from .fieldexpr.nodes import EPS, Expr

MAX_EXPONENT = 32
MODERATE_RESIDUAL = 0.2


@dataclass(frozen=True)
class EpsilonGrid:
    values: tuple[float, ...]
    spacing: str = "custom"

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if len(vals) < 4:
            raise ConfigurationError("an epsilon grid needs at least 4 entries", values=list(vals))
        if not 0.0 < vals[-1] or vals[0] > 1.0:
            raise ConfigurationError("epsilon values must lie in (0, 1]", values=list(vals))
        if any(a <= b for a, b in zip(vals, vals[1:])):
            raise ConfigurationError("epsilon values must be strictly decreasing", values=list(vals))

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]

    @property
    def tail(self) -> tuple[float, ...]:
        return self.values[len(self.values) // 2 :]

    @property
    def smallest(self) -> float:
        return self.values[-1]


def make_epsilon_grid(e_max: float, e_min: float, count: int) -> EpsilonGrid:
    """Geometric grid from ``e_max`` down to ``e_min`` with ``count`` entries."""
    if not (0.0 < e_min < e_max <= 1.0):
        raise ConfigurationError("need 0 < e_min < e_max <= 1", e_max=e_max, e_min=e_min)
    if int(count) != count or count < 4:
        raise ConfigurationError("need count >= 4", count=count)
    count = int(count)
    ratio = (e_min / e_max) ** (1.0 / (count - 1))
    values = [e_max * ratio**i for i in range(count)]
    values[-1] = e_min
    return EpsilonGrid(tuple(values), "geometric")


@dataclass
class ScalarNet:
    """A net of numbers (r_ε), given as a deterministic rule ε -> r_ε."""

    sampler: Callable[[float], float]
    label: str = ""

    def __call__(self, eps: float) -> float:
        value = float(self.sampler(eps))
        if not math.isfinite(value):
            raise EvaluationError("non-finite net value", label=self.label, eps=eps)
        return value

    def scaled(self, c: float) -> "ScalarNet":
        return ScalarNet(lambda eps: c * self.sampler(eps), f"{c}*{self.label}")


@dataclass
class FieldNet:
    """A net of fields (u_ε) on R^dim, given as a rule (ε, point) -> u_ε(point)."""

    sampler: Callable[[float, Sequence[float]], float]
    dim: int
    label: str = ""
    expression: Expr | None = field(default=None, repr=False)
    variables: tuple[str, ...] = ()
    delta_net: DeltaNet | None = field(default=None, repr=False)

    def __call__(self, eps: float, point: Sequence[float]) -> float:
        value = float(self.sampler(eps, point))
        if not math.isfinite(value):
            raise EvaluationError("non-finite field value", label=self.label, eps=eps, point=list(point))
        return value

    @classmethod
    def from_expr(
        cls,
        expr: Expr | str,
        variables: Sequence[str],
        parameters: dict[str, float] | None = None,
        delta_net: DeltaNet | None = None,
        label: str = "",
    ) -> "FieldNet":
        """Field net from an expression in ``variables`` (plus fixed parameters and eps)."""
        if isinstance(expr, str):
            label = label or expr
            expr = parse_folded(expr)
        parameters = dict(parameters or {})
        names = tuple(variables) + tuple(parameters)
        fn = CompiledExprs([expr], names)
        pvals = tuple(parameters.values())

        def sampler(eps, point):
            # plain floats so a zero division raises instead of warning
            return fn(tuple(float(v) for v in point) + pvals, eps, delta_net)[0]

        return cls(sampler, len(variables), label or str(expr), expr, tuple(variables), delta_net)

    def at(self, point: Sequence[float]) -> ScalarNet:
        point = tuple(point)
        return ScalarNet(lambda eps: self.sampler(eps, point), f"{self.label}@{list(point)}")


@dataclass(frozen=True)
class Region:
    """A box of closed intervals sampled on a regular lattice."""

    box: tuple[tuple[float, float], ...]
    sample_count: int | tuple[int, ...] = 64

    def __post_init__(self):
        box = tuple((float(a), float(b)) for a, b in self.box)
        object.__setattr__(self, "box", box)
        if not box:
            raise ConfigurationError("region needs at least one interval")
        for a, b in box:
            if not (math.isfinite(a) and math.isfinite(b) and a <= b):
                raise ConfigurationError("region intervals must be nonempty and bounded", box=list(box))
        for c in self.counts:
            if c < 1:
                raise ConfigurationError("sample counts must be positive", sample_count=self.sample_count)

    @property
    def dim(self) -> int:
        return len(self.box)

    @property
    def counts(self) -> tuple[int, ...]:
        if isinstance(self.sample_count, int):
            return (self.sample_count,) * len(self.box)
        return tuple(int(c) for c in self.sample_count)

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(a, b, c) if c > 1 else np.array([0.5 * (a + b)]) for (a, b), c in zip(self.box, self.counts)]

    def lattice(self) -> np.ndarray:
        """All lattice points, shape (N, dim), in C order over the axes."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def cell_size(self) -> tuple[float, ...]:
        return tuple((b - a) / (c - 1) if c > 1 else 0.0 for (a, b), c in zip(self.box, self.counts))


def parse_region(text: str, sample_count: int | None = None) -> Region:
    """Parse ``"[a,b]x[c,d]"`` (or ``"[a,b];[c,d]"``) into a Region."""
    parts = [p for p in text.replace("x", ";").replace("×", ";").split(";") if p.strip()]
    box = []
    for part in parts:
        part = part.strip().strip("[]")
        try:
            a, b = (float(v) for v in part.split(","))
        except ValueError as exc:
            raise ConfigurationError(f"cannot parse region interval {part!r}") from exc
        box.append((a, b))
    return Region(tuple(box), sample_count or 64)


@dataclass
class GrowthReport:
    label: str
    estimated_order: float
    fit_residual: float
    per_eps_sup: list[tuple[float, float]]
    tail_decay: float
    verdict: str

    def negligible_like(self, m: float) -> bool:
        """Whether the tail decay exponent beats ε^m."""
        return self.tail_decay >= m

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "grid": [e for e, _ in self.per_eps_sup],
            "table": [{"eps": e, "value": v} for e, v in self.per_eps_sup],
            "order": self.estimated_order,
            "fit_residual": self.fit_residual,
            "tail_decay": self.tail_decay,
            "verdict": self.verdict,
        }


def _log_slope(eps: Sequence[float], values: Sequence[float]) -> tuple[float, float]:
    """Slope and RMS residual of log(values) against log(eps)."""
    x = np.log(np.asarray(eps, dtype=float))
    with np.errstate(divide="ignore"):
        y = np.log(np.asarray(values, dtype=float))
    if not np.all(np.isfinite(y)):
        return math.inf, math.inf
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return float(slope), float(np.sqrt(np.mean(resid**2)))


def _sample_sup(net, grid: EpsilonGrid, region: Region | None) -> list[tuple[float, float]]:
    if isinstance(net, ScalarNet):
        return [(eps, abs(net(eps))) for eps in grid]
    if region is None:
        raise ConfigurationError("a field net needs a region")
    points = region.lattice()
    return [(eps, max(abs(net(eps, p)) for p in points)) for eps in grid]


def estimate_growth_order(net: ScalarNet | FieldNet, grid: EpsilonGrid, region: Region | None = None) -> GrowthReport:
    """Fit sup|u_ε| ≈ ε^(-N) on the grid and classify the net.

    Verdicts: ``negligible-like(32)`` when the decay on the grid tail beats
    ε^32 (the end of the representable exponent range), ``moderate-like``
    when the fitted order is at most 32 with log-log residual at most 0.2,
    otherwise ``inconclusive``.  ``negligible_like(m)`` answers for smaller m.
    """
    table = _sample_sup(net, grid, region)
    eps = [e for e, _ in table]
    # exact underflow is floored at the smallest subnormal so the fits stay finite
    sups = [max(v, 5e-324) for _, v in table]
    slope, resid = _log_slope(eps, sups)
    order = -slope

    tail = grid.tail
    tail_sups = sups[len(sups) - len(tail) :]
    tail_decay, _ = _log_slope(tail, tail_sups)

    if tail_decay > MAX_EXPONENT:
        verdict = f"negligible-like({MAX_EXPONENT})"
    elif math.isfinite(order) and order <= MAX_EXPONENT and resid <= MODERATE_RESIDUAL:
        verdict = "moderate-like"
    else:
        verdict = "inconclusive"
    label = getattr(net, "label", "")
    return GrowthReport(label, float(order), float(resid), table, float(tail_decay), verdict)


@dataclass
class StrictNonzeroResult:
    decision: bool
    witness_exponent: int | None
    table: list[tuple[float, float]]

    def to_json(self) -> dict:
        return {
            "decision": self.decision,
            "witness_exponent": self.witness_exponent,
            "table": [{"eps": e, "value": v} for e, v in self.table],
        }


def _smallest_exponent(pairs: Sequence[tuple[float, float]]) -> int | None:
    """Smallest integer q in 0..32 with value >= ε^q for every (ε, value)."""
    for q in range(MAX_EXPONENT + 1):
        if all(v >= e**q for e, v in pairs):
            return q
    return None


def is_strictly_nonzero(net: ScalarNet, grid: EpsilonGrid) -> StrictNonzeroResult:
    """Grid test of |r_ε| >= ε^m on the tail for some integer m in 0..32."""
    table = [(eps, abs(net(eps))) for eps in grid]
    tail = table[len(table) - len(grid.tail) :]
    m = _smallest_exponent(tail)
    return StrictNonzeroResult(m is not None, m, table)


@dataclass
class InvertibilityReport:
    label: str
    decision: bool
    exponent: int | None
    worst_point: tuple[float, ...]
    inf_table: list[tuple[float, float]]
    sign_change: bool = False

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "grid": [e for e, _ in self.inf_table],
            "table": [{"eps": e, "value": v} for e, v in self.inf_table],
            "order": self.exponent,
            "verdict": "invertible" if self.decision else "not-invertible",
            "decision": self.decision,
            "worst_point": list(self.worst_point),
            "sign_change": self.sign_change,
        }


def _sign_change(values: np.ndarray) -> tuple[tuple[int, ...], tuple[int, ...]] | None:
    """First pair of lattice neighbours with opposite signs (or an exact zero)."""
    zeros = np.argwhere(values == 0.0)
    if len(zeros):
        idx = tuple(int(i) for i in zeros[0])
        return idx, idx
    for axis in range(values.ndim):
        lo = [slice(None)] * values.ndim
        hi = [slice(None)] * values.ndim
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        flips = np.argwhere(np.sign(values[tuple(lo)]) * np.sign(values[tuple(hi)]) < 0)
        if len(flips):
            a = tuple(int(i) for i in flips[0])
            b = list(a)
            b[axis] += 1
            return a, tuple(b)
    return None


def _bisect(field: FieldNet, eps: float, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    fa = field(eps, a)
    for _ in range(80):
        mid = 0.5 * (a + b)
        fm = field(eps, mid)
        if fm == 0.0:
            return mid
        if (fm < 0) == (fa < 0):
            a, fa = mid, fm
        else:
            b = mid
    return 0.5 * (a + b)


def check_invertible_on(field: FieldNet, region: Region, grid: EpsilonGrid) -> InvertibilityReport:
    """Grid test of inf_K |u_ε| >= ε^q on the tail for some integer q in 0..32.

    The infimum is taken over the region's lattice.  A sign change between
    neighbouring lattice points forces the infimum to zero (the field is
    continuous for each ε); the zero is then located by bisection and
    reported as the worst point.
    """
    if field.dim != region.dim:
        raise ConfigurationError("field and region dimensions differ", field_dim=field.dim, region_dim=region.dim)
    points = region.lattice()
    shape = region.counts
    inf_table = []
    worst = tuple(points[0])
    changed_any = False
    for eps in grid:
        vals = np.array([field(eps, p) for p in points]).reshape(shape)
        change = _sign_change(vals)
        if change is not None:
            changed_any = True
            inf_table.append((eps, 0.0))
            a = points[np.ravel_multi_index(change[0], shape)]
            b = points[np.ravel_multi_index(change[1], shape)]
            worst = tuple(float(v) for v in (a if change[0] == change[1] else _bisect(field, eps, a, b)))
        else:
            flat = np.abs(vals).ravel()
            k = int(np.argmin(flat))
            inf_table.append((eps, float(flat[k])))
            worst = tuple(float(v) for v in points[k])
    tail = inf_table[len(inf_table) - len(grid.tail) :]
    q = _smallest_exponent(tail)
    return InvertibilityReport(field.label, q is not None, q, worst, inf_table, changed_any)


def sub_region(region: Region, lower: Sequence[int], upper: Sequence[int]) -> Region:
    """Sub-box spanned by lattice indices [lower, upper] with the same spacing."""
    axes = region.axes()
    box = tuple((float(ax[lo]), float(ax[hi])) for ax, lo, hi in zip(axes, lower, upper))
    counts = tuple(hi - lo + 1 for lo, hi in zip(lower, upper))
    return Region(box, counts)


EXAMPLE_24 = "eps^(x^2/(x^4 + eps^4))"


def example24_net() -> FieldNet:
    """u_ε(x) = ε^(x²/(x⁴+ε⁴)): pointwise strictly nonzero, not uniformly so near 0."""
    return FieldNet.from_expr(EXAMPLE_24, ["x"], label="example24")


__all__ = [
    "EPS",
    "EpsilonGrid",
    "FieldNet",
    "GrowthReport",
    "InvertibilityReport",
    "Region",
    "ScalarNet",
    "StrictNonzeroResult",
    "check_invertible_on",
    "estimate_growth_order",
    "example24_net",
    "is_strictly_nonzero",
    "make_epsilon_grid",
    "parse_region",
    "sub_region",
]
