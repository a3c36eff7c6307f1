"""Levi-Civita connection of a generalized metric, built symbolically."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import ConfigurationError
from .fieldexpr import CompiledExprs, differentiate, parse_folded
from .fieldexpr import nodes as n
from .fieldexpr.nodes import Expr
from .metric import GeneralizedMetric


@dataclass(eq=False)
class ChristoffelField:
    """Γ[k][i][j] = Γ^k_ij; the (i, j) and (j, i) entries are the same object."""

    dim: int
    symbols: tuple[tuple[tuple[Expr, ...], ...], ...]
    metric: GeneralizedMetric

    @cached_property
    def _index(self) -> list[tuple[int, int, int]]:
        d = self.dim
        return [(k, i, j) for k in range(d) for i in range(d) for j in range(i, d)]

    @cached_property
    def _fn(self) -> CompiledExprs:
        return self.metric.compile([self.symbols[k][i][j] for k, i, j in self._index])

    def values(self, point: Sequence[float], eps: float) -> np.ndarray:
        vals = self._fn(self.metric.args(point), eps, self.metric.delta_net)
        out = np.zeros((self.dim,) * 3)
        for (k, i, j), v in zip(self._index, vals):
            out[k, i, j] = out[k, j, i] = v
        return out

    def nonzero(self) -> list[tuple[int, int, int, Expr]]:
        """Nonzero symbols with i <= j."""
        return [(k, i, j, self.symbols[k][i][j]) for k, i, j in self._index if not self.symbols[k][i][j].is_zero]

    def to_json(self) -> list[dict]:
        c = self.metric.coordinates
        return [{"k": c[k], "i": c[i], "j": c[j], "expr": str(e)} for k, i, j, e in self.nonzero()]


def christoffel(m: GeneralizedMetric) -> ChristoffelField:
    """Γ^k_ij = 1/2 g^km (∂_i g_jm + ∂_j g_im - ∂_m g_ij), with the inverse
    metric in cofactor form so every symbol is an exact expression per ε."""
    d = m.dim
    dg = m.derivatives
    ginv = m.inverse_exprs
    lower = {}
    for i in range(d):
        for j in range(i, d):
            for mm in range(d):
                s = n.sub(n.add(dg[i][j][mm], dg[j][i][mm]), dg[mm][i][j])
                lower[mm, i, j] = n.mul(n.num(0.5), s)
    symbols = [[[n.ZERO] * d for _ in range(d)] for _ in range(d)]
    for k in range(d):
        for i in range(d):
            for j in range(i, d):
                e = n.total(n.mul(ginv[k][mm], lower[mm, i, j]) for mm in range(d))
                symbols[k][i][j] = symbols[k][j][i] = e
    frozen = tuple(tuple(tuple(row) for row in block) for block in symbols)
    return ChristoffelField(d, frozen, m)


@dataclass(frozen=True)
class VectorFieldExpr:
    components: tuple[Expr, ...]

    @classmethod
    def parse(cls, texts: Sequence[str]) -> "VectorFieldExpr":
        return cls(tuple(parse_folded(str(t)) for t in texts))

    @classmethod
    def coordinate(cls, dim: int, axis: int) -> "VectorFieldExpr":
        return cls(tuple(n.ONE if k == axis else n.ZERO for k in range(dim)))

    def __len__(self):
        return len(self.components)

    def __getitem__(self, k):
        return self.components[k]


def _check(m: GeneralizedMetric, *fields: VectorFieldExpr) -> None:
    allowed = set(m.names) | {n.EPS}
    for f in fields:
        if len(f) != m.dim:
            raise ConfigurationError("vector field has wrong number of components", dim=m.dim)
        for c in f.components:
            if c.free_vars - allowed:
                raise ConfigurationError("vector field uses unknown identifiers", unknown=sorted(c.free_vars - allowed))


def covariant_derivative(m: GeneralizedMetric, gamma: ChristoffelField, xi: VectorFieldExpr, i: int) -> VectorFieldExpr:
    """D_{∂_i} ξ with components ∂_i ξ^k + Γ^k_ij ξ^j."""
    _check(m, xi)
    x = m.coordinates[i]
    comps = []
    for k in range(m.dim):
        terms = [differentiate(xi[k], x)]
        terms += [n.mul(gamma.symbols[k][i][j], xi[j]) for j in range(m.dim)]
        comps.append(n.total(terms))
    return VectorFieldExpr(tuple(comps))


def directional(m: GeneralizedMetric, xi: VectorFieldExpr, f: Expr) -> Expr:
    """ξ(f) = ξ^i ∂_i f."""
    return n.total(n.mul(xi[i], differentiate(f, x)) for i, x in enumerate(m.coordinates))


def covariant_along(m: GeneralizedMetric, gamma: ChristoffelField, xi: VectorFieldExpr, eta: VectorFieldExpr) -> VectorFieldExpr:
    """D_ξ η with components ξ^i (∂_i η^k + Γ^k_ij η^j)."""
    comps = []
    for k in range(m.dim):
        terms = []
        for i, x in enumerate(m.coordinates):
            inner = n.add(
                differentiate(eta[k], x),
                n.total(n.mul(gamma.symbols[k][i][j], eta[j]) for j in range(m.dim)),
            )
            terms.append(n.mul(xi[i], inner))
        comps.append(n.total(terms))
    return VectorFieldExpr(tuple(comps))


def bracket(m: GeneralizedMetric, xi: VectorFieldExpr, eta: VectorFieldExpr) -> VectorFieldExpr:
    """Lie bracket [ξ, η]^k = ξ(η^k) - η(ξ^k)."""
    return VectorFieldExpr(tuple(n.sub(directional(m, xi, eta[k]), directional(m, eta, xi[k])) for k in range(m.dim)))


def inner(m: GeneralizedMetric, a: VectorFieldExpr, b: VectorFieldExpr) -> Expr:
    terms = []
    for i in range(m.dim):
        for j in range(m.dim):
            terms.append(n.mul(m.components[i][j], n.mul(a[i], b[j])))
    return n.total(terms)


@dataclass
class IdentityResidual:
    """Largest absolute violation and the magnitude of the terms it came from."""

    max_abs: float
    scale: float

    @property
    def relative(self) -> float:
        if self.max_abs == 0.0:
            return 0.0
        return self.max_abs / self.scale if self.scale > 0 else float("inf")

    def within(self, rtol: float) -> bool:
        return self.max_abs <= rtol * self.scale


def koszul_terms(m: GeneralizedMetric, gamma: ChristoffelField, xi, eta, zeta) -> tuple[Expr, list[Expr]]:
    """Left side 2 g(D_ξ η, ζ) and the six right-hand terms of the Koszul formula."""
    _check(m, xi, eta, zeta)
    lhs = n.mul(n.num(2.0), inner(m, covariant_along(m, gamma, xi, eta), zeta))
    rhs = [
        directional(m, xi, inner(m, eta, zeta)),
        directional(m, eta, inner(m, zeta, xi)),
        n.neg(directional(m, zeta, inner(m, xi, eta))),
        n.neg(inner(m, xi, bracket(m, eta, zeta))),
        inner(m, eta, bracket(m, zeta, xi)),
        inner(m, zeta, bracket(m, xi, eta)),
    ]
    return lhs, rhs


def koszul_residual(m, gamma, xi, eta, zeta, points, eps: float) -> IdentityResidual:
    """max |2 g(D_ξ η, ζ) - (Koszul right side)| over the points."""
    lhs, rhs = koszul_terms(m, gamma, xi, eta, zeta)
    fn = m.compile([lhs] + rhs)
    worst, scale = 0.0, 0.0
    for p in points:
        vals = fn(m.args(p), eps, m.delta_net)
        worst = max(worst, abs(vals[0] - sum(vals[1:])))
        scale = max(scale, max(abs(v) for v in vals))
    return IdentityResidual(worst, scale)


def metric_compatibility_residual(m: GeneralizedMetric, gamma: ChristoffelField, points, eps: float) -> float:
    """max |∂_i g_jk - Γ^l_ij g_lk - Γ^l_ik g_jl| / (1 + |∂_i g_jk|)."""
    d = m.dim
    dfn = m.compile([m.derivatives[i][j][k] for i in range(d) for j in range(d) for k in range(d)])
    worst = 0.0
    for p in points:
        g = m.matrix(p, eps)
        G = gamma.values(p, eps)
        dg = np.array(dfn(m.args(p), eps, m.delta_net)).reshape(d, d, d)
        lhs = dg
        rhs = np.einsum("lij,lk->ijk", G, g) + np.einsum("lik,jl->ijk", G, g)
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / (1.0 + np.abs(dg)))))
    return worst


def _fd4(values: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order finite-difference derivative along axis 0 of uniformly spaced samples."""
    f = values
    out = np.empty_like(f)
    out[2:-2] = (-f[4:] + 8 * f[3:-1] - 8 * f[1:-3] + f[:-4]) / (12 * h)
    out[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
    out[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12 * h)
    out[-1] = (25 * f[-1] - 48 * f[-2] + 36 * f[-3] - 16 * f[-4] + 3 * f[-5]) / (12 * h)
    out[-2] = (3 * f[-1] + 10 * f[-2] - 18 * f[-3] + 6 * f[-4] - f[-5]) / (12 * h)
    return out


def along_curve_derivative(
    m: GeneralizedMetric,
    gamma: ChristoffelField,
    curve_samples: Sequence[tuple[float, Sequence[float], Sequence[float]]],
    xi_samples: Sequence[Sequence[float]],
    eps: float,
) -> np.ndarray:
    """Covariant derivative ξ' = (dξ^k/dt + Γ^k_ij γ'^i ξ^j) ∂_k along a sampled curve.

    ``curve_samples`` are (t, position, velocity) on a uniform t-grid with at
    least 5 points; dξ/dt uses fourth-order finite differences.
    """
    if len(curve_samples) < 5 or len(xi_samples) != len(curve_samples):
        raise ConfigurationError("need at least 5 curve samples and one ξ per sample", samples=len(curve_samples))
    t = np.array([s[0] for s in curve_samples], dtype=float)
    h = t[1] - t[0]
    if h <= 0 or not np.allclose(np.diff(t), h, rtol=1e-9, atol=0.0):
        raise ConfigurationError("curve samples must lie on a uniform increasing t-grid")
    xi = np.array(xi_samples, dtype=float)
    out = _fd4(xi, h)
    for s, (_, pos, vel) in enumerate(curve_samples):
        G = gamma.values(pos, eps)
        out[s] += np.einsum("kij,i,j->k", G, np.asarray(vel, float), xi[s])
    return out
