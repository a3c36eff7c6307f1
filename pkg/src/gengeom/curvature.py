"""Riemann, Ricci, scalar and Einstein curvature as exact expressions per ε.

Sign convention: R[a][b][c][d] holds R_abc^d with

    R_abc^d = ∂_a Γ^d_bc - ∂_b Γ^d_ac + Γ^d_ae Γ^e_bc - Γ^d_be Γ^e_ac

and Ricci contracts the first lower index with the upper one,
R_ab = R_cab^c.  With this choice the unit 2-sphere has Ricci = g and
scalar curvature +2.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DifferentiationError
from .fieldexpr import CompiledExprs, differentiate
from .fieldexpr import nodes as n
from .fieldexpr.nodes import Expr
from .levicivita import ChristoffelField, IdentityResidual, christoffel
from .metric import GeneralizedMetric

log = logging.getLogger(__name__)

IDENTITIES = ("antisymmetry_ab", "antisymmetry_cd", "pair_symmetry", "first_bianchi", "contracted_bianchi")


def riemann(m: GeneralizedMetric, gamma: ChristoffelField) -> tuple:
    """d^4 array R[a][b][c][d] = R_abc^d; R[b][a] is the negation of R[a][b]."""
    d = m.dim
    x = m.coordinates
    G = gamma.symbols
    R = [[[[n.ZERO] * d for _ in range(d)] for _ in range(d)] for _ in range(d)]
    for a in range(d):
        for b in range(a + 1, d):
            for c in range(d):
                for dd in range(d):
                    terms = [
                        differentiate(G[dd][b][c], x[a]),
                        n.neg(differentiate(G[dd][a][c], x[b])),
                    ]
                    for e in range(d):
                        terms.append(n.mul(G[dd][a][e], G[e][b][c]))
                        terms.append(n.neg(n.mul(G[dd][b][e], G[e][a][c])))
                    val = n.total(terms)
                    R[a][b][c][dd] = val
                    R[b][a][c][dd] = n.neg(val)
    return tuple(tuple(tuple(tuple(z) for z in y) for y in row) for row in R)


def ricci(R, dim: int) -> tuple:
    """R_ab = R_cab^c, symmetric with shared objects."""
    out = [[n.ZERO] * dim for _ in range(dim)]
    for a in range(dim):
        for b in range(a, dim):
            out[a][b] = out[b][a] = n.total(R[c][a][b][c] for c in range(dim))
    return tuple(tuple(r) for r in out)


def scalar(ric, m: GeneralizedMetric) -> Expr:
    ginv = m.inverse_exprs
    return n.total(n.mul(ginv[a][b], ric[a][b]) for a in range(m.dim) for b in range(m.dim))


def einstein(ric, scal: Expr, m: GeneralizedMetric) -> tuple:
    d = m.dim
    half_r = n.mul(n.num(0.5), scal)
    out = [[n.ZERO] * d for _ in range(d)]
    for a in range(d):
        for b in range(a, d):
            out[a][b] = out[b][a] = n.sub(ric[a][b], n.mul(half_r, m.components[a][b]))
    return tuple(tuple(r) for r in out)


@dataclass(eq=False)
class CurvatureBundle:
    metric: GeneralizedMetric
    christoffel: ChristoffelField
    riemann: tuple
    ricci: tuple
    scalar: Expr
    einstein: tuple

    @property
    def dim(self) -> int:
        return self.metric.dim

    @cached_property
    def _riemann_index(self) -> list[tuple[int, int, int, int]]:
        d = self.dim
        return [(a, b, c, e) for a in range(d) for b in range(a + 1, d) for c in range(d) for e in range(d)]

    @cached_property
    def _sym_index(self) -> list[tuple[int, int]]:
        d = self.dim
        return [(a, b) for a in range(d) for b in range(a, d)]

    @cached_property
    def _fn(self) -> CompiledExprs:
        exprs = [self.riemann[a][b][c][e] for a, b, c, e in self._riemann_index]
        exprs += [self.ricci[a][b] for a, b in self._sym_index]
        exprs += [self.einstein[a][b] for a, b in self._sym_index]
        exprs.append(self.scalar)
        return self.metric.compile(exprs)

    def evaluate(self, point: Sequence[float], eps: float) -> dict[str, np.ndarray | float]:
        """Numeric Riemann (mixed, R_abc^d), Ricci, Einstein and scalar at a point."""
        m = self.metric
        d = self.dim
        vals = self._fn(m.args(point), eps, m.delta_net)
        R = np.zeros((d,) * 4)
        k = 0
        for a, b, c, e in self._riemann_index:
            R[a, b, c, e] = vals[k]
            R[b, a, c, e] = -vals[k]
            k += 1
        ric = np.zeros((d, d))
        ein = np.zeros((d, d))
        for a, b in self._sym_index:
            ric[a, b] = ric[b, a] = vals[k]
            k += 1
        for a, b in self._sym_index:
            ein[a, b] = ein[b, a] = vals[k]
            k += 1
        return {"riemann": R, "ricci": ric, "einstein": ein, "scalar": vals[k]}

    @cached_property
    def divergence_terms(self) -> list[list[Expr]] | None:
        """Terms of ∇^a G_ab for each b, or None when the delta-derivative cap is hit."""
        m = self.metric
        d = self.dim
        ginv = m.inverse_exprs
        G = self.christoffel.symbols
        E = self.einstein
        out = []
        try:
            for b in range(d):
                terms = []
                for a in range(d):
                    for c in range(d):
                        if ginv[a][c].is_zero:
                            continue
                        terms.append(n.mul(ginv[a][c], differentiate(E[a][b], m.coordinates[c])))
                        for e in range(d):
                            terms.append(n.neg(n.mul(ginv[a][c], n.mul(G[e][c][a], E[e][b]))))
                            terms.append(n.neg(n.mul(ginv[a][c], n.mul(G[e][c][b], E[a][e]))))
                out.append([t for t in terms if not t.is_zero])
        except DifferentiationError as exc:
            log.info("contracted Bianchi check skipped for %s: %s", m.label or "metric", exc.message)
            return None
        return out

    @cached_property
    def _div_fn(self) -> tuple[CompiledExprs, list[int]] | None:
        terms = self.divergence_terms
        if terms is None:
            return None
        flat = [t for row in terms for t in row]
        return self.metric.compile(flat), [len(row) for row in terms]


def curvature_bundle(m: GeneralizedMetric, gamma: ChristoffelField | None = None) -> CurvatureBundle:
    gamma = gamma or christoffel(m)
    R = riemann(m, gamma)
    ric = ricci(R, m.dim)
    scal = scalar(ric, m)
    ein = einstein(ric, scal, m)
    return CurvatureBundle(m, gamma, R, ric, scal, ein)


def lowered_riemann(R: np.ndarray, g: np.ndarray) -> np.ndarray:
    """R_abcd = R_abc^e g_ed, lowered with the evaluated metric."""
    return np.einsum("abce,ed->abcd", R, g)


@dataclass
class CurvatureDiagnostics:
    identities: dict[str, IdentityResidual] = field(default_factory=dict)
    skipped: list[str] = field(default_factory=list)

    def passed(self, rtol: float = 1e-8) -> bool:
        return all(r.within(rtol) for r in self.identities.values())

    def to_json(self) -> dict:
        return {
            "identities": {
                k: {"max_violation": r.max_abs, "scale": r.scale, "relative": r.relative} for k, r in self.identities.items()
            },
            "skipped": list(self.skipped),
        }


def curvature_diagnostics(bundle: CurvatureBundle, m: GeneralizedMetric, points, eps: float) -> CurvatureDiagnostics:
    """Maximum violation of the classical curvature identities over the points.

    Algebraic identities are measured against the local scale max|R_abcd|;
    the contracted Bianchi identity against the larger of that and the
    largest single term of ∇^a G_ab (G can vanish identically, as in 2-D).
    """
    worst = {k: 0.0 for k in IDENTITIES}
    scale = {k: 0.0 for k in IDENTITIES}
    div = bundle._div_fn
    skipped = [] if div is not None else ["contracted_bianchi"]
    for p in points:
        ev = bundle.evaluate(p, eps)
        g = m.matrix(p, eps)
        L = lowered_riemann(ev["riemann"], g)
        local = float(np.max(np.abs(L))) if L.size else 0.0
        checks = {
            "antisymmetry_ab": L + L.transpose(1, 0, 2, 3),
            "antisymmetry_cd": L + L.transpose(0, 1, 3, 2),
            "pair_symmetry": L - L.transpose(2, 3, 0, 1),
            "first_bianchi": L + L.transpose(1, 2, 0, 3) + L.transpose(2, 0, 1, 3),
        }
        for name, arr in checks.items():
            worst[name] = max(worst[name], float(np.max(np.abs(arr))))
            scale[name] = max(scale[name], local)
        if div is not None:
            fn, sizes = div
            vals = fn(m.args(p), eps, m.delta_net)
            k = 0
            for size in sizes:
                chunk = vals[k : k + size]
                k += size
                if chunk:
                    worst["contracted_bianchi"] = max(worst["contracted_bianchi"], abs(sum(chunk)))
                    scale["contracted_bianchi"] = max(scale["contracted_bianchi"], max(abs(v) for v in chunk))
            scale["contracted_bianchi"] = max(scale["contracted_bianchi"], local)
    report = CurvatureDiagnostics(skipped=skipped)
    for k in IDENTITIES:
        if k not in skipped:
            report.identities[k] = IdentityResidual(worst[k], scale[k])
    return report
