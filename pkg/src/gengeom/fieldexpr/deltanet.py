"""Delta nets δ_ε(x) = ρ(x / r(ε)) / r(ε) built from a profile ρ on [-1, 1]."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from ..errors import ConfigurationError, QuadratureError, ValidationError
from .calculus import differentiate
from .codegen import CompiledExprs
from .nodes import EPS, contains_delta, contains_reference_only
from .parser import parse_folded

PROFILE_VAR = "s"

BUMP = "exp(-1/(1 - s^2))"
# (g(s) - g(1))^3 with a gaussian g vanishes to second order at the cut
GAUSSIAN_TRUNCATED = "(exp(-s^2/0.5) - exp(-1/0.5))^3"
# signed, C^2 at ±1, integrates to 1 (odd part integrates to zero)
SIGNED = "35/32*(1 - s^2)^3*(1 - 3*s)"

PROFILES = {"bump": BUMP, "gaussian-truncated": GAUSSIAN_TRUNCATED, "signed": SIGNED}


class DeltaNet:
    """A strict delta net with a C^2 (or smoother) profile supported in [-1, 1].

    The profile is normalized numerically at construction; ``value(k, x, eps)``
    returns the k-th derivative (k <= 2) of δ_ε at ``x``.
    """

    def __init__(self, profile: str = "bump", expression: str | None = None, radius_rule: str = EPS):
        if expression is None:
            if profile not in PROFILES:
                raise ConfigurationError(f"unknown delta profile {profile!r}", known=sorted(PROFILES))
            expression = PROFILES[profile]
        self.profile = profile
        self.expression = expression
        self.radius_rule = radius_rule

        rho = parse_folded(expression)
        if contains_delta(rho) or contains_reference_only(rho):
            raise ValidationError("profile must be an elementary expression", expression=expression)
        extra = rho.free_vars - {PROFILE_VAR}
        if extra:
            raise ValidationError(f"profile may only use {PROFILE_VAR!r}", unbound=sorted(extra))
        d1 = differentiate(rho, PROFILE_VAR)
        d2 = differentiate(d1, PROFILE_VAR)
        self._rho = CompiledExprs([rho, d1, d2], [PROFILE_VAR])

        radius = parse_folded(radius_rule)
        if radius.free_vars - {EPS} or contains_delta(radius) or contains_reference_only(radius):
            raise ValidationError("radius rule must be an expression in eps only", rule=radius_rule)
        self._radius = CompiledExprs([radius], [])

        raw, _ = integrate.quad(self._raw0, -1.0, 1.0, epsabs=1e-15, epsrel=1e-13, limit=200)
        if not raw > 0.0:
            raise ValidationError("profile integral must be positive", integral=raw)
        self.normalization = 1.0 / raw
        check, _ = integrate.quad(self.profile_value, -1.0, 1.0, epsabs=1e-15, epsrel=1e-13, limit=200)
        if abs(check - 1.0) > 1e-10:
            raise ValidationError("profile normalization failed", integral=check)

    @classmethod
    def from_config(cls, config: dict | None) -> "DeltaNet":
        config = dict(config or {})
        return cls(
            profile=config.get("profile", "bump"),
            expression=config.get("expression"),
            radius_rule=config.get("radius_rule", EPS),
        )

    def to_config(self) -> dict:
        out = {"profile": self.profile, "radius_rule": self.radius_rule}
        if self.profile not in PROFILES or PROFILES[self.profile] != self.expression:
            out["expression"] = self.expression
        return out

    def _raw0(self, s: float) -> float:
        return self._rho((s,), 1.0)[0] if -1.0 < s < 1.0 else 0.0

    def profile_value(self, s: float, order: int = 0) -> float:
        """Normalized ρ^(order)(s); zero outside (-1, 1)."""
        if not -1.0 < s < 1.0:
            return 0.0
        return self.normalization * self._rho((s,), 1.0)[order]

    def support_radius(self, eps: float) -> float:
        r = self._radius((), eps)[0]
        if not r > 0.0:
            raise ValidationError("support radius must be positive", eps=eps, radius=r)
        return r

    def value(self, order: int, x: float, eps: float) -> float:
        r = self.support_radius(eps)
        s = x / r
        if not -1.0 < s < 1.0:
            return 0.0
        return self.normalization * self._rho((s,), 1.0)[order] / r ** (order + 1)

    def __call__(self, x: float, eps: float) -> float:
        return self.value(0, x, eps)

    def __repr__(self):
        return f"DeltaNet(profile={self.profile!r}, radius_rule={self.radius_rule!r})"


@dataclass
class DeltaNetReport:
    eps: list[float]
    integrals: list[float]
    radii: list[float]
    l1_norms: list[float]
    l1_bound: float
    integral_ok: bool
    shrinking: bool
    bounded: bool

    @property
    def passed(self) -> bool:
        return self.integral_ok and self.shrinking and self.bounded

    def to_json(self) -> dict:
        return {
            "table": [
                {"eps": e, "integral": i, "radius": r, "l1": l}
                for e, i, r, l in zip(self.eps, self.integrals, self.radii, self.l1_norms)
            ],
            "l1_bound": self.l1_bound,
            "integral_ok": self.integral_ok,
            "shrinking": self.shrinking,
            "bounded": self.bounded,
            "passed": self.passed,
        }


def validate_strict_delta_net(net: DeltaNet, grid) -> DeltaNetReport:
    """Tabulate ∫δ_ε, support radius and ‖δ_ε‖_L1 on the grid.

    Passes iff every integral is within 1e-8 of 1, the radius decreases along
    the grid with a positive fitted power of ε, and the L1 norms do not grow
    (fitted power of ε^-1 below 0.05).
    """
    eps_values = list(grid)
    integrals, radii, l1 = [], [], []
    for eps in eps_values:
        r = net.support_radius(eps)
        val = _quad(lambda x: net.value(0, x, eps), r, eps)
        absval = _quad(lambda x: abs(net.value(0, x, eps)), r, eps)
        integrals.append(val)
        radii.append(r)
        l1.append(absval)

    log_eps = np.log(eps_values)
    radius_slope = np.polyfit(log_eps, np.log(radii), 1)[0]
    l1_growth = -np.polyfit(log_eps, np.log(l1), 1)[0]
    shrinking = all(a > b for a, b in zip(radii, radii[1:])) and radius_slope > 0.25
    return DeltaNetReport(
        eps=eps_values,
        integrals=integrals,
        radii=radii,
        l1_norms=l1,
        l1_bound=max(l1),
        integral_ok=all(abs(i - 1.0) <= 1e-8 for i in integrals),
        shrinking=bool(shrinking),
        bounded=bool(l1_growth < 0.05),
    )


def _quad(fn, r: float, eps: float) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            return integrate.quad(fn, -r, r, points=[0.0], epsabs=1e-13, epsrel=1e-12, limit=400)[0]
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"quadrature of delta net did not converge: {exc}", eps=eps) from exc
