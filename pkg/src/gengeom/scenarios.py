"""Built-in scenarios and JSON scenario configuration."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from dataclasses import field as _field
from pathlib import Path

from .asymptotics import EpsilonGrid, FieldNet, Region, make_epsilon_grid, parse_region
from .errors import ConfigurationError
from .fieldexpr import DeltaNet, parse_folded
from .geodesic import GeodesicInit
from .metric import GeneralizedMetric, build_metric

ACCEPTANCE_GRID = (0.2, 0.1, 0.05, 0.025, 0.0125)


@dataclass
class Scenario:
    name: str
    notes: str
    metric: dict | None = None
    field: str | None = None  # scalar-field scenarios (no metric)
    variables: tuple[str, ...] = ()
    region: str = "[-1,1]"
    region_samples: int = 64
    grid: tuple[float, ...] = ACCEPTANCE_GRID
    profile: str | None = None  # pp-wave profile f(x, y), substituted into {f}
    init: dict | None = None
    closed_forms: dict[str, str] = _field(default_factory=dict)
    curve_parameter: str | None = None

    def to_json(self) -> dict:
        out = {"name": self.name, "notes": self.notes, "region": self.region, "region_samples": self.region_samples, "grid": list(self.grid)}
        for key in ("metric", "field", "profile", "init", "curve_parameter"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        if self.variables:
            out["variables"] = list(self.variables)
        if self.closed_forms:
            out["closed_forms"] = dict(self.closed_forms)
        return out

    @classmethod
    def from_json(cls, data: dict) -> "Scenario":
        known = {"name", "notes", "metric", "field", "variables", "region", "region_samples", "grid", "profile", "init", "closed_forms", "curve_parameter"}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError("unknown scenario keys", unknown=sorted(unknown))
        if "name" not in data or ("metric" not in data and "field" not in data):
            raise ConfigurationError("a scenario needs a name and a metric or field")
        data = dict(data)
        data.setdefault("notes", "")
        if "variables" in data:
            data["variables"] = tuple(data["variables"])
        if "grid" in data:
            data["grid"] = tuple(float(e) for e in data["grid"])
        return cls(**data)

    # -- derived objects -----------------------------------------------------

    def with_overrides(self, f: str | None = None, delta: str | None = None) -> "Scenario":
        s = copy.deepcopy(self)
        if f is not None:
            if s.profile is None:
                raise ConfigurationError("--f only applies to pp-wave style scenarios", scenario=s.name)
            s.profile = f
        if delta is not None:
            if s.metric is None:
                raise ConfigurationError("--delta needs a metric scenario", scenario=s.name)
            s.metric.setdefault("delta", {})
            s.metric["delta"] = {"profile": delta, "radius_rule": s.metric["delta"].get("radius_rule", "eps")}
        return s

    def build_metric(self) -> GeneralizedMetric:
        if self.metric is None:
            raise ConfigurationError("scenario has no metric", scenario=self.name)
        return metric_from_config(self.metric, self.profile)

    def build_field(self) -> FieldNet:
        if self.field is None:
            raise ConfigurationError("scenario has no scalar field", scenario=self.name)
        return FieldNet.from_expr(self.field, self.variables, label=self.name)

    def region_obj(self, text: str | None = None) -> Region:
        return parse_region(text or self.region, self.region_samples)

    def grid_obj(self) -> EpsilonGrid:
        return EpsilonGrid(tuple(self.grid))

    def geodesic_init(self) -> GeodesicInit:
        if self.init is None:
            raise ConfigurationError("scenario has no default geodesic initial data", scenario=self.name)
        return GeodesicInit(self.init["t0"], self.init["position"], self.init["velocity"])


def metric_from_config(cfg: dict, profile: str | None = None) -> GeneralizedMetric:
    """Build a metric from the scenario JSON form; missing components are 0."""
    try:
        dim = int(cfg["dim"])
        coords = list(cfg["coords"])
        comps = dict(cfg["components"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError("metric config needs dim, coords and components") from exc
    if profile is not None:
        f = parse_folded(profile)  # validate before substitution
        comps = {k: v.replace("{f}", f"({f})") for k, v in comps.items()}
    elif any("{f}" in v for v in comps.values()):
        raise ConfigurationError("metric uses {f} but no profile was given")
    delta_cfg = cfg.get("delta")
    uses_delta = any("delta" in v for v in comps.values())
    net = DeltaNet.from_config(delta_cfg) if (delta_cfg is not None or uses_delta) else None
    return build_metric(dim, coords, comps, cfg.get("parameters") or {}, net, cfg.get("label", ""))


BUILTIN: dict[str, Scenario] = {
    s.name: s
    for s in [
        Scenario(
            name="ppwave",
            notes="impulsive pp-wave f(x,y) delta(u) du^2 - du dv + dx^2 + dy^2",
            metric={
                "label": "ppwave",
                "dim": 4,
                "coords": ["u", "v", "x", "y"],
                "components": {"u,u": "{f}*delta(u)", "u,v": "-1/2", "x,x": "1", "y,y": "1"},
                "delta": {"profile": "bump", "radius_rule": "eps"},
            },
            region="[-0.3,0.3]x[-1,1]x[-1,2]x[-1,2]",
            region_samples=5,
            profile="x^2 - y^2",
            init={"t0": -1.0, "position": [-1.0, 0.0, 1.0, 1.0], "velocity": [1.0, 0.0, 0.0, 0.0]},
            closed_forms={"x": "1 + pos(u)", "y": "1 - pos(u)", "v": "2*pos(u)"},
            curve_parameter="u",
        ),
        Scenario(
            name="remark35",
            notes="one-dimensional (x^2 + delta(x)) dx^2; nondegeneracy depends on the delta profile",
            metric={
                "label": "remark35",
                "dim": 1,
                "coords": ["x"],
                "components": {"x,x": "x^2 + delta(x)"},
                "delta": {"profile": "bump", "radius_rule": "eps"},
            },
            region="[-1,1]",
            region_samples=1025,
            grid=(0.1, 0.05, 0.025, 0.0125),
        ),
        Scenario(
            name="minkowski",
            notes="flat spacetime diag(-1, 1, 1, 1)",
            metric={
                "label": "minkowski",
                "dim": 4,
                "coords": ["t", "x", "y", "z"],
                "components": {"t,t": "-1", "x,x": "1", "y,y": "1", "z,z": "1"},
            },
            region="[-1,1]x[-1,1]x[-1,1]x[-1,1]",
            region_samples=3,
            init={"t0": 0.0, "position": [0.0, 0.0, 0.0, 0.0], "velocity": [1.0, 0.5, 0.0, 0.0]},
        ),
        Scenario(
            name="sphere2",
            notes="unit 2-sphere dth^2 + sin(th)^2 dph^2",
            metric={
                "label": "sphere2",
                "dim": 2,
                "coords": ["th", "ph"],
                "components": {"th,th": "1", "ph,ph": "sin(th)^2"},
            },
            region="[0.3,2.8]x[0,6]",
            region_samples=16,
            init={"t0": 0.0, "position": [1.5707963267948966, 0.0], "velocity": [0.0, 1.0]},
        ),
        Scenario(
            name="example24",
            notes="scalar net eps^(x^2/(x^4 + eps^4)): strictly nonzero at each x, not uniformly near 0",
            field="eps^(x^2/(x^4 + eps^4))",
            variables=("x",),
            region="[0,1]",
            region_samples=64,
            grid=make_epsilon_grid(0.1, 0.001, 8).values,
        ),
    ]
}


def get_scenario(name: str) -> Scenario:
    try:
        return copy.deepcopy(BUILTIN[name])
    except KeyError:
        raise ConfigurationError(f"unknown scenario {name!r}", known=sorted(BUILTIN)) from None


def load_config(path: str | Path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config: {exc}", path=str(path)) from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc.msg}", path=str(path), line=exc.lineno) from exc
    if not isinstance(data, dict):
        raise ConfigurationError("config must be a JSON object", path=str(path))
    return data
