"""Command-line interface: ``gengeom <command> [flags]``.

Results go to stdout as JSON (``acceptance`` prints one PASS/FAIL line per
criterion).  With ``--out DIR`` every run also writes ``result.csv``,
``summary.json`` and ``manifest.json`` there.  Errors print a JSON object
on stderr and exit 1 (bad input), 2 (numerical failure) or 3 (acceptance
failure).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import EpsilonGrid, check_invertible_on, estimate_growth_order, is_strictly_nonzero, make_epsilon_grid
from .curvature import curvature_bundle, curvature_diagnostics
from .errors import ConfigurationError, GengeomError, NumericalError
from .geodesic import DEFAULT_TOL, GeodesicFamily, GeodesicInit, Trajectory, solve_family
from .levicivita import christoffel
from .metric import check_nondegenerate, compute_index, determinant_net
from .scenarios import BUILTIN, Scenario, get_scenario, load_config
from .shadow import estimate_shadow, geodesic_shadow, parse_closed_forms

COMMANDS = ("check-metric", "index", "christoffel", "geodesic", "curvature", "shadow", "classify", "list-scenarios", "acceptance")


class Output:
    """Collected artifacts of one command."""

    def __init__(self):
        self.rows: list[list] = []
        self.header: list[str] = []
        self.summary: dict = {}
        self.text: list[str] = []


def fmt(v) -> str:
    """Shortest round-trip text for numbers."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


# -- argument handling -------------------------------------------------------


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Raises instead of printing usage so every failure stays machine-readable."""

    def error(self, message):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gengeom", description="Generalized pseudo-Riemannian geometry on ε-nets.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--scenario", help="built-in scenario name")
    p.add_argument("--config", help="JSON config: a scenario object, optionally with a 'flags' object")
    p.add_argument("--grid", help='geometric grid "emax,emin,count"')
    p.add_argument("--eps", type=float, help="single ε for pointwise commands")
    p.add_argument("--region", help='box like "[a,b]x[c,d]"')
    p.add_argument("--samples", type=int, help="lattice samples per axis")
    p.add_argument("--tol", type=float, help="integrator tolerance")
    p.add_argument("--out", help="directory for result.csv, summary.json, manifest.json")
    p.add_argument("--delta", help="delta-net profile (bump, gaussian-truncated, signed)")
    p.add_argument("--f", help="pp-wave profile f(x,y)")
    p.add_argument("--print", dest="print_symbols", action="store_true", help="print Christoffel symbols as text")
    p.add_argument("--at", help='point like "u=0,x=1,y=1" (missing coordinates are 0)')
    p.add_argument("--init", help='geodesic data like "u0=-1,x=1,xdot=0"')
    p.add_argument("--t-end", type=float, dest="t_end")
    p.add_argument("--family", help="geodesic CSV written by the geodesic command")
    p.add_argument("--closed-form", dest="closed_form", help='"x:1+pos(u);v:2*pos(u)"')
    p.add_argument("--exclude", type=float, help="exclusion radius around the impulse")
    p.add_argument("--criteria", help="comma-separated criterion numbers (acceptance)")
    return p


FLAG_KEYS = ("scenario", "grid", "eps", "region", "samples", "tol", "delta", "f", "at", "init", "t_end", "family", "closed_form", "exclude", "criteria")


def resolve(args: argparse.Namespace) -> tuple[dict, Scenario | None]:
    """Merge config-file flags with command-line flags (command line wins)."""
    flags: dict = {}
    scenario = None
    if args.config:
        cfg = load_config(args.config)
        flags.update(cfg.pop("flags", {}) or {})
        if "scenario" in cfg and isinstance(cfg["scenario"], dict):
            scenario = Scenario.from_json(cfg["scenario"])
        elif cfg:
            if "name" in cfg:
                scenario = Scenario.from_json(cfg)
            else:
                flags.update(cfg)
    for key in FLAG_KEYS:
        value = getattr(args, key)
        if value is not None:
            flags[key] = value
    unknown = set(flags) - set(FLAG_KEYS)
    if unknown:
        raise ConfigurationError("unknown config flags", unknown=sorted(unknown))
    if isinstance(flags.get("scenario"), str):
        scenario = get_scenario(flags["scenario"])
    if scenario is not None and (flags.get("f") is not None or flags.get("delta") is not None):
        scenario = scenario.with_overrides(f=flags.get("f"), delta=flags.get("delta"))
    if scenario is not None and flags.get("samples"):
        scenario.region_samples = int(flags["samples"])
    if scenario is not None:
        flags["scenario"] = scenario.name
    return flags, scenario


def _grid(flags: dict, scenario: Scenario | None) -> EpsilonGrid:
    if flags.get("grid"):
        text = flags["grid"]
        parts = text if isinstance(text, list) else str(text).split(",")
        try:
            emax, emin, count = float(parts[0]), float(parts[1]), int(parts[2])
        except (ValueError, IndexError) as exc:
            raise ConfigurationError("--grid must read 'emax,emin,count'", grid=text) from exc
        if len(parts) != 3:
            raise ConfigurationError("--grid must read 'emax,emin,count'", grid=text)
        return make_epsilon_grid(emax, emin, count)
    if scenario is None:
        raise ConfigurationError("need --grid or --scenario")
    return scenario.grid_obj()


def _need(scenario: Scenario | None) -> Scenario:
    if scenario is None:
        raise ConfigurationError("this command needs --scenario or --config")
    return scenario


def parse_assignments(text: str) -> dict[str, float]:
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        key, sep, value = part.partition("=")
        if not sep:
            raise ConfigurationError("expected name=value", item=part)
        try:
            out[key.strip()] = float(value)
        except ValueError as exc:
            raise ConfigurationError("expected a number", item=part) from exc
    return out


def _point(text: str | None, coords) -> tuple[float, ...]:
    values = parse_assignments(text or "")
    unknown = set(values) - set(coords)
    if unknown:
        raise ConfigurationError("unknown coordinates in --at", unknown=sorted(unknown), coordinates=list(coords))
    return tuple(values.get(c, 0.0) for c in coords)


def geodesic_init_from(text: str | None, scenario: Scenario, coords) -> GeodesicInit:
    """Scenario defaults overridden by ``c=..``/``c0=..`` (position), ``cdot=..`` and ``t0=..``."""
    base = scenario.geodesic_init() if scenario.init else GeodesicInit(0.0, (0.0,) * len(coords), (0.0,) * len(coords))
    pos, vel, t0 = list(base.position), list(base.velocity), base.t0
    values = parse_assignments(text or "")
    param = scenario.curve_parameter
    t0_given = "t0" in values
    for key, value in values.items():
        if key == "t0":
            t0 = value
        elif key.endswith("dot") and key[:-3] in coords:
            vel[coords.index(key[:-3])] = value
        elif key in coords:
            pos[coords.index(key)] = value
        elif key.endswith("0") and key[:-1] in coords:
            pos[coords.index(key[:-1])] = value
        else:
            raise ConfigurationError("unknown name in --init", name=key, coordinates=list(coords))
    if param in coords and not t0_given:
        t0 = pos[coords.index(param)]
    return GeodesicInit(t0, pos, vel)


# -- commands ----------------------------------------------------------------


def cmd_list(flags, scenario, out: Output):
    out.header = ["name", "kind", "notes"]
    for name, s in sorted(BUILTIN.items()):
        out.rows.append([name, "metric" if s.metric else "field", s.notes])
    out.summary = {"scenarios": {name: BUILTIN[name].to_json() for name in sorted(BUILTIN)}}


def cmd_check_metric(flags, scenario, out: Output):
    sc = _need(scenario)
    m = sc.build_metric()
    rep = check_nondegenerate(m, sc.region_obj(flags.get("region")), _grid(flags, sc))
    out.header = ["eps", "inf_abs_det"]
    out.rows = [[e, v] for e, v in rep.inf_table]
    out.summary = rep.to_json()


def cmd_index(flags, scenario, out: Output):
    sc = _need(scenario)
    rep = compute_index(sc.build_metric(), sc.region_obj(flags.get("region")), _grid(flags, sc))
    out.header = ["eps", "min_negative_count", "max_negative_count", "min_abs_eigenvalue"]
    for (e, (lo, hi)), (_, mn) in zip(rep.per_eps_signatures, rep.min_abs_eigenvalue_table):
        out.rows.append([e, lo, hi, mn])
    out.summary = rep.to_json()


def cmd_christoffel(flags, scenario, out: Output):
    sc = _need(scenario)
    gamma = christoffel(sc.build_metric())
    symbols = gamma.to_json()
    out.header = ["k", "i", "j", "expr"]
    out.rows = [[s["k"], s["i"], s["j"], s["expr"]] for s in symbols]
    out.summary = {"scenario": sc.name, "symbols": symbols}
    if flags.get("print_symbols"):
        out.text = [f"Gamma^{s['k']}_{s['i']}{s['j']} = {s['expr']}" for s in symbols]


def _family_rows(fam: GeodesicFamily) -> tuple[list[str], list[list]]:
    coords = list(fam.coordinates)
    header = ["eps", "t"] + coords + [f"{c}dot" for c in coords]
    rows = []
    for tr in sorted(fam.members, key=lambda tr: -tr.eps):
        for k, t in enumerate(tr.t):
            rows.append([tr.eps, t, *tr.positions[k], *tr.velocities[k]])
    return header, rows


def cmd_geodesic(flags, scenario, out: Output):
    sc = _need(scenario)
    m = sc.build_metric()
    gamma = christoffel(m)
    init = geodesic_init_from(flags.get("init"), sc, list(m.coordinates))
    t_end = float(flags.get("t_end", 1.0))
    grid = [float(flags["eps"])] if flags.get("eps") else list(_grid(flags, sc))
    fam = solve_family(gamma, init, t_end, grid, float(flags.get("tol") or DEFAULT_TOL))
    out.header, out.rows = _family_rows(fam)
    endpoints = {}
    for tr in fam.members:
        endpoints[repr(tr.eps)] = {
            "position": dict(zip(m.coordinates, tr.positions[-1])),
            "velocity": dict(zip(m.coordinates, tr.velocities[-1])),
            "stats": tr.stats,
        }
    summary = {"scenario": sc.name, "t0": init.t0, "t_end": t_end, "endpoints": endpoints}
    if len(grid) >= 4:
        summary["endpoint_shadow"] = {
            c: estimate_shadow(sorted(zip(fam.eps, fam.coordinate(c)[:, -1]), reverse=True)).to_json() for c in m.coordinates
        }
    out.summary = summary


def read_family(path: str) -> GeodesicFamily:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigurationError(f"cannot read family CSV: {exc}", path=path) from exc
    if len(rows) < 2 or rows[0][:2] != ["eps", "t"]:
        raise ConfigurationError("family CSV must start with columns eps,t", path=path)
    header = rows[0]
    ncoord = (len(header) - 2) // 2
    coords = tuple(header[2 : 2 + ncoord])
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]])
    except ValueError as exc:
        raise ConfigurationError("family CSV has non-numeric entries", path=path) from exc
    members = []
    for eps in sorted(set(data[:, 0]), reverse=True):
        block = data[data[:, 0] == eps]
        members.append(Trajectory(float(eps), block[:, 1], block[:, 2 : 2 + ncoord], block[:, 2 + ncoord :]))
    t = members[0].t
    if any(tr.t.shape != t.shape or np.any(tr.t != t) for tr in members):
        raise ConfigurationError("family members must share the t-grid", path=path)
    return GeodesicFamily(coords, t.copy(), members)


def cmd_shadow(flags, scenario, out: Output):
    if flags.get("family"):
        fam = read_family(flags["family"])
        forms = parse_closed_forms(flags["closed_form"]) if flags.get("closed_form") else {}
    else:
        sc = _need(scenario)
        m = sc.build_metric()
        gamma = christoffel(m)
        init = geodesic_init_from(flags.get("init"), sc, list(m.coordinates))
        fam = solve_family(gamma, init, float(flags.get("t_end", 1.0)), list(_grid(flags, sc)), float(flags.get("tol") or DEFAULT_TOL))
        forms = parse_closed_forms(flags["closed_form"]) if flags.get("closed_form") else dict(sc.closed_forms)
    rep = geodesic_shadow(fam, forms, flags.get("exclude"))
    coords = list(fam.coordinates)
    out.header = ["t"] + coords
    out.rows = [[t, *(rep.coordinates[c].limits[k] for c in coords)] for k, t in enumerate(rep.t)]
    out.summary = rep.to_json()


def cmd_curvature(flags, scenario, out: Output):
    sc = _need(scenario)
    m = sc.build_metric()
    eps = float(flags.get("eps") or 0.05)
    point = _point(flags.get("at"), m.coordinates)
    bundle = curvature_bundle(m)
    ev = bundle.evaluate(point, eps)
    c = m.coordinates
    comps = {}
    R = ev["riemann"]
    for idx in np.argwhere(R != 0.0):
        a, b, cc, d = (int(i) for i in idx)
        comps[f"R_{c[a]}{c[b]}{c[cc]}^{c[d]}"] = R[a, b, cc, d]
    ricci = {f"Ric_{c[a]}{c[b]}": ev["ricci"][a, b] for a in range(m.dim) for b in range(a, m.dim) if ev["ricci"][a, b] != 0.0}
    einstein = {f"G_{c[a]}{c[b]}": ev["einstein"][a, b] for a in range(m.dim) for b in range(a, m.dim) if ev["einstein"][a, b] != 0.0}
    diag = curvature_diagnostics(bundle, m, [point], eps)
    out.header = ["component", "value"]
    out.rows = [[k, v] for k, v in {**comps, **ricci, **einstein, "scalar": ev["scalar"]}.items()]
    out.summary = {
        "scenario": sc.name,
        "point": dict(zip(c, point)),
        "eps": eps,
        "riemann": comps,
        "ricci": ricci,
        "einstein": einstein,
        "scalar": ev["scalar"],
        "diagnostics": diag.to_json(),
    }


def cmd_classify(flags, scenario, out: Output):
    sc = _need(scenario)
    grid = _grid(flags, sc)
    if sc.field is not None:
        net, variables = sc.build_field(), list(sc.variables)
    else:
        m = sc.build_metric()
        net, variables = determinant_net(m), list(m.coordinates)
    if flags.get("at"):
        point = _point(flags["at"], variables)
        scalar = net.at(point)
        res = is_strictly_nonzero(scalar, grid)
        growth = estimate_growth_order(scalar, grid)
        out.header = ["eps", "abs_value"]
        out.rows = [[e, v] for e, v in res.table]
        out.summary = {"scenario": sc.name, "point": dict(zip(variables, point)), "strictly_nonzero": res.to_json(), "growth": growth.to_json()}
        return
    region = sc.region_obj(flags.get("region"))
    growth = estimate_growth_order(net, grid, region)
    inv = check_invertible_on(net, region, grid)
    out.header = ["eps", "sup_abs", "inf_abs"]
    out.rows = [[e, s, i] for (e, s), (_, i) in zip(growth.per_eps_sup, inv.inf_table)]
    out.summary = {"scenario": sc.name, "growth": growth.to_json(), "invertibility": inv.to_json()}


def cmd_acceptance(flags, scenario, out: Output):
    from .acceptance import run_all

    numbers = None
    if flags.get("criteria"):
        try:
            numbers = [int(k) for k in str(flags["criteria"]).split(",") if k.strip()]
        except ValueError as exc:
            raise ConfigurationError("--criteria must list integers", criteria=flags["criteria"]) from exc
    results = run_all(numbers, echo=lambda line: print(line, flush=True))
    out.header = ["criterion", "title", "passed", "runtime", "budget"]
    out.rows = [[r.number, r.title, r.ok, r.runtime, r.budget] for r in results]
    out.summary = {"criteria": [r.to_json() for r in results], "passed": all(r.ok for r in results)}
    out.text = [f"{sum(r.ok for r in results)}/{len(results)} criteria passed"]


HANDLERS = {
    "check-metric": cmd_check_metric,
    "index": cmd_index,
    "christoffel": cmd_christoffel,
    "geodesic": cmd_geodesic,
    "curvature": cmd_curvature,
    "shadow": cmd_shadow,
    "classify": cmd_classify,
    "list-scenarios": cmd_list,
    "acceptance": cmd_acceptance,
}


# -- emission ----------------------------------------------------------------


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_outputs(directory: str, command: str, flags: dict, scenario, out: Output, wall: float) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    files = {"result.csv": csv_text(out.header, out.rows), "summary.json": dumps(out.summary)}
    digests = {}
    for name, text in files.items():
        data = text.encode("utf-8")
        (d / name).write_bytes(data)
        digests[name] = hashlib.sha256(data).hexdigest()
    config = {k: v for k, v in flags.items() if k != "print_symbols"}
    if scenario is not None:
        config["scenario_definition"] = scenario.to_json()
    manifest = {
        "command": command,
        "scenario": scenario.name if scenario else None,
        "config": config,
        "version": __version__,
        "wall_time": wall,
        "started": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "digests": digests,
    }
    (d / "manifest.json").write_text(dumps(manifest), encoding="utf-8")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        sys.stderr.write(dumps({"error": "usage", "message": str(exc), "argv": list(argv if argv is not None else sys.argv[1:])}))
        return 1
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 1
    start = time.perf_counter()
    try:
        flags, scenario = resolve(args)
        if args.print_symbols:
            flags["print_symbols"] = True
        out = Output()
        HANDLERS[args.command](flags, scenario, out)
        wall = time.perf_counter() - start
        if args.out:
            write_outputs(args.out, args.command, flags, scenario, out, wall)
    except GengeomError as exc:
        sys.stderr.write(dumps(exc.to_json()))
        return 2 if isinstance(exc, NumericalError) else 1
    for line in out.text:
        print(line)
    if args.command != "acceptance" and not out.text:
        sys.stdout.write(dumps(out.summary))
    if args.command == "acceptance" and not out.summary.get("passed", False):
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
