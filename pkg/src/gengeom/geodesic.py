"""Geodesics of generalized metrics, one smooth ODE per ε.

The full path integrates γ'' = -Γ(γ', γ') in all coordinates.  For the
impulsive pp-wave an independent reduced system (u as affine parameter)
is provided as a cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import RK45

from .errors import BlowUpError, ConfigurationError, EvaluationError, StiffnessError
from .fieldexpr import CompiledExprs, DeltaNet, differentiate
from .fieldexpr import nodes as n
from .fieldexpr.nodes import Expr
from .levicivita import ChristoffelField

DEFAULT_TOL = 1e-10
DEFAULT_SAMPLES = 801
MIN_STEP = 1e-14
# steps never exceed span/OUTPUT_STEPS so the 4th-order dense output stays at tolerance level
OUTPUT_STEPS = 100


@dataclass(frozen=True)
class GeodesicInit:
    t0: float
    position: tuple[float, ...]
    velocity: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(p) for p in self.position))
        object.__setattr__(self, "velocity", tuple(float(v) for v in self.velocity))
        if len(self.position) != len(self.velocity):
            raise ConfigurationError("position and velocity lengths differ")
        if not all(math.isfinite(v) for v in (self.t0, *self.position, *self.velocity)):
            raise ConfigurationError("initial data must be finite")


@dataclass
class Trajectory:
    eps: float
    t: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    stats: dict = field(default_factory=dict)
    node_t: np.ndarray | None = None
    node_states: np.ndarray | None = None

    @property
    def t_grid(self) -> np.ndarray:
        return self.t

    def at(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Linear interpolation on the shared grid (exact at grid points)."""
        pos = np.array([np.interp(t, self.t, self.positions[:, k]) for k in range(self.positions.shape[1])])
        vel = np.array([np.interp(t, self.t, self.velocities[:, k]) for k in range(self.velocities.shape[1])])
        return pos, vel


@dataclass
class GeodesicFamily:
    coordinates: tuple[str, ...]
    t: np.ndarray
    members: list[Trajectory]

    @property
    def eps(self) -> list[float]:
        return [tr.eps for tr in self.members]

    def coordinate(self, name: str) -> np.ndarray:
        """Array (n_eps, n_t) of one coordinate across the family."""
        k = self.coordinates.index(name)
        return np.array([tr.positions[:, k] for tr in self.members])


# -- generic stepping --------------------------------------------------------


def integrate_ode(*args, **kwargs) -> tuple[np.ndarray, np.ndarray, dict]:
    """Dormand-Prince 5(4) with a state-dependent maximum step.

    Arguments: rhs(t, y), t0, y0, t_end, tol, step_cap(t, y), samples,
    context.  Returns the uniform output grid, the states on it (from the
    integrator's dense output) and step statistics.
    """
    return _integrate(*args, **kwargs)[:3]


def _integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0: Sequence[float],
    t_end: float,
    tol: float,
    step_cap: Callable[[float, np.ndarray], float] | None = None,
    samples: int = DEFAULT_SAMPLES,
    context: dict | None = None,
):
    context = dict(context or {})
    if not t_end > t0:
        raise ConfigurationError("t_end must exceed t0", t0=t0, t_end=t_end)
    if not tol > 0:
        raise ConfigurationError("tol must be positive", tol=tol)
    y0 = np.asarray(y0, dtype=float)

    def fun(t, y):
        out = rhs(t, y)
        if not np.all(np.isfinite(out)):
            raise BlowUpError("non-finite derivative", t=t, state=y.tolist(), **context)
        return out

    base = (t_end - t0) / OUTPUT_STEPS
    cap = min(base, step_cap(t0, y0)) if step_cap else base
    solver = RK45(fun, t0, y0, t_end, max_step=cap, rtol=tol, atol=tol)
    ends = [t0]
    nodes = [y0.copy()]
    dense = []
    steps = 0
    while solver.status == "running":
        if step_cap is not None:
            solver.max_step = max(min(base, step_cap(solver.t, solver.y)), MIN_STEP)
        message = solver.step()
        if solver.status == "failed":
            raise StiffnessError(f"step size underflow: {message}", t=solver.t, state=solver.y.tolist(), **context)
        if not np.all(np.isfinite(solver.y)):
            raise BlowUpError("non-finite state", t=solver.t, **context)
        if solver.step_size is not None and solver.step_size < MIN_STEP and solver.t < t_end:
            raise StiffnessError("step size below 1e-14", t=solver.t, state=solver.y.tolist(), **context)
        steps += 1
        ends.append(solver.t)
        nodes.append(solver.y.copy())
        dense.append(solver.dense_output())

    grid = np.linspace(t0, t_end, samples)
    ends_arr = np.asarray(ends)
    Y = np.empty((samples, y0.size))
    for s, t in enumerate(grid):
        k = int(np.clip(np.searchsorted(ends_arr, t, side="left") - 1, 0, len(dense) - 1))
        Y[s] = dense[k](t)
    Y[0] = y0
    Y[-1] = solver.y
    attempts = max(steps, round((solver.nfev - 2) / 6))
    stats = {"steps": steps, "rejected": attempts - steps, "nfev": int(solver.nfev)}
    return grid, Y, stats, (ends_arr, np.asarray(nodes))


class _DeltaWindow:
    """Step cap near the support of delta nets whose argument is an expression in the state."""

    def __init__(self, args: list[Expr], coords: Sequence[str], names: Sequence[str], net: DeltaNet | None):
        self.net = net
        self.active = bool(args) and net is not None
        if self.active:
            grads = [differentiate(a, x) for a in args for x in coords]
            self.count = len(args)
            self.dim = len(coords)
            self._fn = CompiledExprs(list(args) + grads, names)

    def cap(self, values: Sequence[float], velocity: np.ndarray, eps: float) -> float:
        if not self.active:
            return np.inf
        r = self.net.support_radius(eps)
        out = self._fn(values, eps, self.net)
        h = np.inf
        for i in range(self.count):
            a = out[i]
            grad = out[self.count + i * self.dim : self.count + (i + 1) * self.dim]
            rate = float(np.dot(grad, velocity))
            inside = (r / 10.0) / max(abs(rate), 1.0)
            if abs(a) <= r * 1.001:
                h = min(h, inside)
            elif a * rate < 0:
                # heading towards the window: stop at its edge
                h = min(h, max((abs(a) - r) / abs(rate), inside))
        return h


def _delta_args(exprs) -> list[Expr]:
    seen: dict[Expr, None] = {}
    for e in exprs:
        for a in n.delta_arguments(e):
            seen.setdefault(a, None)
    return list(seen)


def geodesic_rhs(gamma: ChristoffelField, state: tuple[Sequence[float], Sequence[float]], eps: float):
    """(velocity, acceleration) with acceleration^k = -Γ^k_ij v^i v^j."""
    pos, vel = state
    vel = np.asarray(vel, dtype=float)
    G = gamma.values(pos, eps)
    return vel, -np.einsum("kij,i,j->k", G, vel, vel)


def integrate_geodesic(
    gamma: ChristoffelField,
    init: GeodesicInit,
    t_end: float,
    eps: float,
    tol: float = DEFAULT_TOL,
    samples: int = DEFAULT_SAMPLES,
) -> Trajectory:
    m = gamma.metric
    d = m.dim
    if len(init.position) != d:
        raise ConfigurationError("initial data has wrong dimension", dim=d)
    if not 0.0 < eps <= 1.0:
        raise ConfigurationError("eps must lie in (0, 1]", eps=eps)
    params = m.param_values
    window = _DeltaWindow(
        _delta_args(e for _, _, _, e in gamma.nonzero()), m.coordinates, m.names, m.delta_net
    )

    def rhs(t, y):
        try:
            vel, acc = geodesic_rhs(gamma, (y[:d], y[d:]), eps)
        except EvaluationError as exc:
            raise BlowUpError(f"evaluation failed along the geodesic: {exc.message}", t=t, eps=eps) from exc
        return np.concatenate([vel, acc])

    def cap(t, y):
        return window.cap(tuple(y[:d]) + params, y[d:], eps)

    y0 = np.array(init.position + init.velocity)
    t, Y, stats, (nt, ny) = _integrate(rhs, init.t0, y0, t_end, tol, cap, samples, {"eps": eps})
    return Trajectory(eps, t, Y[:, :d], Y[:, d:], stats, nt, ny)


def solve_family(
    gamma: ChristoffelField,
    init: GeodesicInit,
    t_end: float,
    grid,
    tol: float = DEFAULT_TOL,
    samples: int = DEFAULT_SAMPLES,
) -> GeodesicFamily:
    members = []
    for eps in grid:
        try:
            members.append(integrate_geodesic(gamma, init, t_end, eps, tol, samples))
        except Exception as exc:
            if hasattr(exc, "payload"):
                exc.payload.setdefault("eps", eps)
            raise
    return GeodesicFamily(gamma.metric.coordinates, members[0].t.copy(), members)


def metric_norm(gamma: ChristoffelField, traj: Trajectory) -> np.ndarray:
    """g_ε(γ', γ') along the trajectory."""
    m = gamma.metric
    return np.array([v @ m.matrix(p, traj.eps) @ v for p, v in zip(traj.positions, traj.velocities)])


def norm_drift(gamma: ChristoffelField, traj: Trajectory) -> tuple[float, float]:
    """Largest change of g(γ', γ') from its initial value, and the size of its terms.

    Measured on the integrator's own step nodes when available; the
    resampled grid adds interpolation error inside narrow impulses.
    """
    m = gamma.metric
    d = m.dim
    if traj.node_states is not None:
        states = [(y[:d], y[d:]) for y in traj.node_states]
    else:
        states = list(zip(traj.positions, traj.velocities))
    vals, scale = [], 0.0
    for p, v in states:
        g = m.matrix(p, traj.eps)
        terms = g * np.outer(v, v)
        vals.append(float(terms.sum()))
        scale = max(scale, float(np.abs(terms).sum()))
    vals = np.asarray(vals)
    return float(np.max(np.abs(vals - vals[0]))), scale


def fd_residual(gamma: ChristoffelField, traj: Trajectory) -> float:
    """max |dv/dt (finite differences on the grid) + Γ(v, v)|.

    Only meaningful where the output grid resolves the trajectory.
    """
    from .levicivita import _fd4

    h = traj.t[1] - traj.t[0]
    dv = _fd4(traj.velocities, h)
    acc = np.array([geodesic_rhs(gamma, (p, v), traj.eps)[1] for p, v in zip(traj.positions, traj.velocities)])
    return float(np.max(np.abs(dv - acc)))


# -- pp-wave reduced system --------------------------------------------------

REDUCED_STATE = ("v", "vdot", "x", "xdot", "y", "ydot")


class PPWaveReduced:
    """The reduced pp-wave geodesic system with u as affine parameter:

        v'' = f(x, y) δ'(u) + 2 ∂_i f ẋ^i δ(u),   x^i'' = 1/2 ∂_i f δ(u)
    """

    def __init__(self, f: Expr, net: DeltaNet, parameters: dict[str, float] | None = None):
        self.parameters = dict(parameters or {})
        extra = f.free_vars - {"x", "y"} - set(self.parameters)
        if extra:
            raise ConfigurationError("pp-wave profile may only depend on x, y and parameters", unknown=sorted(extra))
        if n.contains_delta(f) or n.contains_reference_only(f):
            raise ConfigurationError("pp-wave profile must be smooth")
        self.f = f
        self.net = net
        names = ("x", "y") + tuple(self.parameters)
        self._fn = CompiledExprs([f, differentiate(f, "x"), differentiate(f, "y")], names)
        self._params = tuple(self.parameters.values())

    def rhs(self, state: Sequence[float], u: float, eps: float) -> np.ndarray:
        v, vd, x, xd, y, yd = state
        f, fx, fy = self._fn((x, y) + self._params, eps, self.net)
        d0 = self.net.value(0, u, eps)
        d1 = self.net.value(1, u, eps)
        return np.array([vd, f * d1 + 2.0 * (fx * xd + fy * yd) * d0, xd, 0.5 * fx * d0, yd, 0.5 * fy * d0])

    def integrate(
        self,
        state0: Sequence[float],
        u0: float,
        u_end: float,
        eps: float,
        tol: float = DEFAULT_TOL,
        samples: int = DEFAULT_SAMPLES,
    ) -> tuple[np.ndarray, np.ndarray, dict]:
        def cap(u, y):
            r = self.net.support_radius(eps)
            if abs(u) <= r * 1.001:
                return r / 10.0
            if u < 0:
                return max(-u - r, r / 10.0)
            return np.inf

        return integrate_ode(lambda u, y: self.rhs(y, u, eps), u0, state0, u_end, tol, cap, samples, {"eps": eps})


def ppwave_reduced_rhs(f: Expr, state: Sequence[float], u: float, eps: float, net: DeltaNet, parameters=None) -> np.ndarray:
    """Derivatives of (v, v̇, x, ẋ, y, ẏ) for the reduced pp-wave system."""
    return PPWaveReduced(f, net, parameters).rhs(state, u, eps)
