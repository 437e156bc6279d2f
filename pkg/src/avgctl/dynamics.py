"""Trajectory integration: oscillating and averaged systems, both extremal flows,
the recovery control and the Kepler clock change.

All integrators step scipy's RK45 by hand so that a trajectory leaving the
domain is returned truncated (with ``flags["exit"]``) instead of raising.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import RK45
from scipy.integrate._ivp.common import OdeSolution
from scipy.interpolate import CubicHermiteSpline, CubicSpline, PchipInterpolator
from scipy.optimize import brentq

from .averaging import (
    TOL_ZERO,
    ControlProfile,
    CotangentPoint,
    _effective_field,
    _is_kepler,
    _weight,
    grad_hamiltonian,
    hamiltonian,
)
from .errors import AmbiguousSwitchError, DomainError, RescaleError
from .quadrature import DEFAULT_SPEC, QuadratureSpec, integrate_periodic
from .systems import TWO_PI, KeplerSystem, OscillatingSystem, kepler_to_oscillating

TRAJ_SCHEMA = "avgctl-traj-1"


@dataclass(frozen=True)
class IntegratorSpec:
    method: str = "rk45"
    abs_tol: float = 1e-9
    rel_tol: float = 1e-9
    max_step: float = np.inf
    event_tol: float = 1e-10

    def __post_init__(self):
        if self.method != "rk45":
            raise ValueError(f"unsupported integrator {self.method!r}")
        if not (self.abs_tol > 0 and self.rel_tol > 0 and self.max_step > 0 and self.event_tol > 0):
            raise ValueError("integrator tolerances must be positive")


DEFAULT_INTEGRATOR = IntegratorSpec()


@dataclass
class Trajectory:
    """Time-stamped states (and optionally costates) with dense output.

    ``dense(t)`` returns the full integration vector ``[x, p]``.  ``derivs``
    holds the right-hand side at each stored time and drives
    :meth:`derivative` through a cubic Hermite interpolant.
    """

    times: np.ndarray
    states: np.ndarray
    costates: Optional[np.ndarray] = None
    dense: Optional[Callable] = None
    derivs: Optional[np.ndarray] = None
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float).reshape(self.times.size, -1)
        if self.costates is not None:
            self.costates = np.asarray(self.costates, dtype=float).reshape(self.times.size, -1)
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("trajectory times must be strictly increasing")
        self._hermite = None
        self._spline = None

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def _full(self) -> np.ndarray:
        if self.costates is None:
            return self.states
        return np.hstack([self.states, self.costates])

    def _interp(self, t):
        if self.dense is not None:
            return np.asarray(self.dense(t))
        if self._spline is None:
            self._spline = CubicSpline(self.times, self._full(), axis=0)
        return self._spline(t).T

    def __call__(self, t) -> np.ndarray:
        """State(s) at ``t``: shape (n,) for a scalar, (len(t), n) for an array."""
        t_arr = np.asarray(t, dtype=float)
        out = self._interp(np.atleast_1d(t_arr))
        out = np.asarray(out).reshape(-1, np.atleast_1d(t_arr).size).T
        out = out[:, : self.n]
        return out[0] if t_arr.ndim == 0 else out

    def costate_at(self, t) -> np.ndarray:
        if self.costates is None:
            raise ValueError("trajectory carries no costate")
        t_arr = np.asarray(t, dtype=float)
        out = np.asarray(self._interp(np.atleast_1d(t_arr))).reshape(-1, np.atleast_1d(t_arr).size).T
        out = out[:, self.n:]
        return out[0] if t_arr.ndim == 0 else out

    def derivative(self, t) -> np.ndarray:
        """State velocity from the dense output (Hermite when RHS samples exist)."""
        t_arr = np.asarray(t, dtype=float)
        if self.derivs is not None:
            if self._hermite is None:
                self._hermite = CubicHermiteSpline(self.times, self._full(), self.derivs, axis=0)
            out = self._hermite(np.atleast_1d(t_arr), 1)[:, : self.n]
        else:
            if self._spline is None:
                self._spline = CubicSpline(self.times, self._full(), axis=0)
            out = self._spline(np.atleast_1d(t_arr), 1)[:, : self.n]
        return out[0] if t_arr.ndim == 0 else out

    @classmethod
    def from_samples(cls, times, states, costates=None, derivs=None) -> "Trajectory":
        return cls(times=times, states=states, costates=costates, derivs=derivs)

    # serialization

    def _columns(self):
        cols = ["t"] + [f"x_{i + 1}" for i in range(self.n)]
        if self.costates is not None:
            cols += [f"p_{i + 1}" for i in range(self.costates.shape[1])]
        return cols

    def to_csv(self, path) -> None:
        from .report import write_csv

        rows = np.column_stack([self.times, self._full()])
        write_csv(path, self._columns(), [list(map(float, r)) for r in rows], schema=TRAJ_SCHEMA)

    def to_json(self) -> dict:
        out = {
            "schema": TRAJ_SCHEMA,
            "times": self.times.tolist(),
            "states": self.states.tolist(),
            "flags": {k: v for k, v in self.flags.items() if _jsonable(v)},
        }
        if self.costates is not None:
            out["costates"] = self.costates.tolist()
        return out

    @classmethod
    def from_json(cls, data: dict) -> "Trajectory":
        if data.get("schema") != TRAJ_SCHEMA:
            raise ValueError(f"expected schema {TRAJ_SCHEMA!r}")
        return cls.from_samples(data["times"], data["states"], data.get("costates"))


def _jsonable(v) -> bool:
    try:
        json.dumps(v)
        return True
    except TypeError:
        return False


# --------------------------------------------------------------------------
# stepping core


@dataclass
class _Event:
    func: Callable[[float, np.ndarray], float]
    terminal: bool = True
    name: str = "event"


@dataclass
class _Run:
    ts: list
    ys: list
    interps: list
    status: str = "finished"
    event: Optional[str] = None
    event_times: dict = field(default_factory=dict)


def _integrate(
    fun,
    t0: float,
    t1: float,
    y0: np.ndarray,
    spec: IntegratorSpec,
    max_step: float = np.inf,
    events: Sequence[_Event] = (),
    domain: Optional[Callable[[np.ndarray], bool]] = None,
    step_hook: Optional[Callable] = None,
) -> _Run:
    run = _Run(ts=[t0], ys=[np.array(y0, dtype=float)], interps=[])
    if t1 <= t0:
        return run
    solver = RK45(fun, t0, y0, t1, rtol=spec.rel_tol, atol=spec.abs_tol,
                  max_step=min(max_step, spec.max_step))
    g_prev = [ev.func(t0, y0) for ev in events]
    # an event sitting on its root at t0 (restart after a switch) is not re-fired
    armed = [abs(g) > spec.event_tol for g in g_prev]
    while solver.status == "running":
        try:
            solver.step()
        except (DomainError, FloatingPointError) as exc:
            run.status = "domain_exit"
            run.event = str(exc)
            break
        if solver.status == "failed":
            run.status = "failed"
            break
        y = solver.y
        if not np.all(np.isfinite(y)) or (domain is not None and not domain(y)):
            run.status = "domain_exit"
            break
        interp = solver.dense_output()
        t_prev, t_new = solver.t_old, solver.t
        hit = None
        for i, ev in enumerate(events):
            g_new = ev.func(t_new, y)
            if armed[i] and g_prev[i] * g_new < 0:
                te = brentq(lambda s: ev.func(s, interp(s)), t_prev, t_new, xtol=spec.event_tol, rtol=1e-15)
                if te <= t0 + 100 * spec.event_tol:
                    g_prev[i] = g_new
                    continue
                run.event_times.setdefault(ev.name, []).append(te)
                if ev.terminal and (hit is None or te < hit[0]):
                    hit = (te, ev.name)
            g_prev[i] = g_new
            armed[i] = True
        if hit is not None:
            te = hit[0]
            if te > t_prev:
                run.ts.append(te)
                run.ys.append(np.asarray(interp(te), dtype=float))
                run.interps.append(interp)
            run.status = "event"
            run.event = hit[1]
            break
        run.ts.append(t_new)
        run.ys.append(np.array(y))
        run.interps.append(interp)
        if step_hook is not None:
            step_hook(solver)
    return run


def _to_trajectory(runs: Sequence[_Run], n: int, with_costate: bool, rhs=None, flags=None) -> Trajectory:
    ts, ys, interps = [runs[0].ts[0]], [runs[0].ys[0]], []
    for run in runs:
        for t, y, it in zip(run.ts[1:], run.ys[1:], run.interps):
            if t <= ts[-1]:
                continue
            ts.append(t)
            ys.append(y)
            interps.append(it)
    ts = np.array(ts)
    ys = np.array(ys)
    dense = OdeSolution(ts, interps) if interps else None
    derivs = None
    if rhs is not None and ts.size > 1:
        derivs = np.array([rhs(t, y) for t, y in zip(ts, ys)])
    traj = Trajectory(
        times=ts,
        states=ys[:, :n],
        costates=ys[:, n:2 * n] if with_costate else None,
        dense=dense,
        derivs=derivs,
        flags=dict(flags or {}),
    )
    last = runs[-1]
    traj.flags.setdefault("exit", last.status)
    return traj


# --------------------------------------------------------------------------
# controls


@dataclass(frozen=True)
class JointControl:
    """u_hat(t, theta): time-dependent periodic profile, zero outside [0, T].

    ``func(t, theta)`` broadcasts two arrays of equal shape ``(K,)`` to ``(K, m)``.
    ``angle_breaks(t)`` lists angles where the profile jumps at time t;
    ``time_breaks`` lists times where it jumps in t.
    """

    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    horizon: float
    m: int
    angle_breaks: Optional[Callable[[float], Sequence[float]]] = None
    time_breaks: tuple = ()

    def __call__(self, t, theta) -> np.ndarray:
        t_arr, th_arr = np.broadcast_arrays(np.atleast_1d(np.asarray(t, dtype=float)),
                                            np.atleast_1d(np.asarray(theta, dtype=float)))
        out = np.asarray(self.func(t_arr, th_arr), dtype=float).reshape(t_arr.size, self.m)
        inside = (t_arr >= 0.0) & (t_arr <= self.horizon)
        return np.where(inside[:, None], out, 0.0)

    def profile_at(self, t: float) -> ControlProfile:
        breaks = tuple(self.angle_breaks(t)) if self.angle_breaks is not None else ()
        return ControlProfile.closed_form(lambda th: self(np.full(th.shape, t), th), self.m, breaks)

    @classmethod
    def from_profile(cls, profile: ControlProfile, horizon: float) -> "JointControl":
        bps = tuple(profile.breakpoints)
        return cls(func=lambda t, th: profile(th), horizon=horizon, m=profile.m,
                   angle_breaks=lambda t: bps)

    @classmethod
    def zero(cls, m: int, horizon: float) -> "JointControl":
        return cls(func=lambda t, th: np.zeros((np.size(t), m)), horizon=horizon, m=m)

    @classmethod
    def from_schedule(cls, times: Sequence[float], profiles: Sequence[ControlProfile], horizon: float) -> "JointControl":
        """Zero-order hold: ``profiles[k]`` applies on [times[k], times[k+1])."""
        times = np.asarray(times, dtype=float)
        m = profiles[0].m

        def index(t):
            return np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(profiles) - 1)

        def func(t, th):
            idx = index(t)
            out = np.empty((t.size, m))
            for k in np.unique(idx):
                sel = idx == k
                out[sel] = profiles[k](th[sel])
            return out

        return cls(func=func, horizon=horizon, m=m,
                   angle_breaks=lambda t: profiles[int(index(np.array([t]))[0])].breakpoints,
                   time_breaks=tuple(times[1:]))


class RecoveryControl:
    """u_eps(t) = mean over theta of u_hat(t + eps*theta, t/eps), u_hat zero past T."""

    def __init__(self, joint: JointControl, eps: float, spec: QuadratureSpec = DEFAULT_SPEC):
        if not eps > 0:
            raise ValueError("eps must be positive")
        self.joint = joint
        self.eps = eps
        self.spec = spec
        self.m = joint.m

    def __call__(self, t: float) -> np.ndarray:
        eps, joint = self.eps, self.joint
        fast = t / eps
        # the shift eps*theta is not periodic: wrap theta and cut at 0
        kinks = [0.0]
        for tau in (0.0, joint.horizon, *joint.time_breaks):
            ang = (tau - t) / eps
            if 0.0 < ang < TWO_PI:
                kinks.append(ang)
        val, _ = integrate_periodic(
            lambda th: joint(t + eps * np.mod(th, TWO_PI), np.full(th.shape, fast)), self.spec, kinks=kinks
        )
        out = np.atleast_1d(val)
        nrm = float(np.linalg.norm(out))
        assert nrm <= 1.0 + 1e-9, f"recovery control norm {nrm} exceeds 1"
        return out

    def break_times(self, t0: float, t1: float) -> list:
        """Times where u_eps may jump: fast-angle breakpoints of the profile."""
        joint = self.joint
        if joint.angle_breaks is None:
            return []
        out = set()
        tt = t0
        # breakpoints may move with t; sample them at each window start
        while tt < t1:
            for b in joint.angle_breaks(tt):
                k0 = np.ceil((t0 / self.eps - b) / TWO_PI)
                k1 = np.floor((t1 / self.eps - b) / TWO_PI)
                for k in np.arange(k0, k1 + 1):
                    out.add(float(self.eps * (b + TWO_PI * k)))
            if not joint.time_breaks:
                break
            nxt = [tb for tb in joint.time_breaks if tb > tt]
            tt = nxt[0] if nxt else t1
        return sorted(t for t in out if t0 < t < t1)


def recovery_control(u_hat0: JointControl, eps: float, spec: QuadratureSpec = DEFAULT_SPEC) -> RecoveryControl:
    return RecoveryControl(u_hat0, eps, spec)


# --------------------------------------------------------------------------
# oscillating and averaged systems


def _segments(t0, t1, breaks):
    pts = [t0] + [b for b in sorted(breaks) if t0 < b < t1] + [t1]
    return list(zip(pts[:-1], pts[1:]))


def integrate_oscillating(
    sys: OscillatingSystem,
    eps: float,
    u: Callable[[float], np.ndarray],
    x0,
    span,
    spec: IntegratorSpec = DEFAULT_INTEGRATOR,
) -> Trajectory:
    """x' = G(t/eps, x) u(t) (+ G0(t/eps, x)); max step capped at pi*eps/4."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    if isinstance(sys, KeplerSystem):
        sys = kepler_to_oscillating(sys)
    x0 = sys.check_state(x0)
    t0, t1 = map(float, span)

    def rhs(t, x):
        theta = t / eps
        dx = sys.G(theta, x) @ np.asarray(u(t), dtype=float).reshape(sys.m)
        if sys.drift is not None:
            dx = dx + sys.G0(theta, x)
        return dx

    breaks = u.break_times(t0, t1) if hasattr(u, "break_times") else []
    runs = []
    y = x0
    for a, b in _segments(t0, t1, breaks):
        run = _integrate(rhs, a, b, y, spec, max_step=np.pi * eps / 4, domain=sys.domain)
        runs.append(run)
        y = run.ys[-1]
        if run.status != "finished":
            break
    return _to_trajectory(runs, sys.n, False, rhs=rhs, flags={"eps": eps})


def _average_rhs(sys, u_hat: JointControl, qspec: QuadratureSpec):
    def rhs(t, x):
        prof = u_hat.profile_at(t)
        geff = _effective_field(sys, x)
        val, _ = integrate_periodic(
            lambda th: np.einsum("kim,km->ki", geff(th), prof(th)), qspec, kinks=list(prof.breakpoints)
        )
        return _weight(sys, x, qspec) * np.atleast_1d(val)

    return rhs


def integrate_average(
    sys,
    x0,
    u_hat: JointControl,
    span,
    spec: IntegratorSpec = DEFAULT_INTEGRATOR,
    qspec: QuadratureSpec = DEFAULT_SPEC,
) -> Trajectory:
    """x'(t) = mean over theta of G(theta, x) u_hat(t, theta) (Kepler: weighted by omega_bar)."""
    x0 = sys.check_state(x0)
    t0, t1 = map(float, span)
    rhs = _average_rhs(sys, u_hat, qspec)
    runs = []
    y = x0
    for a, b in _segments(t0, t1, u_hat.time_breaks + (u_hat.horizon,)):
        run = _integrate(rhs, a, b, y, spec, domain=sys.domain)
        runs.append(run)
        y = run.ys[-1]
        if run.status != "finished":
            break
    return _to_trajectory(runs, sys.n, False, rhs=rhs)


# --------------------------------------------------------------------------
# extremal flows


def _extremal_rhs(sys, qspec):
    n = sys.n

    def rhs(t, z):
        dx, dp = grad_hamiltonian(sys, z[:n], z[n:], qspec)
        return np.concatenate([dp, -dx])

    return rhs


def integrate_average_extremal(
    sys,
    z0: CotangentPoint,
    span,
    spec: IntegratorSpec = DEFAULT_INTEGRATOR,
    qspec: QuadratureSpec = DEFAULT_SPEC,
    zproximity_tol: float = 1e-6,
) -> Trajectory:
    """p' = -dH/dx, x' = dH/dp for the averaged Hamiltonian.

    Stops with ``flags["exit"] == "degenerate"`` if p collapses to 0.  The
    relative drift of H along the stored points is kept in
    ``flags["hamiltonian_drift"]``.
    """
    n = sys.n
    x0 = sys.check_state(z0.x)
    p0 = np.asarray(z0.p, dtype=float)
    if not np.any(p0):
        raise ValueError("extremal flow needs p0 != 0")
    t0, t1 = map(float, span)
    rhs = _extremal_rhs(sys, qspec)
    p_scale = float(np.linalg.norm(p0))
    degenerate = _Event(lambda t, z: float(np.linalg.norm(z[n:])) - 1e-12 * p_scale, True, "degenerate")
    domain = (lambda z: sys.domain(z[:n])) if sys.domain is not None else None

    base_step = spec.max_step
    floor = 1e-4 * (t1 - t0)

    def hook(solver):
        # conservative stepping near the kink set; scalar switch functions
        # vanish generically and keep H smooth, so only m > 1 is watched
        x, p = solver.y[:n], solver.y[n:]
        th = np.arange(256) * (TWO_PI / 256)
        v = np.einsum("i,kim->km", p, _effective_field(sys, x)(th))
        nrm = np.linalg.norm(v, axis=1)
        if nrm.min() < zproximity_tol * max(nrm.max(), 1e-300) and solver.step_size:
            solver.max_step = max(solver.step_size / 2, floor)
        else:
            solver.max_step = base_step

    run = _integrate(rhs, t0, t1, np.concatenate([x0, p0]), spec, events=[degenerate],
                     domain=domain, step_hook=hook if sys.m > 1 else None)
    if run.status == "event":
        run.status = "degenerate"
    traj = _to_trajectory([run], n, True, rhs=rhs)
    h = np.array([hamiltonian(sys, x, p, qspec) for x, p in zip(traj.states, traj.costates)])
    traj.flags["hamiltonian"] = h.tolist()
    traj.flags["hamiltonian_drift"] = float(np.max(np.abs(h - h[0])) / max(abs(h[0]), 1e-300))
    return traj


def integrate_oscillating_extremal(
    sys,
    eps: float,
    z0: CotangentPoint,
    span,
    spec: IntegratorSpec = DEFAULT_INTEGRATOR,
) -> Trajectory:
    """Extremals of the oscillating minimum-time problem with switch detection.

    u* = <p,G>^T/|<p,G>|.  For m = 1 the control is +-1 and flips at every
    zero of <p,G(t/eps,x)>; for m > 1 a switch is a (non-generic) vanishing of
    the vector, detected as |<p,G>| dropping below ``event_tol``.  Switch times
    are returned in ``flags["switch_times"]``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if isinstance(sys, KeplerSystem):
        sys = kepler_to_oscillating(sys)
    n, m = sys.n, sys.m
    x0 = sys.check_state(z0.x)
    p0 = np.asarray(z0.p, dtype=float)
    t0, t1 = map(float, span)
    dgdx = (lambda th, x: sys.d_field_dx(th, x)) if sys.d_field_dx is not None else None

    def vec(t, z):
        return z[n:] @ sys.G(t / eps, z[:n])

    def jac(t, x):
        if dgdx is not None:
            return np.asarray(dgdx(np.array([t / eps]), x))[0]
        from .systems import state_jacobian

        return state_jacobian(sys, np.array([t / eps]), x)[0]

    def make_rhs(sigma):
        def rhs(t, z):
            x, p = z[:n], z[n:]
            g = sys.G(t / eps, x)
            v = p @ g
            if m == 1:
                u = np.array([sigma])
            else:
                nv = np.linalg.norm(v)
                u = v / nv if nv > TOL_ZERO else np.zeros(m)
            dx = g @ u
            dp = -np.einsum("i,iml,m->l", p, jac(t, x), u)
            return np.concatenate([dx, dp])

        return rhs

    v0 = vec(t0, np.concatenate([x0, p0]))
    if np.linalg.norm(v0) <= spec.event_tol:
        raise ValueError("initial point lies on the switching surface")
    if m == 1:
        event = _Event(lambda t, z: float(vec(t, z)[0]), True, "switch")
    else:
        event = _Event(lambda t, z: float(np.linalg.norm(vec(t, z))) - spec.event_tol, True, "switch")
    sigma = float(np.sign(v0[0])) if m == 1 else 1.0
    z = np.concatenate([x0, p0])
    t = t0
    runs, switches = [], []
    cap = np.pi * eps / 4
    while t < t1:
        run = _integrate(make_rhs(sigma), t, t1, z, spec, max_step=cap, events=[event])
        runs.append(run)
        if run.status != "event":
            break
        ts = run.ts[-1]
        zs = run.ys[-1]
        h = 1e-7 * eps
        rate = (np.linalg.norm(vec(ts + h, zs)) - np.linalg.norm(vec(ts - h, zs))) / (2 * h)
        if m == 1:
            rate = (vec(ts + h, zs)[0] - vec(ts - h, zs)[0]) / (2 * h)
        if abs(rate) < spec.event_tol:
            raise AmbiguousSwitchError(f"non-transversal switch at t={ts:.12g}")
        switches.append(ts)
        sigma = -sigma
        # step past the root so the restarted event does not fire at t0
        t = ts
        z = zs
        if m > 1:
            # cross the near-zero region along the current flow
            t_skip = min(ts + 2 * spec.event_tol / max(abs(rate), 1e-300) + 1e-9 * eps, t1)
            z = zs + (t_skip - ts) * make_rhs(sigma)(ts, zs)
            t = t_skip
    traj = _to_trajectory(runs, n, True)
    traj.flags["switch_times"] = switches
    traj.flags["eps"] = eps
    return traj


# --------------------------------------------------------------------------
# Kepler systems


def integrate_kepler(
    ksys: KeplerSystem,
    eps: float,
    xi0,
    span,
    v: Optional[Callable[[float], np.ndarray]] = None,
    law: Optional[Callable[[float, float, np.ndarray], np.ndarray]] = None,
    spec: IntegratorSpec = DEFAULT_INTEGRATOR,
) -> Trajectory:
    """theta' = omega + g v, x' = G v with |v| <= eps.

    Pass an open-loop ``v(t)`` or a feedback ``law(t, Theta, x)`` where Theta is
    the unwrapped angle.  States are stored as ``(Theta, x_1..x_n)``.
    """
    if v is None and law is None:
        law = lambda t, th, x: np.zeros(ksys.m)
    n, m = ksys.n, ksys.m
    theta0, x0 = float(xi0[0]), ksys.check_state(np.asarray(xi0[1:], dtype=float))
    t0, t1 = map(float, span)
    bound = eps * (1.0 + 1e-12)

    def control(t, y):
        c = np.asarray(v(t) if v is not None else law(t, y[0], y[1:]), dtype=float).reshape(m)
        if np.linalg.norm(c) > bound:
            raise ValueError(f"control norm {np.linalg.norm(c):.6g} exceeds eps={eps}")
        return c

    def rhs(t, y):
        th, x = y[0], y[1:]
        c = control(t, y)
        w = float(ksys.checked_omega(th, x))
        return np.concatenate([[w + float(ksys.g(th, x) @ c)], ksys.G(th, x) @ c])

    domain = (lambda y: ksys.domain(y[1:])) if ksys.domain is not None else None
    run = _integrate(rhs, t0, t1, np.concatenate([[theta0], x0]), spec, domain=domain)
    traj = _to_trajectory([run], n + 1, False, rhs=rhs)
    traj.flags["eps"] = eps
    return traj


@dataclass
class KeplerClock:
    """lambda(t) = eps (Theta(t) - Theta(0)), its inverse, and x as a function of lambda."""

    lambda_of_t: Callable
    t_of_lambda: Callable
    x_of_lambda: Trajectory


def kepler_time_rescale(traj: Trajectory, eps: float, samples_per_step: int = 8) -> KeplerClock:
    """Reparametrize a Kepler trajectory (states ``(Theta, x)``) by the slow clock."""
    if traj.times.size < 2:
        raise RescaleError("need at least two samples")
    t = traj.times
    fine = np.unique(np.concatenate([
        np.linspace(a, b, samples_per_step, endpoint=False) for a, b in zip(t[:-1], t[1:])
    ] + [t[-1:]]))
    y = traj(fine)
    theta = y[:, 0]
    lam = eps * (theta - theta[0])
    if not np.all(np.diff(lam) > 0):
        raise RescaleError("cumulated angle is not strictly increasing")
    lam_of_t = PchipInterpolator(fine, lam)
    t_of_lam = PchipInterpolator(lam, fine)
    x_traj = Trajectory.from_samples(lam, y[:, 1:])
    return KeplerClock(lambda_of_t=lam_of_t, t_of_lambda=t_of_lam, x_of_lambda=x_traj)


def integrate_kepler_reduced(
    ksys: KeplerSystem,
    eps: float,
    u_hat: Callable[[float], np.ndarray],
    theta0: float,
    x0,
    span,
    spec: IntegratorSpec = DEFAULT_INTEGRATOR,
) -> Trajectory:
    """dx/dlambda = G u / (omega + eps g u) at angle theta0 + lambda/eps."""
    x0 = ksys.check_state(x0)
    l0, l1 = map(float, span)

    def rhs(lam, x):
        th = theta0 + lam / eps
        u = np.asarray(u_hat(lam), dtype=float).reshape(ksys.m)
        den = float(ksys.checked_omega(th, x)) + eps * float(ksys.g(th, x) @ u)
        return ksys.G(th, x) @ u / den

    run = _integrate(rhs, l0, l1, x0, spec, max_step=np.pi * eps / 4, domain=ksys.domain)
    return _to_trajectory([run], ksys.n, False, rhs=rhs)
