"""Experiment harnesses: convergence sweeps, inclusion residuals, gradient and
regularity probes, minimum-time shooting and the bracket rank identity."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq, least_squares

from .averaging import (
    CotangentPoint,
    _effective_field,
    _is_kepler,
    dual_norm,
    grad_hamiltonian,
    hamiltonian,
    optimal_profile,
    theta_rank,
)
from .dynamics import (
    DEFAULT_INTEGRATOR,
    IntegratorSpec,
    JointControl,
    Trajectory,
    integrate_average,
    integrate_average_extremal,
    integrate_kepler,
    integrate_oscillating,
    recovery_control,
)
from .errors import InvalidCenterError, ProbeFailureError, ShootingFailedError
from .quadrature import DEFAULT_SPEC, QuadratureSpec, locate_zeros
from .systems import TWO_PI, KeplerSystem

SUP_GRID = 1000
RESIDUAL_GRID = 500
FEASIBLE_RESIDUAL = 5e-3
TIGHT_QUAD = QuadratureSpec(abs_tol=1e-13, rel_tol=1e-13)


def thread_count(threads: Optional[int] = None) -> int:
    if threads is not None:
        return max(1, int(threads))
    try:
        return max(1, int(os.environ.get("AVGCTL_THREADS", "1")))
    except ValueError:
        return 1


def _pmap(func, items, threads=None) -> list:
    items = list(items)
    k = thread_count(threads)
    if k == 1 or len(items) < 2:
        return [func(it) for it in items]
    with ThreadPoolExecutor(max_workers=k) as pool:
        return list(pool.map(func, items))


def _loglog_fit(eps, err):
    """Least-squares line through (log eps, log err): (slope, intercept, r^2)."""
    lx, ly = np.log(eps), np.log(err)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


# --------------------------------------------------------------------------
# convergence


@dataclass
class ConvergenceReport:
    eps_list: list
    sup_errors: list
    fitted_slope: float
    fitted_log_intercept: float
    r_squared: float
    failed: list = field(default_factory=list)
    degenerate: bool = False

    def to_json(self) -> dict:
        return {
            "eps_list": list(map(float, self.eps_list)),
            "sup_errors": list(map(float, self.sup_errors)),
            "fitted_slope": self.fitted_slope,
            "fitted_log_intercept": self.fitted_log_intercept,
            "r_squared": self.r_squared,
            "failed": list(map(float, self.failed)),
            "degenerate": self.degenerate,
        }


def _check_eps_list(eps_list, min_len=4):
    eps = np.asarray(eps_list, dtype=float)
    if eps.size < min_len:
        raise ValueError(f"need at least {min_len} eps values")
    if not (np.all(eps > 0) and np.all(np.diff(eps) < 0)):
        raise ValueError("eps_list must be positive and strictly decreasing")
    return eps


def _oscillating_run(sys, x0, u_hat0, T, eps, spec, qspec, horizon=None):
    if _is_kepler(sys):
        law = lambda t, th, x: eps * u_hat0(eps * t, th)[0]
        span = (0.0, (horizon or T) / eps)
        traj = integrate_kepler(sys, eps, np.r_[0.0, x0], span, law=law, spec=spec)
        # report on the slow clock tau = eps t with the angle stripped
        return Trajectory(times=eps * traj.times, states=traj.states[:, 1:], flags=traj.flags)
    u = recovery_control(u_hat0, eps, qspec)
    return integrate_oscillating(sys, eps, u, x0, (0.0, horizon or T), spec)


def convergence_sweep(
    sys,
    x0,
    u_hat0: JointControl,
    T: float,
    eps_list: Sequence[float],
    spec: IntegratorSpec = DEFAULT_INTEGRATOR,
    qspec: QuadratureSpec = DEFAULT_SPEC,
    n_grid: int = SUP_GRID,
    threads: Optional[int] = None,
) -> ConvergenceReport:
    """sup_t |x_eps(t) - x_0(t)| for each eps and a log-log slope fit.

    Oscillating systems are driven by the recovery control built from
    ``u_hat0``.  Kepler systems are driven by the angle feedback
    v = eps * u_hat0(eps t, Theta(t)) and compared on the slow clock eps t.
    """
    eps = _check_eps_list(eps_list)
    x0 = sys.check_state(x0)
    avg = integrate_average(sys, x0, u_hat0, (0.0, T), spec, qspec)
    if avg.t_end < T:
        raise ProbeFailureError("averaged trajectory leaves the domain before T")
    grid = np.linspace(0.0, T, n_grid)
    ref = avg(grid)

    def one(e):
        traj = _oscillating_run(sys, x0, u_hat0, T, e, spec, qspec)
        if traj.t_end < T * (1 - 1e-12):
            return np.nan
        return float(np.max(np.linalg.norm(traj(grid) - ref, axis=1)))

    errs = np.array(_pmap(one, eps, threads))
    failed = eps[~np.isfinite(errs)].tolist()
    ok = np.isfinite(errs)
    scale = max(1.0, float(np.max(np.abs(ref))))
    degenerate = bool(np.all(errs[ok] <= 10 * spec.abs_tol * scale)) if ok.any() else True
    slope = intercept = r2 = float("nan")
    if not degenerate and ok.sum() >= 2:
        slope, intercept, r2 = _loglog_fit(eps[ok], errs[ok])
    return ConvergenceReport(eps.tolist(), errs.tolist(), slope, intercept, r2, failed, degenerate)


# --------------------------------------------------------------------------
# inclusion residual


def inclusion_residual(sys, traj: Trajectory, n_grid: int = RESIDUAL_GRID, **dual_kwargs) -> float:
    """max over a time grid of max(0, N(x, x') - 1)."""
    grid = np.linspace(traj.t_start, traj.t_end, n_grid)
    xs = traj(grid)
    vs = traj.derivative(grid)
    worst = 0.0
    for x, v in zip(xs, vs):
        worst = max(worst, dual_norm(sys, x, v, **dual_kwargs) - 1.0)
    return worst


# --------------------------------------------------------------------------
# gradient validation


def kink_proximity(sys, x, p, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Normalized distance of (x, p) to the kink set.

    m > 1: min over theta of |<p,G>| / max |<p,G>|.  m = 1: the smallest
    |d/dtheta <p,G>| at a zero, relative to the same scale (1 if no zero).
    """
    geff = _effective_field(sys, x)
    phi = lambda th: np.einsum("i,kim->km", p, geff(th))
    th = np.arange(spec.n_scan) * (TWO_PI / spec.n_scan)
    nrm = np.linalg.norm(phi(th), axis=1)
    scale = float(nrm.max())
    if scale == 0.0:
        return 0.0
    if sys.m > 1:
        report = locate_zeros(phi, spec)
        if len(report):
            return 0.0
        return float(nrm.min()) / scale
    report = locate_zeros(phi, spec)
    if not len(report):
        return 1.0
    h = 1e-6
    slopes = [abs(float(phi(np.array([t + h]))[0, 0] - phi(np.array([t - h]))[0, 0])) / (2 * h)
              for t in report.angles]
    return min(slopes) / scale


def _fd_gradient(f, z, h):
    """Five-point central differences, fourth order."""
    g = np.empty_like(z)
    for i in range(z.size):
        hi = h * max(1.0, abs(z[i]))
        e = np.zeros_like(z)
        e[i] = hi
        g[i] = (-f(z + 2 * e) + 8 * f(z + e) - 8 * f(z - e) + f(z - 2 * e)) / (12 * hi)
    return g


def _sample_point(sys, rng):
    if sys.sampler is None:
        raise ValueError("system has no sampler")
    return sys.check_state(sys.sampler(rng)), rng.normal(size=sys.n)


def grad_check(
    sys,
    samples: int = 100,
    exclusion_radius: float = 1e-2,
    seed: int = 0,
    h: float = 2e-4,
    spec: QuadratureSpec = TIGHT_QUAD,
    threads: Optional[int] = None,
) -> float:
    """Max relative error of grad_hamiltonian against fourth-order differences.

    Points closer than ``exclusion_radius`` to the kink set are redrawn.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    pts = []
    attempts = 0
    while len(pts) < samples:
        attempts += 1
        if attempts > 50 * samples:
            raise ProbeFailureError("too many samples rejected near the kink set")
        x, p = _sample_point(sys, rng)
        if kink_proximity(sys, x, p) >= exclusion_radius:
            pts.append((x, p))
    n = sys.n

    def one(pt):
        x, p = pt
        dx, dp = grad_hamiltonian(sys, x, p, spec)
        exact = np.concatenate([dx, dp])
        f = lambda z: hamiltonian(sys, z[:n], z[n:], spec)
        fd = _fd_gradient(f, np.concatenate([x, p]), h)
        return float(np.linalg.norm(exact - fd) / np.linalg.norm(fd))

    return max(_pmap(one, pts, threads))


def h2_gradient_decay(sys, x, n_rays: int = 20, small: float = 1e-3, seed: int = 0) -> np.ndarray:
    """|grad H^2| at |p| = small divided by its value at |p| = 1, along random rays."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_rays):
        d = rng.normal(size=sys.n)
        d /= np.linalg.norm(d)
        vals = []
        for r in (1.0, small):
            p = r * d
            dx, dp = grad_hamiltonian(sys, x, p)
            vals.append(np.linalg.norm(2 * hamiltonian(sys, x, p) * np.concatenate([dx, dp])))
        out.append(vals[1] / vals[0])
    return np.array(out)


# --------------------------------------------------------------------------
# regularity across the kink set


@dataclass
class LipLogReport:
    radii: list
    ratios: list
    lipschitz: list

    def bounded(self, factor: float = 3.0) -> bool:
        tail = np.asarray(self.ratios[-3:])
        return bool(tail.max() / tail.min() <= factor)

    def to_json(self) -> dict:
        return {"radii": self.radii, "ratios": self.ratios, "lipschitz": self.lipschitz}


def liplog_modulus(
    sys,
    center: CotangentPoint,
    radii: Sequence[float] = (1e-2, 1e-3, 1e-4, 1e-5),
    n_pairs: int = 64,
    seed: int = 0,
    spec: QuadratureSpec = DEFAULT_SPEC,
    threads: Optional[int] = None,
) -> LipLogReport:
    """max |dH(X) - dH(Y)| / (r ln(1/r)) over pairs |X - Y| = r centred on a kink point."""
    x, p = sys.check_state(center.x), np.asarray(center.p, dtype=float)
    geff = _effective_field(sys, x)
    report = locate_zeros(lambda th: np.einsum("i,kim->km", p, geff(th)), spec, zero_tol=1e-9)
    if len(report) != 1:
        raise InvalidCenterError(f"center must carry exactly one zero angle, found {len(report)}")
    radii = [float(r) for r in radii]
    if not all(0 < r < 1 for r in radii) or np.any(np.diff(radii) >= 0):
        raise ValueError("radii must be decreasing values in (0, 1)")
    rng = np.random.default_rng(seed)
    n = sys.n
    dirs = rng.normal(size=(n_pairs, 2 * n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    z0 = np.concatenate([x, p])

    def dH(z):
        dx, dp = grad_hamiltonian(sys, z[:n], z[n:], spec)
        return np.concatenate([dx, dp])

    ratios, lips = [], []
    for r in radii:
        diffs = _pmap(lambda d: float(np.linalg.norm(dH(z0 + 0.5 * r * d) - dH(z0 - 0.5 * r * d))), dirs, threads)
        worst = max(diffs)
        ratios.append(float(worst / (r * np.log(1.0 / r))))
        lips.append(float(worst / r))
    return LipLogReport(radii, ratios, lips)


def flow_uniqueness_probe(
    sys,
    z0: CotangentPoint,
    delta: float,
    T: float,
    n_perturb: int = 16,
    seed: int = 0,
    spec: IntegratorSpec = IntegratorSpec(abs_tol=1e-12, rel_tol=1e-12),
    threads: Optional[int] = None,
) -> float:
    """Max terminal distance between the extremal from z0 and from perturbed starts."""
    if not 0 <= delta <= 1e-6:
        raise ValueError("delta must lie in [0, 1e-6]")
    n = sys.n
    base = np.concatenate([np.asarray(z0.x, dtype=float), np.asarray(z0.p, dtype=float)])
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(n_perturb, 2 * n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    starts = [base] + [base + delta * d for d in dirs]

    def end(z):
        traj = integrate_average_extremal(sys, CotangentPoint(z[:n], z[n:]), (0.0, T), spec)
        if traj.t_end < T:
            raise ProbeFailureError(f"extremal stopped at t={traj.t_end:.6g} ({traj.flags.get('exit')})")
        return np.concatenate([traj.states[-1], traj.costates[-1]])

    ends = _pmap(end, starts, threads)
    return max(float(np.linalg.norm(e - ends[0])) for e in ends[1:])


# --------------------------------------------------------------------------
# minimum time


@dataclass
class ShootingResult:
    T0: float
    p0: np.ndarray
    terminal_miss: float
    iterations: int
    trajectory: Optional[Trajectory] = None

    def to_json(self) -> dict:
        return {
            "T0": self.T0,
            "p0": np.asarray(self.p0).tolist(),
            "terminal_miss": self.terminal_miss,
            "iterations": self.iterations,
        }


def _sphere_point(angles: np.ndarray) -> np.ndarray:
    """Hyperspherical angles (n-1 of them) to a unit vector in R^n."""
    n = angles.size + 1
    out = np.ones(n)
    for i, a in enumerate(angles):
        out[i] *= np.cos(a)
        out[i + 1:] *= np.sin(a)
    return out


def _sphere_angles(v: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v)
    n = v.size
    ang = np.empty(n - 1)
    for i in range(n - 2):
        ang[i] = np.arctan2(np.linalg.norm(v[i + 1:]), v[i])
    ang[n - 2] = np.arctan2(v[n - 1], v[n - 2])
    return ang


def min_time_shoot(
    sys,
    x0,
    x1,
    shoot_tol: float = 1e-6,
    max_iter: int = 200,
    n_starts: int = 8,
    seed: int = 0,
    spec: IntegratorSpec = IntegratorSpec(abs_tol=1e-11, rel_tol=1e-11),
) -> ShootingResult:
    """Extremal time from x0 to x1 for the averaged system (local optimality only).

    Unknowns are the direction of p0 (hyperspherical angles, p0 then scaled to
    H(x0, p0) = 1) and the final time T.
    """
    x0 = sys.check_state(x0)
    x1 = sys.check_state(x1)
    v = x1 - x0
    dist = float(np.linalg.norm(v))
    if dist == 0.0:
        raise ValueError("x0 and x1 coincide")
    T_guess = dual_norm(sys, x0, v)

    def costate(angles):
        q = _sphere_point(angles)
        return q / hamiltonian(sys, x0, q)

    def residual(params):
        T = params[-1]
        if T <= 0:
            return np.full(sys.n, 1e3) * (1 - T)
        traj = integrate_average_extremal(sys, CotangentPoint(x0, costate(params[:-1])), (0.0, T), spec)
        if traj.t_end < T:
            return np.full(sys.n, 1e3)
        return (traj.states[-1] - x1) / dist

    rng = np.random.default_rng(seed)
    starts = [v / dist] + [rng.normal(size=sys.n) for _ in range(n_starts - 1)]
    total = 0
    best = None
    for d in starts:
        sol = least_squares(residual, np.r_[_sphere_angles(d), T_guess], method="lm",
                            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_iter)
        total += sol.nfev
        miss = float(np.linalg.norm(sol.fun)) * dist
        if best is None or miss < best[0]:
            best = (miss, sol)
        if miss <= shoot_tol and sol.x[-1] > 0:
            break
    miss, sol = best
    if miss > shoot_tol or sol.x[-1] <= 0:
        raise ShootingFailedError(f"shooting did not converge (best miss {miss:.3g})")
    p0 = costate(sol.x[:-1])
    T0 = float(sol.x[-1])
    traj = integrate_average_extremal(sys, CotangentPoint(x0, p0), (0.0, T0), spec)
    return ShootingResult(T0=T0, p0=p0, terminal_miss=miss, iterations=total, trajectory=traj)


def extremal_control(sys, traj: Trajectory, spec: QuadratureSpec = DEFAULT_SPEC) -> JointControl:
    """Zero-order hold of U*_{p(t),x(t)} at the stored extremal times."""
    profiles = [optimal_profile(sys, x, p, spec) for x, p in zip(traj.states[:-1], traj.costates[:-1])]
    return JointControl.from_schedule(traj.times[:-1], profiles, traj.t_end)


@dataclass
class TimeLimitReport:
    T0: float
    eps_list: list
    reach_times: list
    ball_constant: float
    excess_slope: float

    @property
    def excess(self) -> list:
        return [t - self.T0 for t in self.reach_times]

    def to_json(self) -> dict:
        return {
            "T0": self.T0,
            "eps_list": self.eps_list,
            "reach_times": self.reach_times,
            "excess": self.excess,
            "ball_constant": self.ball_constant,
            "excess_slope": self.excess_slope,
        }


def _first_entry(traj: Trajectory, x1, radius, t_max):
    grid = np.linspace(traj.t_start, min(traj.t_end, t_max), 4001)
    dist = np.linalg.norm(traj(grid) - x1, axis=1) - radius
    inside = np.nonzero(dist <= 0)[0]
    if inside.size == 0:
        return None
    k = int(inside[0])
    if k == 0:
        return float(grid[0])
    g = lambda t: float(np.linalg.norm(traj(t) - x1)) - radius
    return brentq(g, grid[k - 1], grid[k], xtol=1e-13)


def time_limit_probe(
    sys,
    eps_list: Sequence[float],
    x0,
    x1,
    shot: Optional[ShootingResult] = None,
    ball_constant: Optional[float] = None,
    spec: IntegratorSpec = DEFAULT_INTEGRATOR,
    qspec: QuadratureSpec = DEFAULT_SPEC,
    threads: Optional[int] = None,
) -> TimeLimitReport:
    """First entry time of the recovered oscillating trajectory into B(x1, C eps).

    Kepler systems report eps times the reach time (slow clock).  When not
    given, C is twice the largest sup distance / eps between the oscillating
    and averaged trajectories on [0, T0] over the listed eps.
    """
    x0 = sys.check_state(x0)
    x1 = np.asarray(x1, dtype=float)
    eps = np.asarray(eps_list, dtype=float)
    if np.array_equal(x0, x1):
        return TimeLimitReport(0.0, eps.tolist(), [0.0] * eps.size, 0.0, float("nan"))
    if shot is None:
        shot = min_time_shoot(sys, x0, x1)
    T0 = shot.T0
    u_hat0 = extremal_control(sys, shot.trajectory, qspec)
    horizon = 1.5 * T0
    runs = _pmap(lambda e: _oscillating_run(sys, x0, u_hat0, T0, e, spec, qspec, horizon=horizon), eps, threads)
    if ball_constant is None:
        grid = np.linspace(0.0, T0, SUP_GRID)
        ref = shot.trajectory(grid)
        # factor 2: the ball must dominate the tracking error, or entry happens only
        # at the error peak and the excess is noise
        ball_constant = 2.0 * max(float(np.max(np.linalg.norm(r(grid) - ref, axis=1))) / e for r, e in zip(runs, eps))
    reach = []
    for r, e in zip(runs, eps):
        t = _first_entry(r, x1, ball_constant * e, horizon)
        if t is None:
            raise ProbeFailureError(f"ball B(x1, {ball_constant * e:.3g}) not entered for eps={e}")
        reach.append(float(t))
    excess = np.abs(np.array(reach) - T0)
    slope = _loglog_fit(eps, excess)[0] if eps.size >= 2 and np.all(excess > 0) else float("nan")
    return TimeLimitReport(T0, eps.tolist(), reach, float(ball_constant), slope)


# --------------------------------------------------------------------------
# bracket rank


@dataclass
class BracketRank:
    lhs_rank: int
    rhs_rank: int
    condition: float
    reliable: bool

    def __iter__(self):
        yield self.lhs_rank
        yield self.rhs_rank


def _jacobian(f: Callable, z: np.ndarray, h: float) -> np.ndarray:
    """Richardson-extrapolated central-difference Jacobian."""
    cols = []
    for i in range(z.size):
        e = np.zeros_like(z)
        e[i] = 1.0

        def d(step):
            return (f(z + step * e) - f(z - step * e)) / (2 * step)

        cols.append((4 * d(h / 2) - d(h)) / 3)
    return np.stack(cols, axis=1)


def _bracket(X: Callable, Y: Callable, h: float) -> Callable:
    return lambda z: _jacobian(Y, z, h) @ X(z) - _jacobian(X, z, h) @ Y(z)


def bracket_rank_check(
    ksys: KeplerSystem,
    xi,
    j_max: int = 2,
    h: float = 1e-4,
    sv_tol: float = 1e-6,
) -> BracketRank:
    """Rank of {f0, ad_f0^j f_k} on S1 x V against the angle-derivative rank of G.

    f0 = (omega, 0) and f_k = (g_k, G e_k); brackets are nested finite
    differences.  The identity expected is rhs = lhs + 1.
    """
    if not 0 <= j_max <= 3:
        raise ValueError("j_max must lie in 0..3")
    xi = np.asarray(xi, dtype=float)
    theta, x = float(xi[0]), ksys.check_state(xi[1:])
    lhs = theta_rank(ksys, theta, x, j_max=j_max)

    def f0(z):
        return np.r_[float(ksys.omega(z[0], z[1:])), np.zeros(ksys.n)]

    def fk(k):
        return lambda z: np.r_[ksys.g(z[0], z[1:])[k], ksys.G(z[0], z[1:])[:, k]]

    vecs = [f0(xi)]
    for k in range(ksys.m):
        field = fk(k)
        for j in range(j_max + 1):
            vecs.append(field(xi))
            field = _bracket(f0, field, h)
    mat = np.stack(vecs, axis=1)
    s = np.linalg.svd(mat, compute_uv=False)
    kept = s[s > sv_tol * s[0]]
    rhs = int(kept.size)
    cond = float(kept[0] / kept[-1])
    return BracketRank(lhs, rhs, cond, cond <= 1e8)


# --------------------------------------------------------------------------
# two-body identities


@dataclass
class TwoBodyVerification:
    samples: int
    detM_max_rel_err: float
    switch_histogram: dict
    switch_disagreements: int
    mean_motion_max_rel_err: float

    @property
    def passed(self) -> bool:
        return (
            self.detM_max_rel_err <= 1e-10
            and all(k < 2 for k in self.switch_histogram)
            and self.switch_disagreements == 0
            and self.mean_motion_max_rel_err <= 1e-8
        )

    def to_json(self) -> dict:
        return {
            "samples": self.samples,
            "detM_max_rel_err": self.detM_max_rel_err,
            "switch_histogram": {str(k): v for k, v in sorted(self.switch_histogram.items())},
            "switch_disagreements": self.switch_disagreements,
            "mean_motion_max_rel_err": self.mean_motion_max_rel_err,
        }


def _ecc_sample(rng, e_max):
    r = e_max * np.sqrt(rng.random())
    ang = rng.uniform(0.0, TWO_PI)
    return r * np.cos(ang), r * np.sin(ang)


def det_m_errors(samples: int, seed: int = 0, e_max: float = 0.95) -> np.ndarray:
    from .two_body import det_M, det_M_closed_form

    rng = np.random.default_rng(seed)
    out = np.empty(samples)
    for i in range(samples):
        ex, ey = _ecc_sample(rng, e_max)
        lam = rng.normal(scale=3.0)
        rhs = det_M_closed_form(ex, ey, lam)
        out[i] = abs(det_M(ex, ey, lam) - rhs) / abs(rhs)
    return out


def switch_corpus(samples: int, seed: int = 0, e_max: float = 0.85):
    """(ex, ey, A, X, Y) samples: even indices generic, odd ones built to vanish once."""
    from .two_body import null_costate

    rng = np.random.default_rng(seed)
    out = []
    for i in range(samples):
        ex, ey = _ecc_sample(rng, e_max)
        if i % 2:
            A, X, Y = null_costate(ex, ey, rng.uniform(0.0, TWO_PI)) * rng.uniform(0.5, 2.0)
        else:
            A, X, Y = rng.normal(size=3)
        out.append((ex, ey, float(A), float(X), float(Y)))
    return out


def switch_check(corpus, spec: QuadratureSpec = DEFAULT_SPEC):
    """Histogram of brute-force zero counts and disagreements with switch_angle."""
    from .two_body import reduced_matrix, switch_angle

    hist: dict = {}
    disagree = 0
    for ex, ey, A, X, Y in corpus:
        row = np.array([A, X, Y])
        zeros = locate_zeros(lambda L: np.einsum("i,kim->km", row, reduced_matrix(ex, ey, L)), spec, zero_tol=1e-9)
        hist[len(zeros)] = hist.get(len(zeros), 0) + 1
        sw = switch_angle(ex, ey, A, X, Y)
        if (sw is None) != (len(zeros) == 0):
            disagree += 1
        elif sw is not None and len(zeros) == 1:
            gap = abs((zeros.angles[0] - sw + np.pi) % TWO_PI - np.pi)
            disagree += int(gap > 1e-6)
    return hist, disagree


def mean_motion_errors(samples: int, seed: int = 0, e_max: float = 0.9) -> np.ndarray:
    from .quadrature import integrate_periodic
    from .two_body import gauss_fields

    rng = np.random.default_rng(seed)
    out = np.empty(samples)
    for i in range(samples):
        ex, ey = _ecc_sample(rng, e_max * 0.999)
        val, _ = integrate_periodic(lambda L: 1.0 / gauss_fields(ex, ey, L, e_cap=0.999).w)
        out[i] = abs(val - 1.0)
    return out


def verify_two_body(samples: int = 1000, seed: int = 0) -> TwoBodyVerification:
    det = det_m_errors(samples, seed)
    hist, disagree = switch_check(switch_corpus(samples, seed + 1))
    mm = mean_motion_errors(min(samples, 200), seed + 2)
    return TwoBodyVerification(samples, float(det.max()), hist, disagree, float(mm.max()))
