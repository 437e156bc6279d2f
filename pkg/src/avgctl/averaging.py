"""The average control system: velocities, support function H, optimal profiles,
the gradient of H, the dual norm N and the rank/dimension probes.

Both :class:`~avgctl.systems.OscillatingSystem` and
:class:`~avgctl.systems.KeplerSystem` are accepted everywhere.  A Kepler system
is handled through its reduced matrix G/omega and the weight omega_bar(x).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize

from .errors import DegenerateMetricError, NotConfiguredError, UndefinedGradientError
from .quadrature import DEFAULT_SPEC, QuadratureSpec, integrate_periodic, locate_zeros, split_points
from .systems import (
    TWO_PI,
    KeplerSystem,
    OscillatingSystem,
    eval_field,
    state_jacobian,
    _theta_derivative,
)

TOL_ZERO = 1e-12
TOL_CTRL = 1e-12


@dataclass(frozen=True)
class ControlProfile:
    """A periodic control U(theta) with sup-norm at most one.

    ``func`` maps an array of angles ``(K,)`` to ``(K, m)``.  ``breakpoints``
    lists angles where U may jump; quadratures split there.
    """

    func: Callable[[np.ndarray], np.ndarray]
    m: int
    breakpoints: tuple = ()
    kind: str = "closed_form"
    values: Optional[np.ndarray] = field(default=None, compare=False)

    def __call__(self, theta) -> np.ndarray:
        th = np.atleast_1d(np.asarray(theta, dtype=float))
        out = np.asarray(self.func(th), dtype=float).reshape(th.size, self.m)
        return out[0] if np.ndim(theta) == 0 else out

    @classmethod
    def closed_form(cls, func, m: int, breakpoints=()) -> "ControlProfile":
        return cls(func=func, m=m, breakpoints=tuple(float(b) for b in breakpoints))

    @classmethod
    def zero(cls, m: int) -> "ControlProfile":
        return cls.closed_form(lambda th: np.zeros((th.size, m)), m)

    @classmethod
    def constant(cls, c) -> "ControlProfile":
        c = np.atleast_1d(np.asarray(c, dtype=float))
        return cls.closed_form(lambda th: np.broadcast_to(c, (th.size, c.size)).copy(), c.size)

    @classmethod
    def piecewise_constant(cls, values) -> "ControlProfile":
        """Bin i holds ``values[i]`` on [2 pi i/N, 2 pi (i+1)/N)."""
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        n_bins, m = values.shape
        width = TWO_PI / n_bins

        def func(th):
            idx = np.floor(np.mod(th, TWO_PI) / width).astype(int) % n_bins
            return values[idx]

        edges = tuple(np.arange(n_bins) * width)
        return cls(func=func, m=m, breakpoints=edges, kind="piecewise_constant", values=values)

    @classmethod
    def project(cls, func, m: int, n_bins: int = 256) -> "ControlProfile":
        """Piecewise-constant version of ``func`` using bin midpoints."""
        mids = (np.arange(n_bins) + 0.5) * (TWO_PI / n_bins)
        return cls.piecewise_constant(np.asarray(func(mids), dtype=float).reshape(n_bins, m))

    def sup_norm(self, n_samples: int = 4096) -> float:
        if self.values is not None:
            return float(np.max(np.linalg.norm(self.values, axis=1)))
        th = np.linspace(0.0, TWO_PI, n_samples, endpoint=False)
        return float(np.max(np.linalg.norm(self(th), axis=1)))

    def is_admissible(self) -> bool:
        return self.sup_norm() <= 1.0 + TOL_CTRL


def random_profile(m: int, rng: np.random.Generator, n_bins: int = 32) -> ControlProfile:
    """Random piecewise-constant profile with values uniform in the unit ball."""
    dirs = rng.normal(size=(n_bins, m))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = rng.random(n_bins) ** (1.0 / m)
    return ControlProfile.piecewise_constant(dirs * radii[:, None])


@dataclass(frozen=True)
class CotangentPoint:
    x: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(-1)
        p = np.asarray(self.p, dtype=float).reshape(-1)
        if x.shape != p.shape:
            raise ValueError(f"state and costate dimensions differ: {x.size} vs {p.size}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p)


@dataclass(frozen=True)
class VelocitySetProbe:
    x: np.ndarray
    dim: int
    span_basis: np.ndarray


# --------------------------------------------------------------------------
# reduced view of either system type


def _is_kepler(sys) -> bool:
    return isinstance(sys, KeplerSystem)


def _effective_field(sys, x):
    """theta -> G(theta,x) (oscillating) or G/omega (Kepler)."""
    if _is_kepler(sys):
        return lambda th: sys.G(th, x) / sys.checked_omega(th, x)[..., None, None]
    return lambda th: sys.G(th, x)


def mean_pulsation(ksys: KeplerSystem, x, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Harmonic mean of the pulsation over the angle."""
    x = ksys.check_state(x)
    inv, _ = integrate_periodic(lambda th: 1.0 / ksys.checked_omega(th, x), spec)
    return 1.0 / inv


def _weight(sys, x, spec) -> float:
    return mean_pulsation(sys, x, spec) if _is_kepler(sys) else 1.0


def _switch_function(sys, x, p):
    geff = _effective_field(sys, x)
    return lambda th: np.einsum("i,kim->km", p, geff(th))


def _kinks(phi, spec: QuadratureSpec) -> list:
    if not spec.kink_split:
        return []
    zeros, near = split_points(phi, spec)
    return zeros + near


# --------------------------------------------------------------------------
# averaged quantities


def average_velocity(sys, x, U: ControlProfile, spec: QuadratureSpec = DEFAULT_SPEC) -> np.ndarray:
    """Mean of G(theta,x) U(theta) (Kepler: omega_bar times the mean of G U / omega)."""
    x = sys.check_state(x)
    if U.m != sys.m:
        raise ValueError(f"profile has {U.m} components, system expects {sys.m}")
    geff = _effective_field(sys, x)
    val, _ = integrate_periodic(
        lambda th: np.einsum("kim,km->ki", geff(th), U(th)), spec, kinks=list(U.breakpoints)
    )
    return _weight(sys, x, spec) * np.atleast_1d(val)


def average_drift(sys: OscillatingSystem, x, spec: QuadratureSpec = DEFAULT_SPEC) -> np.ndarray:
    if getattr(sys, "drift", None) is None:
        raise NotConfiguredError(f"{sys.label or 'system'} has no drift field")
    x = sys.check_state(x)
    val, _ = integrate_periodic(lambda th: sys.G0(th, x), spec)
    return np.atleast_1d(val)


def hamiltonian(sys, x, p, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Support function H(x,p) of the velocity set E(x)."""
    x = sys.check_state(x)
    p = np.asarray(p, dtype=float).reshape(-1)
    if not np.any(p):
        return 0.0
    phi = _switch_function(sys, x, p)
    val, _ = integrate_periodic(lambda th: np.linalg.norm(phi(th), axis=1), spec, kinks=_kinks(phi, spec))
    return _weight(sys, x, spec) * val


def optimal_profile(sys, x, p, spec: QuadratureSpec = DEFAULT_SPEC) -> ControlProfile:
    """U*(theta) = <p,G>^T / |<p,G>|, zero where <p,G> vanishes."""
    x = sys.check_state(x)
    p = np.asarray(p, dtype=float).reshape(-1)
    if not np.any(p):
        return ControlProfile.zero(sys.m)
    geff = _effective_field(sys, x)

    def func(th):
        v = np.einsum("i,kim->km", p, geff(th))
        nrm = np.linalg.norm(v, axis=1, keepdims=True)
        return np.where(nrm > TOL_ZERO, v / np.where(nrm > TOL_ZERO, nrm, 1.0), 0.0)

    zeros = list(locate_zeros(_switch_function(sys, x, p), spec).angles)
    return ControlProfile.closed_form(func, sys.m, breakpoints=zeros)


def _state_derivative_of_field(sys, x):
    """theta -> dG_eff/dx with shape (K, n, m, n)."""
    if _is_kepler(sys):
        if sys.d_field_dx is not None:
            def dgeff(th):
                w = sys.checked_omega(th, x)[..., None, None, None]
                dg = eval_field(sys, th, x, deriv="d_x")
                return dg / w - sys.G(th, x)[..., None] * sys.omega_dx(th, x)[..., None, None, :] / w**2
            return dgeff
        geff = lambda th, y: sys.G(th, y) / sys.checked_omega(th, y)[..., None, None]
        return lambda th: state_jacobian(sys, th, x, func=geff)
    if sys.d_field_dx is not None:
        return lambda th: eval_field(sys, th, x, deriv="d_x")
    return lambda th: state_jacobian(sys, th, x)


def grad_hamiltonian(sys, x, p, spec: QuadratureSpec = DEFAULT_SPEC):
    """(dH/dx, dH/dp) from the averaged-derivative formula for H.

    The Kepler weight omega_bar(x) enters through the product rule.
    """
    x = sys.check_state(x)
    p = np.asarray(p, dtype=float).reshape(-1)
    if not np.any(p):
        raise UndefinedGradientError("H is not differentiable at p = 0")
    n = sys.n
    geff = _effective_field(sys, x)
    dgeff = _state_derivative_of_field(sys, x)
    kepler = _is_kepler(sys)
    if kepler:
        domega = lambda th: sys.omega_dx(th, x)

    def integrand(th):
        g = geff(th)
        v = np.einsum("i,kim->km", p, g)
        nrm = np.linalg.norm(v, axis=1)
        safe = np.where(nrm > TOL_ZERO, nrm, 1.0)
        u = np.where((nrm > TOL_ZERO)[:, None], v / safe[:, None], 0.0)
        dp = np.einsum("kim,km->ki", g, u)
        dx = np.einsum("i,kiml,km->kl", p, dgeff(th), u)
        parts = [dp, dx]
        if kepler:
            w = sys.checked_omega(th, x)
            parts += [nrm[:, None], domega(th) / (w**2)[:, None], (1.0 / w)[:, None]]
        return np.concatenate(parts, axis=1)

    phi = lambda th: np.einsum("i,kim->km", p, geff(th))
    val, _ = integrate_periodic(integrand, spec, kinks=_kinks(phi, spec))
    dH_dp = val[:n]
    dH_dx = val[n:2 * n]
    if kepler:
        h_red = val[2 * n]
        mean_inv = val[-1]
        wbar = 1.0 / mean_inv
        grad_wbar = wbar**2 * val[2 * n + 1:3 * n + 1]
        dH_dx = wbar * dH_dx + grad_wbar * h_red
        dH_dp = wbar * dH_dp
    return dH_dx, dH_dp


def _grad_p(sys, x, p, spec) -> np.ndarray:
    """dH/dp alone (the averaged velocity under U*); no state Jacobian needed."""
    geff = _effective_field(sys, x)

    def integrand(th):
        g = geff(th)
        v = np.einsum("i,kim->km", p, g)
        nrm = np.linalg.norm(v, axis=1)
        safe = np.where(nrm > TOL_ZERO, nrm, 1.0)
        u = np.where((nrm > TOL_ZERO)[:, None], v / safe[:, None], 0.0)
        return np.einsum("kim,km->ki", g, u)

    phi = lambda th: np.einsum("i,kim->km", p, geff(th))
    val, _ = integrate_periodic(integrand, spec, kinks=_kinks(phi, spec))
    return _weight(sys, x, spec) * np.atleast_1d(val)


# --------------------------------------------------------------------------
# dual norm


def _sphere_directions(n: int, count: int, rng=None) -> np.ndarray:
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        ang = np.arange(count) * (TWO_PI / count)
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    if n == 3:
        # Fibonacci lattice
        i = np.arange(count) + 0.5
        z = 1.0 - 2.0 * i / count
        r = np.sqrt(1.0 - z * z)
        ang = np.pi * (1.0 + 5**0.5) * i
        return np.stack([r * np.cos(ang), r * np.sin(ang), z], axis=1)
    rng = rng or np.random.default_rng(0)
    d = rng.normal(size=(count, n))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def _coarse_hamiltonian(sys, x, dirs: np.ndarray, n_theta: int = 128, chunk: int = 2000) -> np.ndarray:
    th = np.arange(n_theta) * (TWO_PI / n_theta)
    g = _effective_field(sys, x)(th)
    w = _weight(sys, x, DEFAULT_SPEC)
    k, n, m = g.shape
    flat = g.transpose(1, 0, 2).reshape(n, k * m)
    out = np.empty(dirs.shape[0])
    for s in range(0, dirs.shape[0], chunk):
        v = (dirs[s:s + chunk] @ flat).reshape(-1, k, m)
        out[s:s + chunk] = np.sqrt(np.einsum("akm,akm->ak", v, v)).mean(axis=1)
    return w * out


def _polish_dual(sys, x, v, p_start, spec):
    """min H(p) over the hyperplane <p,v> = 1, started from p_start."""
    n = v.size
    vv = float(v @ v)
    base = v / vv
    q, _ = np.linalg.qr(np.column_stack([v, np.eye(n)]))
    basis = q[:, 1:n]
    p0 = p_start / float(p_start @ v)
    z0 = basis.T @ (p0 - base)

    def fun(z):
        p = base + basis @ z
        dh_dp = _grad_p(sys, x, p, spec)
        # Euler: H is 1-homogeneous in p
        return float(p @ dh_dp), basis.T @ dh_dp

    if n == 1:
        return hamiltonian(sys, x, base, spec)
    res = minimize(fun, z0, jac=True, method="BFGS", options={"gtol": 1e-11, "maxiter": 200})
    return float(res.fun)


def dual_norm(
    sys,
    x,
    v,
    solver: str = "grid",
    spec: QuadratureSpec = DEFAULT_SPEC,
    n_grid: int = 10_000,
    n_starts: int = 32,
    seed: int = 0,
) -> float:
    """N(x,v) = max{<p,v> : H(x,p) <= 1}, the gauge of the velocity set."""
    x = sys.check_state(x)
    v = np.asarray(v, dtype=float).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise ValueError("velocity must be finite")
    if not np.any(v):
        return 0.0
    n = sys.n
    if solver == "grid" and n > 3:
        solver = "multistart"
    if solver == "grid":
        dirs = _sphere_directions(n, n_grid)
    elif solver == "multistart":
        rng = np.random.default_rng(seed)
        dirs = rng.normal(size=(n_starts, n))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    else:
        raise ValueError(f"unknown dual-norm solver {solver!r}")
    hc = _coarse_hamiltonian(sys, x, dirs)
    if np.min(hc) <= 1e-9 * max(np.max(hc), 1e-300):
        raise DegenerateMetricError(f"H(x, .) vanishes on a nonzero covector at x={x}; not a norm")
    ratio = (dirs @ v) / hc
    if solver == "grid":
        starts = [dirs[int(np.argmax(ratio))]]
    else:
        starts = [d for d, r in zip(dirs, ratio) if r > 0]
    best = np.inf
    for p_start in starts:
        best = min(best, _polish_dual(sys, x, v, p_start, spec))
    if not best > 0:
        raise DegenerateMetricError("minimum of H on the dual hyperplane is not positive")
    return 1.0 / best


def in_velocity_set(sys, x, v, tol: float = 1e-6, **kwargs) -> bool:
    return dual_norm(sys, x, v, **kwargs) <= 1.0 + tol


# --------------------------------------------------------------------------
# ranks


def theta_rank(sys, theta, x, j_max: Optional[int] = None, sv_tol: float = 1e-8) -> int:
    """Numerical rank of [G, dG/dtheta, ..., d^j G/dtheta^j] at (theta, x)."""
    x = sys.check_state(x)
    if j_max is None:
        j_max = sys.n
    th = np.atleast_1d(float(theta))
    blocks = [_theta_derivative(sys, th, x, j)[0] for j in range(j_max + 1)]
    mat = np.hstack(blocks)
    s = np.linalg.svd(mat, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > sv_tol * s[0]))


def velocity_set_dim(sys, x, n_grid: int = 64, sv_tol: float = 1e-9) -> VelocitySetProbe:
    """Dimension and orthonormal basis of the span of the columns of G over a theta grid."""
    if n_grid < 8:
        raise ValueError("n_grid must be >= 8")
    x = sys.check_state(x)
    th = np.arange(n_grid) * (TWO_PI / n_grid)
    g = _effective_field(sys, x)(th)
    mat = np.concatenate(list(g), axis=1)
    u, s, _ = np.linalg.svd(mat, full_matrices=False)
    dim = 0 if s[0] == 0.0 else int(np.sum(s > sv_tol * s[0]))
    return VelocitySetProbe(x=x, dim=dim, span_basis=u[:, :dim])
