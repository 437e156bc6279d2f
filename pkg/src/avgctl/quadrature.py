"""Periodic quadrature over the circle and localization of zeros of periodic maps.

Integrands are called with a whole array of angles at once and must return an
array of shape ``(K,)`` or ``(K, k)``.  Results are *means*:
``(1/2pi) * integral over [0, 2pi)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import QuadratureConvergenceError
from .systems import TWO_PI, normalize_angle

# QUADPACK qk21 abscissae / weights
_XGK = np.array([
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0,
])
_WGK = np.array([
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077482434722549, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])

_NODES = np.concatenate([-_XGK[:-1], [0.0], _XGK[:-1][::-1]])
_W_KRONROD = np.concatenate([_WGK[:-1], [_WGK[-1]], _WGK[:-1][::-1]])
_W_GAUSS = np.zeros(21)
# Gauss nodes are the odd-indexed Kronrod abscissae (1, 3, ..., 9)
for _i, _w in zip(range(1, 10, 2), _WG):
    _W_GAUSS[_i] = _w
    _W_GAUSS[20 - _i] = _w


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_subdiv: int = 2000
    kink_split: bool = True
    n_scan: int = 720

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdiv < 1:
            raise ValueError("max_subdiv must be >= 1")
        if self.n_scan < 8:
            raise ValueError("n_scan must be >= 8")


DEFAULT_SPEC = QuadratureSpec()


@dataclass
class ZeroReport:
    """Zeros in [0, 2pi) as ``(angle, degenerate)`` pairs, with their residual norms."""

    zeros: list = field(default_factory=list)
    residuals: list = field(default_factory=list)

    @property
    def angles(self) -> np.ndarray:
        return np.array([z[0] for z in self.zeros], dtype=float)

    def __len__(self) -> int:
        return len(self.zeros)


def _as_2d(values: np.ndarray, k: int) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    return values.reshape(k, -1)


def _gk_intervals(f, a: np.ndarray, b: np.ndarray):
    """Kronrod estimate and |K - G| error for each interval [a_i, b_i]."""
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    nodes = (mid[:, None] + half[:, None] * _NODES[None, :]).ravel()
    vals = _as_2d(f(nodes), nodes.size).reshape(a.size, 21, -1)
    kron = np.einsum("j,ijc->ic", _W_KRONROD, vals) * half[:, None]
    gauss = np.einsum("j,ijc->ic", _W_GAUSS, vals) * half[:, None]
    err = np.max(np.abs(kron - gauss), axis=1)
    return kron, err


def _adaptive_gk(f, edges: np.ndarray, spec: QuadratureSpec):
    a = edges[:-1].copy()
    b = edges[1:].copy()
    res, err = _gk_intervals(f, a, b)
    n_sub = a.size
    while True:
        total = res.sum(axis=0) / TWO_PI
        total_err = err.sum() / TWO_PI
        tol = max(spec.abs_tol, spec.rel_tol * float(np.max(np.abs(total))))
        if total_err <= tol:
            return total, total_err
        # refine every interval above its length-proportional share of the budget
        bad = err > 0.5 * tol * (b - a)
        if not np.any(bad):
            bad = err >= np.max(err)
        if n_sub + int(bad.sum()) > spec.max_subdiv:
            raise QuadratureConvergenceError(
                f"adaptive quadrature exhausted {spec.max_subdiv} subdivisions "
                f"(error estimate {total_err:.3g} > {tol:.3g})",
                estimate=total, error=total_err,
            )
        ma, mb = a[bad], b[bad]
        mid = 0.5 * (ma + mb)
        na = np.concatenate([ma, mid])
        nb = np.concatenate([mid, mb])
        nres, nerr = _gk_intervals(f, na, nb)
        keep = ~bad
        a = np.concatenate([a[keep], na])
        b = np.concatenate([b[keep], nb])
        res = np.concatenate([res[keep], nres])
        err = np.concatenate([err[keep], nerr])
        n_sub += int(bad.sum())


def _periodic_trapezoid(f, spec: QuadratureSpec, n_max: int = 2048):
    n = 32
    theta = np.arange(n) * (TWO_PI / n)
    prev = _as_2d(f(theta), n).mean(axis=0)
    while n < n_max:
        theta = (np.arange(n) + 0.5) * (TWO_PI / n)
        mid = _as_2d(f(theta), n).mean(axis=0)
        cur = 0.5 * (prev + mid)
        n *= 2
        diff = float(np.max(np.abs(cur - prev)))
        tol = max(spec.abs_tol, spec.rel_tol * float(np.max(np.abs(cur))))
        if diff <= tol:
            return cur, diff
        prev = cur
    return None


def _breakpoints(kinks: Optional[Sequence[float]]) -> np.ndarray:
    if not kinks:
        return np.empty(0)
    pts = np.unique(np.array([normalize_angle(k) for k in kinks]))
    if pts.size > 1:
        keep = np.concatenate([[True], np.diff(pts) > 1e-13])
        pts = pts[keep]
        if TWO_PI - pts[-1] + pts[0] <= 1e-13:
            pts = pts[:-1]
    return pts


def integrate_periodic(
    f: Callable[[np.ndarray], np.ndarray],
    spec: QuadratureSpec = DEFAULT_SPEC,
    kinks: Optional[Sequence[float]] = None,
):
    """Mean value of ``f`` over the circle, componentwise, and an error estimate.

    With ``kinks`` (and ``spec.kink_split``) the circle is cut at those angles
    before adaptive Gauss-Kronrod refinement; otherwise a periodic trapezoid
    rule is tried first since it converges geometrically on smooth integrands.
    Returns a float for scalar integrands and an array otherwise.
    """
    probe = np.asarray(f(np.array([0.0])), dtype=float)
    scalar = probe.ndim <= 1 and probe.size == 1 and (probe.ndim == 0 or probe.shape == (1,))
    pts = _breakpoints(kinks) if spec.kink_split else np.empty(0)
    if pts.size == 0:
        out = _periodic_trapezoid(f, spec)
        if out is None:
            edges = np.linspace(0.0, TWO_PI, 9)
            out = _adaptive_gk(f, edges, spec)
    else:
        edges = np.concatenate([pts, [pts[0] + TWO_PI]])
        # a lone cut still needs interior resolution
        if edges.size == 2:
            edges = np.array([edges[0], edges[0] + np.pi, edges[1]])
        out = _adaptive_gk(f, edges, spec)
    value, err = out
    if scalar:
        return float(value[0]), float(err)
    return value, float(err)


# --------------------------------------------------------------------------
# zeros


def _norms(values: np.ndarray) -> np.ndarray:
    return np.linalg.norm(values, axis=1)


def _scan_and_polish(phi, n_scan: int, near_ratio: float):
    """Candidate minima of |phi|: returns (scale, [(theta, residual, dnorm)])."""
    theta = np.arange(n_scan) * (TWO_PI / n_scan)
    vals = _as_2d(phi(theta), n_scan)
    k = vals.shape[1]
    nrm = _norms(vals)
    scale = float(np.max(nrm))
    if scale == 0.0:
        return 0.0, []
    step = TWO_PI / n_scan

    def phi1(t):
        return _as_2d(phi(np.array([t])), 1)[0]

    found = []
    if k == 1:
        s = vals[:, 0]
        s_next = np.roll(s, -1)
        for i in np.nonzero(s == 0.0)[0]:
            found.append(theta[i])
        for i in np.nonzero(s * s_next < 0.0)[0]:
            lo = theta[i]
            hi = lo + step
            g = lambda t: phi1(t)[0]
            found.append(brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))
    prev = np.roll(nrm, 1)
    nxt = np.roll(nrm, -1)
    minima = np.nonzero((nrm <= prev) & (nrm <= nxt) & (nrm <= max(near_ratio, 0.05) * scale))[0]
    for i in minima:
        found.append(_polish_minimum(phi, theta[i], step))
    out = []
    if found:
        ts = np.array([normalize_angle(t) for t in found])
        h = 1e-6
        v = _as_2d(phi(np.concatenate([ts, ts + h, ts - h])), 3 * ts.size)
        k0 = ts.size
        res = _norms(v[:k0])
        dn = _norms((v[k0:2 * k0] - v[2 * k0:]) / (2 * h))
        out = [(float(t), float(r), float(d)) for t, r, d in zip(ts, res, dn)]
    out.sort()
    return scale, out


def _polish_minimum(phi, t: float, step: float, h: float = 1e-5, max_iter: int = 40) -> float:
    """Newton on d/dt |phi|^2 / 2 from a three-point stencil, kept within two scan steps."""
    lo, hi = t - 2 * step, t + 2 * step
    offsets = np.array([-h, 0.0, h])
    for _ in range(max_iter):
        vm, v0, vp = _as_2d(phi(t + offsets), 3)
        d1 = (vp - vm) / (2 * h)
        d2 = (vp - 2 * v0 + vm) / (h * h)
        grad = float(v0 @ d1)
        curv = float(d1 @ d1 + v0 @ d2)
        if curv <= 0.0:
            curv = float(d1 @ d1)
        if curv == 0.0:
            break
        t_new = min(max(t - grad / curv, lo), hi)
        if abs(t_new - t) < 1e-15:
            return t_new
        t = t_new
    return t


def _dedupe(items, tol=1e-8):
    kept = []
    for it in items:
        if kept:
            d = abs(it[0] - kept[-1][0])
            if d < tol:
                if it[1] < kept[-1][1]:
                    kept[-1] = it
                continue
        kept.append(it)
    if len(kept) > 1 and TWO_PI - kept[-1][0] + kept[0][0] < tol:
        if kept[-1][1] < kept[0][1]:
            kept[0] = kept[-1]
        kept.pop()
    return kept


def locate_zeros(
    phi: Callable[[np.ndarray], np.ndarray],
    spec: QuadratureSpec = DEFAULT_SPEC,
    zero_tol: float = 1e-12,
) -> ZeroReport:
    """All angles in [0, 2pi) where the periodic map ``phi`` vanishes.

    A uniform scan of ``spec.n_scan`` samples proposes sign changes (scalar
    maps) and small local minima of |phi|; each is polished by bisection or
    Gauss-Newton and kept when |phi| <= zero_tol * max(1, max|phi|).
    """
    scale, cands = _scan_and_polish(phi, spec.n_scan, near_ratio=0.05)
    if not cands:
        return ZeroReport()
    thresh = zero_tol * max(1.0, scale)
    hits = _dedupe([c for c in cands if c[1] <= thresh])
    report = ZeroReport()
    for t, res, dn in hits:
        report.zeros.append((t, bool(dn < 1e-6 * max(1.0, scale))))
        report.residuals.append(res)
    return report


def split_points(
    phi: Callable[[np.ndarray], np.ndarray],
    spec: QuadratureSpec = DEFAULT_SPEC,
    near_ratio: float = 1e-2,
) -> tuple[list, list]:
    """Zeros of ``phi`` plus near-zeros (small local minima of |phi|).

    Returns ``(zeros, near)``; both are worth splitting an integral of |phi| at.
    """
    scale, cands = _scan_and_polish(phi, spec.n_scan, near_ratio=near_ratio)
    thresh = 1e-12 * max(1.0, scale)
    cands = _dedupe(cands)
    zeros = [c[0] for c in cands if c[1] <= thresh]
    near = [c[0] for c in cands if thresh < c[1] <= near_ratio * scale]
    return zeros, near
