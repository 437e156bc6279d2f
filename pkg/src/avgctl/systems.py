"""Control system containers, angle arithmetic and the built-in registry.

Every field callback is evaluated with a *vector* of angles: ``field(theta, x)``
receives ``theta`` as an ndarray of shape ``(K,)`` and must return an array of
shape ``(K, n, m)``.  Plain numpy expressions broadcast this way for free; a
callback that only handles scalars is detected and looped over.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, UnsupportedOrderError

TWO_PI = 2.0 * np.pi

# Step of the theta finite differences and the relative state step.
H_THETA = 1e-3
H_X = 1e-3
MAX_FD_ORDER = 4


def normalize_angle(s: float) -> float:
    """Return the representative of ``s`` modulo 2*pi lying in [0, 2*pi)."""
    s = float(s)
    if not math.isfinite(s):
        raise DomainError(f"angle must be finite, got {s!r}")
    r = math.fmod(s, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    # fmod of tiny negatives lands exactly on 2*pi after the shift
    if r >= TWO_PI:
        r = 0.0
    return r + 0.0


@dataclass(frozen=True)
class AngleS1:
    raw: float

    @property
    def canonical(self) -> float:
        return normalize_angle(self.raw)

    def __float__(self) -> float:
        return self.canonical


def _fd_weights(order: int, half_width: int) -> np.ndarray:
    """Central finite-difference weights on offsets -half_width..half_width."""
    offsets = np.arange(-half_width, half_width + 1, dtype=float)
    k = offsets.size
    vander = np.vander(offsets, k, increasing=True).T
    rhs = np.zeros(k)
    rhs[order] = math.factorial(order)
    return np.linalg.solve(vander, rhs)


def _fd_half_width(order: int) -> int:
    # 4th-order accurate central stencils
    return (order + 1) // 2 + 1


_FD_CACHE = {j: _fd_weights(j, _fd_half_width(j)) for j in range(1, MAX_FD_ORDER + 1)}


def central_difference(f: Callable[[float], np.ndarray], t: float, h: float, order: int = 1) -> np.ndarray:
    """Fourth-order accurate central difference of ``f`` at ``t``."""
    if order < 1 or order > MAX_FD_ORDER:
        raise UnsupportedOrderError(f"finite differences support orders 1..{MAX_FD_ORDER}, got {order}")
    w = _FD_CACHE[order]
    hw = _fd_half_width(order)
    acc = None
    for k, wk in zip(range(-hw, hw + 1), w):
        if wk == 0.0:
            continue
        term = wk * np.asarray(f(t + k * h), dtype=float)
        acc = term if acc is None else acc + term
    return acc / h**order


def _call_vectorized(func, theta: np.ndarray, x: np.ndarray, tail: tuple) -> np.ndarray:
    out = np.asarray(func(theta, x), dtype=float)
    want = theta.shape + tail
    if out.shape == want:
        return out
    if out.shape == tail and theta.size == 1:
        return out.reshape(want)
    try:
        return np.broadcast_to(out, want).copy()
    except ValueError:
        pass
    # scalar-only callback
    vals = [np.asarray(func(float(t), x), dtype=float).reshape(tail) for t in theta.ravel()]
    return np.stack(vals).reshape(want)


def _theta_array(theta) -> tuple[np.ndarray, bool]:
    arr = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("angles must be finite")
    scalar = arr.ndim == 0
    return np.atleast_1d(arr), scalar


@dataclass(frozen=True)
class OscillatingSystem:
    """The family x' = G(theta, x) u (+ G0(theta, x)) with theta = t/eps.

    ``theta_derivs(theta, x, j)`` may supply analytic j-th angle derivatives;
    ``d_field_dx(theta, x)`` may supply the ``(K, n, m, n)`` state Jacobian.
    """

    n: int
    m: int
    field: Callable
    d_field_dx: Optional[Callable] = None
    theta_derivs: Optional[Callable] = None
    drift: Optional[Callable] = None
    domain: Optional[Callable[[np.ndarray], bool]] = None
    label: str = ""
    sampler: Optional[Callable] = dc_field(default=None, compare=False)

    def check_state(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.n:
            raise DomainError(f"{self.label or 'system'}: state must have {self.n} entries, got {x.size}")
        if not np.all(np.isfinite(x)):
            raise DomainError("state must be finite")
        if self.domain is not None and not self.domain(x):
            raise DomainError(f"{self.label or 'system'}: state {x} outside the domain")
        return x

    def G(self, theta, x) -> np.ndarray:
        """G(theta, x) with shape ``theta.shape + (n, m)`` (no domain check)."""
        th, scalar = _theta_array(theta)
        out = _call_vectorized(self.field, th, np.asarray(x, dtype=float), (self.n, self.m))
        return out[0] if scalar else out

    def G0(self, theta, x) -> np.ndarray:
        th, scalar = _theta_array(theta)
        out = _call_vectorized(self.drift, th, np.asarray(x, dtype=float), (self.n,))
        return out[0] if scalar else out


@dataclass(frozen=True)
class KeplerSystem:
    """theta' = omega(theta, x) + g(theta, x) v,  x' = G(theta, x) v."""

    n: int
    m: int
    pulse: Callable
    pulse_ctl: Callable
    field: Callable
    pulse_floor: float
    domain: Optional[Callable[[np.ndarray], bool]] = None
    label: str = ""
    d_field_dx: Optional[Callable] = None
    sampler: Optional[Callable] = dc_field(default=None, compare=False)
    d_pulse_dx: Optional[Callable] = None

    def __post_init__(self):
        if not self.pulse_floor > 0:
            raise DomainError("pulse_floor must be strictly positive")

    check_state = OscillatingSystem.check_state

    def G(self, theta, x) -> np.ndarray:
        th, scalar = _theta_array(theta)
        out = _call_vectorized(self.field, th, np.asarray(x, dtype=float), (self.n, self.m))
        return out[0] if scalar else out

    def omega(self, theta, x) -> np.ndarray:
        th, scalar = _theta_array(theta)
        out = _call_vectorized(self.pulse, th, np.asarray(x, dtype=float), ())
        return out[0] if scalar else out

    def g(self, theta, x) -> np.ndarray:
        th, scalar = _theta_array(theta)
        out = _call_vectorized(self.pulse_ctl, th, np.asarray(x, dtype=float), (self.m,))
        return out[0] if scalar else out

    def omega_dx(self, theta, x) -> np.ndarray:
        """d omega / dx with shape ``theta.shape + (n,)``."""
        th, scalar = _theta_array(theta)
        x = np.asarray(x, dtype=float)
        if self.d_pulse_dx is not None:
            out = _call_vectorized(self.d_pulse_dx, th, x, (self.n,))
        else:
            out = state_jacobian(self, th, x, func=lambda t, y: self.omega(t, y))
        return out[0] if scalar else out

    def checked_omega(self, theta, x) -> np.ndarray:
        w = self.omega(theta, x)
        if np.any(w < self.pulse_floor):
            raise DomainError(
                f"{self.label or 'kepler system'}: pulsation {np.min(w):.3g} below floor {self.pulse_floor:.3g}"
            )
        return w


def _theta_derivative(sys, th: np.ndarray, x: np.ndarray, j: int) -> np.ndarray:
    if j == 0:
        return sys.G(th, x)
    if getattr(sys, "theta_derivs", None) is not None:
        return _call_vectorized(lambda t, y: sys.theta_derivs(t, y, j), th, x, (sys.n, sys.m))
    if j > MAX_FD_ORDER:
        raise UnsupportedOrderError(f"no analytic theta derivative of order {j} and FD stops at {MAX_FD_ORDER}")
    return central_difference(lambda t: sys.G(t, x), th, H_THETA, order=j)


def state_jacobian(sys, th: np.ndarray, x: np.ndarray, func=None, tail=None) -> np.ndarray:
    """FD Jacobian d(func)/dx stacked on the last axis (4th order, h scaled by 1+|x|)."""
    if func is None:
        func = sys.G
    h = H_X * (1.0 + np.linalg.norm(x))
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = 1.0
        cols.append(central_difference(lambda s: func(th, x + s * e), 0.0, h, order=1))
    return np.stack(cols, axis=-1)


def eval_field(sys, theta, x, deriv: str = "none", j: int = 0) -> np.ndarray:
    """Evaluate G or one of its derivatives.

    ``deriv`` is ``"none"``, ``"d_theta"`` (j-th angle derivative) or ``"d_x"``
    (shape ``(..., n, m, n)``).
    """
    x = sys.check_state(x)
    th, scalar = _theta_array(theta)
    if deriv == "none":
        out = sys.G(th, x)
    elif deriv in ("d_theta", "d_theta_j"):
        if j < 0:
            raise UnsupportedOrderError("derivative order must be non-negative")
        out = _theta_derivative(sys, th, x, j)
    elif deriv == "d_x":
        if getattr(sys, "d_field_dx", None) is not None:
            out = _call_vectorized(sys.d_field_dx, th, x, (sys.n, sys.m, sys.n))
        else:
            out = state_jacobian(sys, th, x)
    else:
        raise ValueError(f"unknown derivative request {deriv!r}")
    return out[0] if scalar else out


def kepler_to_oscillating(ksys: KeplerSystem) -> OscillatingSystem:
    """Reduced fast-oscillating system with matrix G/omega (the eps*g*u term dropped)."""

    def field(theta, x):
        w = ksys.checked_omega(theta, x)
        return ksys.G(theta, x) / w[..., None, None]

    return OscillatingSystem(
        n=ksys.n,
        m=ksys.m,
        field=field,
        domain=ksys.domain,
        label=f"{ksys.label}/reduced" if ksys.label else "reduced",
        sampler=ksys.sampler,
    )


def check_periodicity(sys, xs, n_theta: int = 16, tol: float = 1e-12) -> float:
    """Largest |G(theta,x) - G(theta+2pi,x)| over the sample states."""
    th = np.linspace(0.0, TWO_PI, n_theta, endpoint=False)
    worst = 0.0
    for x in xs:
        a = sys.G(th, x)
        b = sys.G(th + TWO_PI, x)
        worst = max(worst, float(np.max(np.abs(a - b))))
    if worst > tol:
        raise DomainError(f"{sys.label}: field not 2*pi-periodic (deviation {worst:.3g})")
    return worst


# --------------------------------------------------------------------------
# built-in examples


def rotating_field() -> OscillatingSystem:
    """n=2, m=1, G = (cos theta, sin theta)^T."""

    def field(theta, x):
        return np.stack([np.cos(theta), np.sin(theta)], axis=-1)[..., None]

    def theta_derivs(theta, x, j):
        return field(theta + j * np.pi / 2, x)

    def d_dx(theta, x):
        return np.zeros(np.shape(theta) + (2, 1, 2))

    return OscillatingSystem(
        n=2, m=1, field=field, d_field_dx=d_dx, theta_derivs=theta_derivs,
        label="rotating_field", sampler=lambda rng: rng.normal(size=2),
    )


def rotating_field_2() -> OscillatingSystem:
    """n=2, m=2, G = [[cos, -sin], [sin, cos]]."""

    def field(theta, x):
        c, s = np.cos(theta), np.sin(theta)
        return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)

    def theta_derivs(theta, x, j):
        return field(theta + j * np.pi / 2, x)

    def d_dx(theta, x):
        return np.zeros(np.shape(theta) + (2, 2, 2))

    return OscillatingSystem(
        n=2, m=2, field=field, d_field_dx=d_dx, theta_derivs=theta_derivs,
        label="rotating_field_2", sampler=lambda rng: rng.normal(size=2),
    )


class SystemRegistry:
    """Label -> constructor map; systems are built and self-tested on lookup."""

    def __init__(self):
        self._entries: dict[str, tuple[Callable, str]] = {}

    def register(self, label: str, constructor: Callable, description: str = "") -> None:
        if label in self._entries:
            raise ValueError(f"duplicate system label {label!r}")
        self._entries[label] = (constructor, description)

    def labels(self) -> list[str]:
        return sorted(self._entries)

    def describe(self, label: str) -> str:
        return self._entries[label][1]

    def get(self, label: str, **kwargs):
        try:
            constructor, _ = self._entries[label]
        except KeyError:
            raise KeyError(f"unknown system {label!r}; known: {', '.join(self.labels())}") from None
        sys = constructor(**kwargs)
        rng = np.random.default_rng(0)
        xs = [sys.sampler(rng) for _ in range(4)] if sys.sampler is not None else []
        check_periodicity(sys, xs)
        return sys

    def __contains__(self, label: str) -> bool:
        return label in self._entries


def _two_body(**kwargs):
    from .two_body import two_body_system

    return two_body_system(**kwargs)


REGISTRY = SystemRegistry()
REGISTRY.register("rotating_field", rotating_field, "n=2, m=1, G=(cos t, sin t); H = (2/pi)|p|")
REGISTRY.register("rotating_field_2", rotating_field_2, "n=2, m=2, G = rotation matrix")
REGISTRY.register("two_body_planar", _two_body, "planar controlled 2-body (a, ex, ey), Kepler type")
