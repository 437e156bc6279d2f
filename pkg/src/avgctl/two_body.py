"""Planar controlled two-body problem in (a, e_x, e_y) with longitude L as the
fast angle, thrust (u_t, u_n) in the tangential-normal frame.

``a_y`` uses ``(e_y + sin L)`` and ``b_x`` / ``b_y`` are divided by the
radius factor ``p/r = 1 + e_x cos L + e_y sin L``.  Both are checked against
finite differences of Cartesian orbital elements in ``tests/test_two_body.py``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError
from .quadrature import DEFAULT_SPEC, QuadratureSpec, integrate_periodic, split_points
from .systems import TWO_PI, KeplerSystem, normalize_angle

E_CAP_DEFAULT = 0.9
E_CAP_MAX = 0.999
A_MAX_DEFAULT = 100.0


@dataclass(frozen=True)
class OrbitalState:
    a: float
    ex: float
    ey: float
    L: float = 0.0

    def __post_init__(self):
        if not self.a > 0:
            raise DomainError(f"semi-major axis must be positive, got {self.a}")

    @property
    def x(self) -> np.ndarray:
        return np.array([self.a, self.ex, self.ey])

    def to_json(self) -> dict:
        return {"a": self.a, "ex": self.ex, "ey": self.ey, "L": self.L}

    @classmethod
    def from_json(cls, data: dict) -> "OrbitalState":
        return cls(a=float(data["a"]), ex=float(data["ex"]), ey=float(data["ey"]), L=float(data.get("L", 0.0)))


@dataclass(frozen=True)
class GaussFields:
    w: np.ndarray
    a_a: np.ndarray
    a_x: np.ndarray
    a_y: np.ndarray
    b_x: np.ndarray
    b_y: np.ndarray


@dataclass(frozen=True)
class ReducedCostate:
    """(A, X, Y) = (a p_a, p_ex, p_ey)."""

    A: float
    X: float
    Y: float

    @classmethod
    def from_costate(cls, a: float, p) -> "ReducedCostate":
        return cls(a * p[0], p[1], p[2])


def _check_ecc(ex, ey, e_cap):
    e2 = ex * ex + ey * ey
    if not e2 < e_cap * e_cap:
        raise DomainError(f"eccentricity {np.sqrt(e2):.6g} not below cap {e_cap}")
    return e2


def _fields(ex, ey, L):
    e2 = ex * ex + ey * ey
    c, s = np.cos(L), np.sin(L)
    q = 1.0 + ex * c + ey * s
    d = 1.0 + e2 + 2.0 * ex * c + 2.0 * ey * s
    root = np.sqrt(1.0 - e2)
    f = root / np.sqrt(d)
    w = q * q / (1.0 - e2) ** 1.5
    a_a = np.sqrt(d) / root
    a_x = f * (ex + c)
    a_y = f * (ey + s)
    b_x = f * (-2.0 * ey + (ex * ex - ey * ey - 1.0) * s - 2.0 * ex * ey * c) / q
    b_y = f * (2.0 * ex + (ex * ex - ey * ey + 1.0) * c + 2.0 * ex * ey * s) / q
    return w, a_a, a_x, a_y, b_x, b_y


def _complex_step(f, z0: float, h: float = 1e-30):
    """Exact-to-roundoff derivative of a real-analytic f at z0."""
    return np.imag(f(z0 + 1j * h)) / h


def _g_of_e(a, ex, ey, L):
    """G / sqrt(mu) as a function of the eccentricity vector (complex-safe)."""
    w, a_a, a_x, a_y, b_x, b_y = _fields(ex, ey, L)
    z = np.zeros_like(a_x)
    col_t = np.stack([2 * a * a_a, 2 * a_x, 2 * a_y], -1)
    col_n = np.stack([z, b_x, b_y], -1)
    return np.sqrt(a) * np.stack([col_t, col_n], -1)


def gauss_fields(ex: float, ey: float, L, e_cap: float = E_CAP_DEFAULT) -> GaussFields:
    """Dimensionless tangential-normal factors at (e_x, e_y, L); L may be an array."""
    _check_ecc(ex, ey, e_cap)
    return GaussFields(*_fields(ex, ey, np.asarray(L, dtype=float)))


def reduced_matrix(ex: float, ey: float, L) -> np.ndarray:
    """The 3x2 matrix of the reduced Hamiltonian (rows: A, X, Y), shape L.shape + (3, 2)."""
    w, a_a, a_x, a_y, b_x, b_y = _fields(ex, ey, np.asarray(L, dtype=float))
    z = np.zeros_like(w)
    return np.stack(
        [np.stack([2 * a_a / w, z], -1), np.stack([2 * a_x / w, b_x / w], -1), np.stack([2 * a_y / w, b_y / w], -1)],
        -2,
    )


def two_body_system(mu_norm: float = 1.0, e_cap: float = E_CAP_DEFAULT, a_max: float = A_MAX_DEFAULT) -> KeplerSystem:
    """Kepler-type system: state (a, e_x, e_y), angle L, m = 2, g = 0."""
    if not 0.0 < e_cap <= E_CAP_MAX:
        raise DomainError(f"e_cap must lie in (0, {E_CAP_MAX}]")
    sqmu = np.sqrt(mu_norm)

    def pulse(L, x):
        a, ex, ey = x
        return sqmu * _fields(ex, ey, L)[0] / a**1.5

    def pulse_ctl(L, x):
        return np.zeros(np.shape(L) + (2,))

    def field(L, x):
        a, ex, ey = x
        w, a_a, a_x, a_y, b_x, b_y = _fields(ex, ey, L)
        z = np.zeros_like(w)
        col_t = np.stack([2 * a * a_a, 2 * a_x, 2 * a_y], -1)
        col_n = np.stack([z, b_x, b_y], -1)
        return np.sqrt(a) / sqmu * np.stack([col_t, col_n], -1)

    def d_field(L, x):
        a, ex, ey = x
        g = field(L, x)
        da = g / (2.0 * a)
        da[..., 0, 0] *= 3.0
        de = [_complex_step(lambda z: _g_of_e(a, z, ey, L), ex) / sqmu,
              _complex_step(lambda z: _g_of_e(a, ex, z, L), ey) / sqmu]
        return np.stack([da, *de], -1)

    def d_pulse(L, x):
        a, ex, ey = x
        w = _fields(ex, ey, L)[0]
        dw = [_complex_step(lambda z: _fields(z, ey, L)[0], ex),
              _complex_step(lambda z: _fields(ex, z, L)[0], ey)]
        return sqmu * np.stack([-1.5 * w / a, *dw], -1) / a**1.5

    def domain(x):
        a, ex, ey = x
        return 0.0 < a <= a_max and ex * ex + ey * ey < e_cap * e_cap

    def sampler(rng):
        r = 0.8 * e_cap * np.sqrt(rng.random())
        ang = rng.uniform(0.0, TWO_PI)
        return np.array([rng.uniform(0.5, 2.0), r * np.cos(ang), r * np.sin(ang)])

    w_min = (1.0 - e_cap) ** 2 / (1.0 - e_cap * e_cap) ** 1.5
    return KeplerSystem(
        n=3, m=2, pulse=pulse, pulse_ctl=pulse_ctl, field=field,
        pulse_floor=sqmu * w_min / a_max**1.5, domain=domain,
        label="two_body_planar", sampler=sampler, d_field_dx=d_field, d_pulse_dx=d_pulse,
    )


def reduced_hamiltonian(
    ex: float, ey: float, A: float, X: float, Y: float,
    spec: QuadratureSpec = DEFAULT_SPEC, e_cap: float = E_CAP_DEFAULT,
) -> float:
    """Mean over L of |(A X Y) G(e_x, e_y, L)|; the full H is sqrt(a) times this at A = a p_a."""
    _check_ecc(ex, ey, e_cap)
    row = np.array([A, X, Y], dtype=float)
    if not np.any(row):
        return 0.0
    phi = lambda L: np.einsum("i,kim->km", row, reduced_matrix(ex, ey, L))
    kinks = []
    if spec.kink_split:
        sw = switch_angle(ex, ey, A, X, Y, e_cap=e_cap)
        zeros, near = split_points(phi, spec)
        kinks = ([sw] if sw is not None else []) + zeros + near
    val, _ = integrate_periodic(lambda L: np.linalg.norm(phi(L), axis=1), spec, kinks=kinks)
    return val


def full_hamiltonian(x, p, spec: QuadratureSpec = DEFAULT_SPEC, e_cap: float = E_CAP_DEFAULT) -> float:
    a, ex, ey = x
    return np.sqrt(a) * reduced_hamiltonian(ex, ey, a * p[0], p[1], p[2], spec=spec, e_cap=e_cap)


def _switch_system(ex, ey, A, X, Y):
    """Coefficients (c1, s1, r1, c2, s2, r2) of c_i cos L + s_i sin L = r_i.

    The first row carries 2A because the first column of the reduced matrix
    is 2 a_a / w; both rows come from clearing denominators.
    """
    e2 = ex * ex + ey * ey
    k = 1.0 - e2
    A2 = 2.0 * A
    c1 = 2 * ex * A2 + 2 * k * X
    s1 = 2 * ey * A2 + 2 * k * Y
    r1 = -(1 + e2) * A2 - 2 * ex * k * X - 2 * ey * k * Y
    c2 = -2 * ex * ey * X + (ex * ex - ey * ey + 1) * Y
    s2 = (ex * ex - ey * ey - 1) * X + 2 * ex * ey * Y
    r2 = 2 * ey * X - 2 * ex * Y
    return c1, s1, r1, c2, s2, r2


def switch_angle(
    ex: float, ey: float, A: float, X: float, Y: float, e_cap: float = E_CAP_DEFAULT,
) -> Optional[float]:
    """The unique L where (A X Y) G(e_x, e_y, L) vanishes, or None."""
    _check_ecc(ex, ey, e_cap)
    if A == 0 and X == 0 and Y == 0:
        raise ValueError("switch angle undefined for (A, X, Y) = 0")
    c1, s1, r1, c2, s2, r2 = _switch_system(ex, ey, A, X, Y)
    delta = c1 * s2 - s1 * c2
    scale = (abs(c1) + abs(s1)) * (abs(c2) + abs(s2))
    if abs(delta) <= 1e-12 * max(scale, 1e-300):
        return None
    c = (r1 * s2 - s1 * r2) / delta
    s = (c1 * r2 - r1 * c2) / delta
    if abs(c * c + s * s - 1.0) > 1e-8:
        return None
    L = normalize_angle(np.arctan2(s, c))
    cl, sl = np.cos(L), np.sin(L)
    res = max(abs(c1 * cl + s1 * sl - r1), abs(c2 * cl + s2 * sl - r2))
    row_scale = max(abs(c1) + abs(s1) + abs(r1), abs(c2) + abs(s2) + abs(r2))
    if res > 1e-9 * max(row_scale, 1.0):
        return None
    return L


def det_M(ex: float, ey: float, lam: float) -> float:
    """Determinant of the 3x3 matrix whose nonsingularity makes the switch angle unique."""
    e2 = ex * ex + ey * ey
    M = np.array([
        [2 * ex, 2 * (1 - e2 + lam * ex * ey), -lam * (ex * ex - ey * ey + 1)],
        [2 * ey, -lam * (ex * ex - ey * ey - 1), 2 * (1 - e2 - lam * ex * ey)],
        [1 + e2, 2 * (ex * (1 - e2) + lam * ey), 2 * (ey * (1 - e2) - lam * ex)],
    ])
    return float(np.linalg.det(M))


def det_M_closed_form(ex: float, ey: float, lam: float) -> float:
    e = np.hypot(ex, ey)
    return float((1 - e) ** 3 * (1 + e) ** 3 * (lam * lam + 4))


def null_costate(ex: float, ey: float, L: float) -> np.ndarray:
    """Unit (A, X, Y) whose reduced row vanishes at angle L (left null vector)."""
    g = reduced_matrix(ex, ey, np.array([L]))[0]
    u, _, _ = np.linalg.svd(g)
    return u[:, 2]
