from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from avgctl.averaging import hamiltonian
from avgctl.errors import DomainError
from avgctl.two_body import (
    OrbitalState,
    ReducedCostate,
    det_M,
    det_M_closed_form,
    full_hamiltonian,
    gauss_fields,
    null_costate,
    reduced_hamiltonian,
    reduced_matrix,
    switch_angle,
    two_body_system,
)


# Cartesian oracle (mu = 1): elements from position/velocity, thrust as a velocity impulse
def _cartesian(a, ex, ey, L):
    p = a * (1 - ex * ex - ey * ey)
    r = p / (1 + ex * np.cos(L) + ey * np.sin(L))
    pos = r * np.array([np.cos(L), np.sin(L)])
    vel = np.sqrt(1 / p) * np.array([-(np.sin(L) + ey), np.cos(L) + ex])
    return pos, vel


def _elements(pos, vel):
    r = np.linalg.norm(pos)
    h = pos[0] * vel[1] - pos[1] * vel[0]
    a = 1 / (2 / r - vel @ vel)
    e = np.array([vel[1] * h, -vel[0] * h]) - pos / r
    return np.array([a, e[0], e[1]])


def _impulse_fd(x, L, h=1e-6):
    pos, vel = _cartesian(*x, L)
    t = vel / np.linalg.norm(vel)
    n = np.array([-t[1], t[0]])
    cols = []
    for d in (t, n):
        cols.append((_elements(pos, vel + h * d) - _elements(pos, vel - h * d)) / (2 * h))
    return np.stack(cols, -1)


def test_cartesian_oracle_round_trip():
    x = np.array([1.7, 0.3, -0.4])
    assert np.allclose(_elements(*_cartesian(*x, 2.1)), x, atol=1e-12)


@pytest.mark.parametrize("x", [(1.0, 0.0, 0.0), (1.7, 0.3, -0.4), (0.6, -0.55, 0.5), (2.2, 0.7, 0.1)])
def test_fields_match_cartesian_impulses(tb, x):
    L = np.linspace(0, 2 * np.pi, 7)
    G = tb.field(L, np.array(x))
    for k, Lk in enumerate(L):
        assert np.allclose(G[k], _impulse_fd(np.array(x), Lk), rtol=1e-7, atol=1e-8)


def test_pulsation_is_longitude_rate(tb):
    x = np.array([1.3, 0.2, 0.4])
    L = 0.8
    pos, vel = _cartesian(*x, L)
    h = pos[0] * vel[1] - pos[1] * vel[0]
    assert tb.pulse(np.array(L), x) == pytest.approx(h / (pos @ pos), rel=1e-12)


def test_fields_at_zero_eccentricity():
    L = np.linspace(0, 6, 5)
    f = gauss_fields(0.0, 0.0, L)
    assert np.allclose(f.w, 1) and np.allclose(f.a_a, 1)
    assert np.allclose(f.a_x, np.cos(L)) and np.allclose(f.a_y, np.sin(L))
    assert np.allclose(f.b_x, -np.sin(L)) and np.allclose(f.b_y, np.cos(L))


def test_w_value_example():
    # w = (1 + e_x cos L + e_y sin L)^2 / (1 - e^2)^1.5 at L = 0
    assert gauss_fields(0.3, -0.2, 0.0).w == pytest.approx(1.69 / 0.87**1.5, rel=1e-14)


def test_eccentricity_cap():
    with pytest.raises(DomainError):
        gauss_fields(0.8, 0.5, 0.0)
    with pytest.raises(DomainError):
        two_body_system(e_cap=1.0)
    with pytest.raises(DomainError):
        OrbitalState(a=0.0, ex=0.1, ey=0.0)
    assert not two_body_system().domain(np.array([1.0, 0.95, 0.0]))


@given(st.floats(0, 0.8), st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi), st.floats(-3, 3))
@settings(max_examples=30, deadline=None)
def test_rotation_equivariance(e, phi, alpha, L):
    # rotating the eccentricity vector by alpha shifts the longitude by alpha
    ex, ey = e * np.cos(phi), e * np.sin(phi)
    rx, ry = e * np.cos(phi + alpha), e * np.sin(phi + alpha)
    f0, f1 = gauss_fields(ex, ey, L), gauss_fields(rx, ry, L + alpha)
    assert f1.w == pytest.approx(f0.w, rel=1e-10)
    assert f1.a_a == pytest.approx(f0.a_a, rel=1e-10)
    c, s = np.cos(alpha), np.sin(alpha)
    assert np.allclose([f1.a_x, f1.a_y], [c * f0.a_x - s * f0.a_y, s * f0.a_x + c * f0.a_y], atol=1e-10)
    assert np.allclose([f1.b_x, f1.b_y], [c * f0.b_x - s * f0.b_y, s * f0.b_x + c * f0.b_y], atol=1e-10)


def test_reduced_hamiltonian_rotation_invariant():
    e, phi, alpha = 0.4, 0.3, 1.1
    A, X, Y = 0.5, 0.7, -0.2
    c, s = np.cos(alpha), np.sin(alpha)
    h0 = reduced_hamiltonian(e * np.cos(phi), e * np.sin(phi), A, X, Y)
    h1 = reduced_hamiltonian(e * np.cos(phi + alpha), e * np.sin(phi + alpha), A, c * X - s * Y, s * X + c * Y)
    assert h1 == pytest.approx(h0, rel=1e-10)


def test_reduced_hamiltonian_examples():
    assert reduced_hamiltonian(0.2, 0.1, 0, 0, 0) == 0.0
    # circular orbit, pure A: mean of |2A| over L
    assert reduced_hamiltonian(0.0, 0.0, 1.0, 0.0, 0.0) == pytest.approx(2.0, rel=1e-12)
    # circular orbit, pure X: mean of |(2 cos L, -sin L)|
    L = np.arange(200_000) * 2 * np.pi / 200_000
    oracle = np.mean(np.hypot(2 * np.cos(L), np.sin(L)))
    assert reduced_hamiltonian(0.0, 0.0, 0.0, 1.0, 0.0) == pytest.approx(oracle, rel=1e-9)


def test_full_hamiltonian_matches_generic(tb):
    x, p = np.array([1.4, 0.25, -0.1]), np.array([0.3, -0.8, 0.5])
    assert full_hamiltonian(x, p) == pytest.approx(hamiltonian(tb, x, p), rel=1e-9)
    rc = ReducedCostate.from_costate(x[0], p)
    assert rc.A == pytest.approx(0.42)


def test_switch_angle_recovers_constructed_zero(rng):
    for _ in range(50):
        r, ang = 0.8 * np.sqrt(rng.random()), rng.uniform(0, 2 * np.pi)
        ex, ey, L = r * np.cos(ang), r * np.sin(ang), rng.uniform(0, 2 * np.pi)
        A, X, Y = null_costate(ex, ey, L)
        row = np.array([A, X, Y]) @ reduced_matrix(ex, ey, np.array([L]))[0]
        assert np.linalg.norm(row) < 1e-12
        Ls = switch_angle(ex, ey, A, X, Y)
        assert Ls is not None
        assert abs(np.angle(np.exp(1j * (Ls - L)))) < 1e-8


def test_switch_angle_none_for_generic_costate():
    assert switch_angle(0.1, 0.2, 1.0, 0.3, -0.4) is None
    with pytest.raises(ValueError):
        switch_angle(0.1, 0.2, 0, 0, 0)


def test_switch_angle_circular_example():
    # e = 0: row = (2A + 2X cos L + 2Y sin L, -X sin L + Y cos L) vanishes at L = 0 for (A,X,Y) = (-1,1,0)
    assert switch_angle(0.0, 0.0, -1.0, 1.0, 0.0) == pytest.approx(0.0, abs=1e-12)


@given(st.floats(0, 0.95), st.floats(0, 2 * np.pi), st.floats(-20, 20))
@settings(max_examples=50, deadline=None)
def test_det_M_closed_form(e, phi, lam):
    ex, ey = e * np.cos(phi), e * np.sin(phi)
    ref = det_M_closed_form(ex, ey, lam)
    assert det_M(ex, ey, lam) == pytest.approx(ref, rel=1e-9, abs=1e-12)
    assert ref > 0


def test_orbital_state_json_round_trip():
    s = OrbitalState(1.5, 0.1, -0.2, 0.7)
    assert OrbitalState.from_json(s.to_json()) == s
    assert np.array_equal(s.x, [1.5, 0.1, -0.2])


def test_state_derivatives_match_fd(tb):
    x = np.array([1.2, 0.3, -0.25])
    L = np.linspace(0, 6, 9)
    h = 1e-6
    fd_g = np.stack([(tb.field(L, x + h * e) - tb.field(L, x - h * e)) / (2 * h) for e in np.eye(3)], -1)
    fd_w = np.stack([(tb.pulse(L, x + h * e) - tb.pulse(L, x - h * e)) / (2 * h) for e in np.eye(3)], -1)
    assert np.allclose(tb.d_field_dx(L, x), fd_g, atol=1e-8)
    assert np.allclose(tb.omega_dx(L, x), fd_w, atol=1e-8)


def test_det_M_examples():
    assert det_M(0.0, 0.0, 0.0) == pytest.approx(4.0, rel=1e-14)
    assert det_M(0.5, 0.0, 1.0) == pytest.approx(2.109375, rel=1e-12)


def test_switch_angle_unsolvable_example():
    assert switch_angle(0.0, 0.0, -2.0, 1.0, 0.0) is None


def test_reduced_hamiltonian_homogeneous():
    h = reduced_hamiltonian(0.3, -0.4, 0.2, -0.7, 0.5)
    assert reduced_hamiltonian(0.3, -0.4, 0.4, -1.4, 1.0) == pytest.approx(2 * h, rel=1e-9)


def test_mean_of_inverse_w_is_one(rng):
    from avgctl.quadrature import integrate_periodic

    for _ in range(200):
        r, ang = 0.9 * np.sqrt(rng.random()), rng.uniform(0, 2 * np.pi)
        ex, ey = r * np.cos(ang), r * np.sin(ang)
        val, _ = integrate_periodic(lambda L: 1 / gauss_fields(ex, ey, L).w)
        assert val == pytest.approx(1.0, rel=1e-8)


def test_reduced_matrix_ranks(rng):
    for _ in range(200):
        r, ang, L = 0.9 * np.sqrt(rng.random()), rng.uniform(0, 2 * np.pi), rng.uniform(0, 2 * np.pi)
        ex, ey = r * np.cos(ang), r * np.sin(ang)
        g = reduced_matrix(ex, ey, np.array([L]))[0]
        h = 1e-5
        dg = (reduced_matrix(ex, ey, np.array([L + h]))[0] - reduced_matrix(ex, ey, np.array([L - h]))[0]) / (2 * h)
        assert np.linalg.matrix_rank(g, tol=1e-8) == 2
        assert np.linalg.matrix_rank(np.hstack([g, dg]), tol=1e-6) == 3


def test_free_motion_keeps_elements(tb):
    x = np.array([1.0, 0.0, 0.0])
    assert tb.pulse(np.array(0.7), x) == pytest.approx(1.0)
    assert tb.pulse_ctl(np.array([0.1]), x).shape == (1, 2) and not np.any(tb.pulse_ctl(np.array([0.1]), x))
