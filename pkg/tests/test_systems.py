from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from avgctl.errors import DomainError, UnsupportedOrderError
from avgctl.systems import (
    REGISTRY,
    TWO_PI,
    AngleS1,
    OscillatingSystem,
    central_difference,
    check_periodicity,
    eval_field,
    kepler_to_oscillating,
    normalize_angle,
    state_jacobian,
)


@given(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False))
def test_normalize_angle_range_and_congruence(s):
    r = normalize_angle(s)
    assert 0.0 <= r < TWO_PI
    assert abs(np.sin(r) - np.sin(s)) < 1e-8 and abs(np.cos(r) - np.cos(s)) < 1e-8


def test_normalize_angle_edges():
    assert normalize_angle(TWO_PI) == 0.0
    assert normalize_angle(-0.0) == 0.0
    assert np.copysign(1.0, normalize_angle(-TWO_PI)) == 1.0
    assert AngleS1(-np.pi / 2).canonical == pytest.approx(1.5 * np.pi)
    with pytest.raises(DomainError):
        normalize_angle(float("nan"))


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_central_difference_matches_sine_derivatives(order):
    # d^j sin = sin(t + j pi/2)
    t = 0.7
    got = central_difference(np.sin, t, 1e-2, order=order)
    assert got == pytest.approx(np.sin(t + order * np.pi / 2), abs=1e-6)


def test_central_difference_order_limit():
    with pytest.raises(UnsupportedOrderError):
        central_difference(np.sin, 0.0, 1e-2, order=5)


def test_rotating_field_shapes_and_values(rot):
    th = np.linspace(0, 1, 5)
    g = rot.G(th, np.zeros(2))
    assert g.shape == (5, 2, 1)
    assert np.allclose(g[:, 0, 0], np.cos(th)) and np.allclose(g[:, 1, 0], np.sin(th))
    assert rot.G(0.3, np.zeros(2)).shape == (2, 1)


def test_analytic_theta_derivatives_match_fd(rot, tb):
    x = np.array([1.2, 0.1, -0.2])
    for j in (1, 2):
        fd = central_difference(lambda t: tb.G(t, x), 0.4, 1e-3, order=j)
        assert np.allclose(eval_field(tb, 0.4, x, "d_theta", j), fd, atol=1e-7)
        exact = rot.G(0.4 + j * np.pi / 2, np.zeros(2))
        assert np.allclose(eval_field(rot, 0.4, np.zeros(2), "d_theta", j), exact, atol=1e-12)


def test_two_body_state_jacobian_matches_fd(tb):
    x = np.array([1.3, 0.2, -0.3])
    th = np.linspace(0, 6, 7)
    assert np.allclose(tb.d_field_dx(th, x), state_jacobian(tb, th, x), atol=1e-8)
    fd = state_jacobian(tb, th, x, func=lambda t, y: tb.omega(t, y))
    assert np.allclose(tb.omega_dx(th, x), fd, atol=1e-8)


def test_check_state_rejects_bad_input(rot, tb):
    with pytest.raises(DomainError):
        rot.check_state([1.0, 2.0, 3.0])
    with pytest.raises(DomainError):
        tb.check_state([1.0, 0.95, 0.0])
    with pytest.raises(DomainError):
        tb.check_state([-1.0, 0.0, 0.0])


def test_kepler_reduction_divides_by_pulsation(tb):
    red = kepler_to_oscillating(tb)
    x = np.array([2.0, 0.3, 0.1])
    th = np.linspace(0, TWO_PI, 9)
    assert np.allclose(red.G(th, x), tb.G(th, x) / tb.omega(th, x)[:, None, None])


def test_registry(tb):
    assert set(REGISTRY.labels()) >= {"rotating_field", "rotating_field_2", "two_body_planar"}
    assert "two_body_planar" in REGISTRY
    assert REGISTRY.get("two_body_planar").n == 3
    with pytest.raises(KeyError):
        REGISTRY.get("missing")
    with pytest.raises(ValueError):
        REGISTRY.register("rotating_field", lambda: None)


def test_periodicity_check_flags_non_periodic_field():
    bad = OscillatingSystem(n=1, m=1, field=lambda th, x: (th / 7.0)[..., None, None])
    with pytest.raises(DomainError):
        check_periodicity(bad, [np.zeros(1)])
