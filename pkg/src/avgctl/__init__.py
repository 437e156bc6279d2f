"""Average control systems of fast-oscillating and Kepler-type control systems."""
from __future__ import annotations

from .averaging import (
    ControlProfile,
    CotangentPoint,
    average_velocity,
    dual_norm,
    grad_hamiltonian,
    hamiltonian,
    mean_pulsation,
    optimal_profile,
    theta_rank,
    velocity_set_dim,
)
from .dynamics import (
    IntegratorSpec,
    JointControl,
    Trajectory,
    integrate_average,
    integrate_average_extremal,
    integrate_kepler,
    integrate_oscillating,
    integrate_oscillating_extremal,
    kepler_time_rescale,
    recovery_control,
)
from .quadrature import QuadratureSpec, integrate_periodic, locate_zeros
from .systems import REGISTRY, KeplerSystem, OscillatingSystem, rotating_field
from .two_body import two_body_system

__version__ = "0.1.0"
