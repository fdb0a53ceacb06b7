"""Benchmark systems: 2-D range observation, r-u-v radar tracking, Lorenz '96."""

from bruf.models.range_obs import RangeScenario, range_model
from bruf.models.tracking import (
    TrackingScenario,
    constant_velocity_dynamics,
    ruv_model,
    ruv_to_cartesian,
    simulate_tracking_truth,
    tracking_initialize,
)
from bruf.models.lorenz96 import (
    Lorenz96Scenario,
    l96_measurement_model,
    lorenz96_derivative,
    lorenz96_dynamics,
    lorenz96_jacobian,
    lorenz96_spinup,
    rk4_propagate,
)

__all__ = [
    "Lorenz96Scenario",
    "RangeScenario",
    "TrackingScenario",
    "constant_velocity_dynamics",
    "l96_measurement_model",
    "lorenz96_derivative",
    "lorenz96_dynamics",
    "lorenz96_jacobian",
    "lorenz96_spinup",
    "range_model",
    "rk4_propagate",
    "ruv_model",
    "ruv_to_cartesian",
    "simulate_tracking_truth",
    "tracking_initialize",
]
