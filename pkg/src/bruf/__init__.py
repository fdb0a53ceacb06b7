"""Recursive-update nonlinear Kalman filtering.

Single-state measurement updates (EKF, IEKF, recursive updates with uniform,
variable, or error-controlled step schedules), their ensemble liftings, a
Gromov particle-flow baseline, benchmark models, a grid-based posterior
oracle, Monte Carlo metrics, and an experiment harness.
"""

from bruf.belief import (
    DynamicsModel,
    Ensemble,
    GaussianBelief,
    MeasurementModel,
    empirical_cov,
    empirical_mean,
    inflate,
)
from bruf.linalg import spd_solve, symmetric_sqrt
from bruf.recursive import (
    ErrorController,
    StepSchedule,
    UpdateTrace,
    bruf_update,
    ec_bruf_update,
    iekf_update,
    information_update,
    kalman_update,
)
from bruf.ensemble import (
    EnsembleTrace,
    EnsembleUpdateConfig,
    GromovConfig,
    bruenkf_update,
    ec_bruenkf_update,
    enkf_update,
    gromov_flow_update,
)
from bruf.rng import split_rng

__all__ = [
    "DynamicsModel",
    "Ensemble",
    "EnsembleTrace",
    "EnsembleUpdateConfig",
    "ErrorController",
    "GaussianBelief",
    "GromovConfig",
    "MeasurementModel",
    "StepSchedule",
    "UpdateTrace",
    "bruenkf_update",
    "bruf_update",
    "ec_bruenkf_update",
    "ec_bruf_update",
    "empirical_cov",
    "empirical_mean",
    "enkf_update",
    "gromov_flow_update",
    "iekf_update",
    "inflate",
    "information_update",
    "kalman_update",
    "spd_solve",
    "split_rng",
    "symmetric_sqrt",
]

__version__ = "0.1.0"
