"""Planar range-from-origin benchmark.

A 2-D Gaussian prior observed through the distance to the origin; the
posterior concentrates on a crescent of the measured ring, which defeats a
single linearized update.
"""

from dataclasses import dataclass, field

import numpy as np

from bruf.belief import GaussianBelief, MeasurementModel
from bruf.exceptions import SingularPointError


def _default_prior() -> GaussianBelief:
    return GaussianBelief(mean=[-3.0, 0.0], cov=[[1.0, 0.5], [0.5, 1.0]])


@dataclass(frozen=True)
class RangeScenario:
    """Fixed constants of the range-observation benchmark."""

    prior: GaussianBelief = field(default_factory=_default_prior)
    noise_var: float = 0.01
    observed: float = 1.0


def _range_h(x: np.ndarray) -> np.ndarray:
    return np.array([float(np.hypot(x[0], x[1]))])


def _range_jacobian(x: np.ndarray) -> np.ndarray:
    r = float(np.hypot(x[0], x[1]))
    if r == 0.0:
        raise SingularPointError("range Jacobian is undefined at the origin")
    return np.array([[x[0] / r, x[1] / r]])


def _range_h_batch(states: np.ndarray) -> np.ndarray:
    return np.hypot(states[:, 0], states[:, 1])[:, None]


def _range_jacobian_batch(states: np.ndarray) -> np.ndarray:
    r = np.hypot(states[:, 0], states[:, 1])
    if np.any(r == 0.0):
        raise SingularPointError("range Jacobian is undefined at the origin")
    return (states / r[:, None])[:, None, :]


def range_model(noise_var: float = 0.01) -> MeasurementModel:
    """Distance-from-origin measurement with variance ``noise_var``."""
    return MeasurementModel(
        h=_range_h,
        jacobian=_range_jacobian,
        noise_cov=np.array([[noise_var]]),
        h_batch=_range_h_batch,
        jacobian_batch=_range_jacobian_batch,
    )
