"""Lorenz '96 benchmark: 40-state cyclic dynamics, nonlinear partial observation.

Dynamics dx_i/dt = (x_{i+1} - x_{i-2}) x_{i-1} - x_i + F on a circular
domain, integrated with classical fourth-order Runge-Kutta. Every other
state is observed through a componentwise power nonlinearity whose exponent
gamma tunes the measurement nonlinearity (gamma = 1 is exactly linear).
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from bruf.belief import DynamicsModel, MeasurementModel
from bruf.exceptions import DimensionError, DivergenceError
from bruf.linalg import symmetrize


def _default_obs_indices() -> np.ndarray:
    return np.arange(1, 40, 2)


@dataclass(frozen=True)
class Lorenz96Scenario:
    """Constants of the Lorenz '96 assimilation benchmark."""

    n: int = 40
    forcing: float = 8.0
    meas_scale: float = 10.0
    gamma: float = 5.0
    obs_indices: np.ndarray = field(default_factory=_default_obs_indices)
    dt_obs: float = 0.05
    substeps: int = 10
    n_cycles: int = 350
    burn_in: int = 50

    @property
    def meas_dim(self) -> int:
        return len(self.obs_indices)

    @property
    def noise_cov(self) -> np.ndarray:
        return np.eye(self.meas_dim)


def lorenz96_derivative(x: np.ndarray, forcing: float = 8.0) -> np.ndarray:
    """Cyclic advection-dissipation-forcing tendency; batched over rows."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] < 4:
        raise DimensionError(f"dynamics need at least 4 states, got {x.shape[-1]}")
    xp1 = np.roll(x, -1, axis=-1)
    xm1 = np.roll(x, 1, axis=-1)
    xm2 = np.roll(x, 2, axis=-1)
    return (xp1 - xm2) * xm1 - x + forcing


def lorenz96_jacobian(x: np.ndarray, forcing: float = 8.0) -> np.ndarray:
    """Jacobian of the tendency at state x (n x n)."""
    del forcing  # the forcing term is constant
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    jac = -np.eye(n)
    idx = np.arange(n)
    jac[idx, (idx + 1) % n] += x[(idx - 1) % n]
    jac[idx, (idx - 1) % n] += x[(idx + 1) % n] - x[(idx - 2) % n]
    jac[idx, (idx - 2) % n] += -x[(idx - 1) % n]
    return jac


def rk4_propagate(
    x: np.ndarray, dt: float, substeps: int, deriv: Callable[[np.ndarray], np.ndarray]
) -> np.ndarray:
    """Classical fourth-order Runge-Kutta over ``substeps`` equal steps.

    Accepts a single state or a stack of states (rows). Raises
    DivergenceError carrying the substep index if the state goes non-finite.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    x = np.asarray(x, dtype=float)
    h = dt / substeps
    for step in range(substeps):
        k1 = deriv(x)
        k2 = deriv(x + 0.5 * h * k1)
        k3 = deriv(x + 0.5 * h * k2)
        k4 = deriv(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(
                f"state became non-finite at substep {step + 1}", substep=step + 1
            )
    return x


def lorenz96_dynamics(scenario: Lorenz96Scenario) -> DynamicsModel:
    """Dynamics model integrating the tendency with RK4 substeps.

    ``cov_propagator`` advances (x, P) jointly under the tangent-linear
    dynamics dP/dt = J P + P J^T, for the particle flow's companion filter.
    """
    forcing = scenario.forcing
    substeps = scenario.substeps

    def deriv(x):
        return lorenz96_derivative(x, forcing)

    def propagate(x: np.ndarray, dt: float) -> np.ndarray:
        return rk4_propagate(x, dt, substeps, deriv)

    def joint_deriv(x, p):
        jac = lorenz96_jacobian(x, forcing)
        return lorenz96_derivative(x, forcing), jac @ p + p @ jac.T

    def cov_propagator(x: np.ndarray, p: np.ndarray, dt: float):
        h = dt / substeps
        for step in range(substeps):
            kx1, kp1 = joint_deriv(x, p)
            kx2, kp2 = joint_deriv(x + 0.5 * h * kx1, p + 0.5 * h * kp1)
            kx3, kp3 = joint_deriv(x + 0.5 * h * kx2, p + 0.5 * h * kp2)
            kx4, kp4 = joint_deriv(x + h * kx3, p + h * kp3)
            x = x + (h / 6.0) * (kx1 + 2.0 * kx2 + 2.0 * kx3 + kx4)
            p = p + (h / 6.0) * (kp1 + 2.0 * kp2 + 2.0 * kp3 + kp4)
            if not np.all(np.isfinite(x)):
                raise DivergenceError(
                    f"state became non-finite at substep {step + 1}", substep=step + 1
                )
        return x, symmetrize(p)

    return DynamicsModel(propagate=propagate, cov_propagator=cov_propagator)


def _meas_value(x, meas_scale, gamma):
    return 0.5 * x * (1.0 + (np.abs(x) / meas_scale) ** (gamma - 1.0))


def _meas_derivative(x, meas_scale, gamma):
    return 0.5 * (1.0 + gamma * (np.abs(x) / meas_scale) ** (gamma - 1.0))


def l96_measurement_model(scenario: Lorenz96Scenario) -> MeasurementModel:
    """Componentwise nonlinear observation of every other state.

    h(x) = (x/2)[1 + (|x|/f)^(gamma-1)] applied to the observed components;
    the Jacobian rows carry h'(x) = (1/2)[1 + gamma (|x|/f)^(gamma-1)] in
    the observed columns.
    """
    if scenario.gamma < 1.0:
        raise ValueError("gamma must be >= 1")
    if scenario.meas_scale <= 0.0:
        raise ValueError("meas_scale must be positive")
    obs = np.asarray(scenario.obs_indices, dtype=int)
    n = scenario.n
    f_scale = scenario.meas_scale
    gamma = scenario.gamma
    m = obs.size

    def h(x: np.ndarray) -> np.ndarray:
        return _meas_value(np.asarray(x, dtype=float)[obs], f_scale, gamma)

    def jacobian(x: np.ndarray) -> np.ndarray:
        jac = np.zeros((m, n))
        jac[np.arange(m), obs] = _meas_derivative(
            np.asarray(x, dtype=float)[obs], f_scale, gamma
        )
        return jac

    def h_batch(states: np.ndarray) -> np.ndarray:
        return _meas_value(states[:, obs], f_scale, gamma)

    def jacobian_batch(states: np.ndarray) -> np.ndarray:
        vals = _meas_derivative(states[:, obs], f_scale, gamma)
        jac = np.zeros((states.shape[0], m, n))
        jac[:, np.arange(m), obs] = vals
        return jac

    return MeasurementModel(
        h=h,
        jacobian=jacobian,
        noise_cov=scenario.noise_cov,
        h_batch=h_batch,
        jacobian_batch=jacobian_batch,
    )


def lorenz96_spinup(scenario: Lorenz96Scenario, steps: int = 500) -> np.ndarray:
    """Deterministic on-attractor initial truth state.

    Starts from the uniform fixed point with the first component nudged by
    0.01 and integrates ``steps`` observation intervals.
    """
    x = np.full(scenario.n, scenario.forcing)
    x[0] += 0.01
    for _ in range(steps):
        x = rk4_propagate(
            x,
            scenario.dt_obs,
            scenario.substeps,
            lambda s: lorenz96_derivative(s, scenario.forcing),
        )
    return x
