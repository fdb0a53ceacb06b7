"""Radar tracking benchmark: constant-velocity target, r-u-v measurements.

A phased-array radar reports range (meters) and two direction cosines; the
precise range with coarse angles concentrates the likelihood on a thin
spherical shell far from the sensor. State vector ordering is
[x, vx, y, vy, z, vz] in meters and meters/second.
"""

from dataclasses import dataclass, field

import numpy as np

from bruf.belief import DynamicsModel, GaussianBelief, MeasurementModel
from bruf.exceptions import InvalidDirectionCosinesError, SingularPointError

_POSITION_IDX = np.array([0, 2, 4])


def _default_initial_state() -> np.ndarray:
    return np.array([1.1e6, -2.0e3, 1.1e6, -2.0e3, 1.1e6, -1.0e3])


@dataclass(frozen=True)
class TrackingScenario:
    """Constants of the radar tracking benchmark (SI units)."""

    dt: float = 1.0
    q_tilde: float = 1e-4
    sigma_r: float = 2.5
    sigma_u: float = 1e-3
    sigma_v: float = 1e-3
    initial_true_state: np.ndarray = field(default_factory=_default_initial_state)
    duration: int = 300

    @property
    def transition(self) -> np.ndarray:
        """Block constant-velocity transition matrix F."""
        t = self.dt
        block = np.array([[1.0, t], [0.0, 1.0]])
        f = np.zeros((6, 6))
        for i in range(3):
            f[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = block
        return f

    @property
    def process_noise(self) -> np.ndarray:
        """Block white-acceleration noise covariance Q = blocks * q_tilde."""
        t = self.dt
        block = np.array([[t**3 / 3.0, t**2 / 2.0], [t**2 / 2.0, t]])
        q = np.zeros((6, 6))
        for i in range(3):
            q[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = block
        return q * self.q_tilde

    @property
    def measurement_noise(self) -> np.ndarray:
        return np.diag([self.sigma_r**2, self.sigma_u**2, self.sigma_v**2])


def _ruv_h(state: np.ndarray) -> np.ndarray:
    pos = state[_POSITION_IDX]
    r = float(np.linalg.norm(pos))
    if r == 0.0:
        raise SingularPointError("r-u-v measurement undefined at the origin")
    return np.array([r, pos[0] / r, pos[1] / r])


def _ruv_jacobian(state: np.ndarray) -> np.ndarray:
    x, y, z = state[_POSITION_IDX]
    r = float(np.sqrt(x * x + y * y + z * z))
    if r == 0.0:
        raise SingularPointError("r-u-v Jacobian undefined at the origin")
    r3 = r**3
    jac = np.zeros((3, 6))
    jac[0, _POSITION_IDX] = [x / r, y / r, z / r]
    jac[1, _POSITION_IDX] = [(r * r - x * x) / r3, -x * y / r3, -x * z / r3]
    jac[2, _POSITION_IDX] = [-x * y / r3, (r * r - y * y) / r3, -y * z / r3]
    return jac


def ruv_model(
    sigma_r: float = 2.5, sigma_u: float = 1e-3, sigma_v: float = 1e-3
) -> MeasurementModel:
    """Range and direction-cosine measurement of the 6-state target."""
    return MeasurementModel(
        h=_ruv_h,
        jacobian=_ruv_jacobian,
        noise_cov=np.diag([sigma_r**2, sigma_u**2, sigma_v**2]),
    )


def ruv_to_cartesian(meas: np.ndarray) -> np.ndarray:
    """Convert one (r, u, v) measurement to a Cartesian position."""
    r, u, v = float(meas[0]), float(meas[1]), float(meas[2])
    w_sq = 1.0 - u * u - v * v
    if w_sq <= 0.0:
        raise InvalidDirectionCosinesError(
            f"direction cosines out of range: u^2 + v^2 = {u * u + v * v:.6f}"
        )
    return np.array([u * r, v * r, r * np.sqrt(w_sq)])


def _conversion_jacobian(meas: np.ndarray) -> np.ndarray:
    """Jacobian of the (r,u,v) -> (x,y,z) conversion at a measurement."""
    r, u, v = float(meas[0]), float(meas[1]), float(meas[2])
    w_sq = 1.0 - u * u - v * v
    if w_sq <= 0.0:
        raise InvalidDirectionCosinesError(
            f"direction cosines out of range: u^2 + v^2 = {u * u + v * v:.6f}"
        )
    w = np.sqrt(w_sq)
    return np.array(
        [
            [u, r, 0.0],
            [v, 0.0, r],
            [w, -r * u / w, -r * v / w],
        ]
    )


def tracking_initialize(
    y1: np.ndarray, y2: np.ndarray, scenario: TrackingScenario
) -> GaussianBelief:
    """Two-point initialization from the first two r-u-v measurements.

    Positions come from the converted second measurement, velocities from
    first differences. Each converted position covariance is the
    first-order propagation C_k = J_k R J_k^T; with independent
    measurements the velocity covariance is (C1 + C2) / T^2 and the
    position-velocity cross covariance is C2 / T.
    """
    t = scenario.dt
    r_meas = scenario.measurement_noise
    p1 = ruv_to_cartesian(y1)
    p2 = ruv_to_cartesian(y2)
    j1 = _conversion_jacobian(y1)
    j2 = _conversion_jacobian(y2)
    c1 = j1 @ r_meas @ j1.T
    c2 = j2 @ r_meas @ j2.T
    vel = (p2 - p1) / t

    mean = np.empty(6)
    mean[_POSITION_IDX] = p2
    mean[_POSITION_IDX + 1] = vel

    cov = np.empty((6, 6))
    pos_pos = c2
    pos_vel = c2 / t
    vel_vel = (c1 + c2) / t**2
    for a in range(3):
        for b in range(3):
            cov[2 * a, 2 * b] = pos_pos[a, b]
            cov[2 * a, 2 * b + 1] = pos_vel[a, b]
            cov[2 * a + 1, 2 * b] = pos_vel[b, a]
            cov[2 * a + 1, 2 * b + 1] = vel_vel[a, b]
    cov = 0.5 * (cov + cov.T)
    return GaussianBelief(mean, cov)


def constant_velocity_dynamics(scenario: TrackingScenario) -> DynamicsModel:
    """Linear constant-velocity dynamics with white-acceleration noise."""
    f = scenario.transition
    q = scenario.process_noise

    def propagate(x: np.ndarray, dt: float) -> np.ndarray:
        del dt  # fixed step; F is built for scenario.dt
        return f @ x

    def cov_propagator(x: np.ndarray, p: np.ndarray, dt: float):
        del dt
        return f @ x, f @ p @ f.T + q

    return DynamicsModel(
        propagate=propagate, process_noise_cov=q, cov_propagator=cov_propagator
    )


def simulate_tracking_truth(scenario: TrackingScenario, rng) -> np.ndarray:
    """Simulate the true trajectory, shape (duration + 1, 6).

    Row k is the state at time step k; row 0 is the initial state. The
    truth follows the same constant-velocity model as the filter, driven by
    process noise drawn from Q each step.
    """
    f = scenario.transition
    q = scenario.process_noise
    chol_q = np.linalg.cholesky(q)
    states = np.empty((scenario.duration + 1, 6))
    states[0] = scenario.initial_true_state
    noise = rng.standard_normal((scenario.duration, 6)) @ chol_q.T
    for k in range(scenario.duration):
        states[k + 1] = f @ states[k] + noise[k]
    return states
