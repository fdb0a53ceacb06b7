"""Single-state measurement updates.

One EKF step, the information-form update, recursive updates that split the
measurement into weighted sub-updates (uniform and variable step schedules),
an error-controlled variant that picks its own pseudo-time steps with an
embedded explicit-midpoint estimate, and a Gauss-Newton iterated EKF with
optional backtracking line search.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from bruf.belief import GaussianBelief, MeasurementModel
from bruf.exceptions import (
    NoDescentError,
    NotPositiveDefiniteError,
    StalledControllerError,
)
from bruf.linalg import spd_solve, symmetrize

_PSEUDO_TIME_TOL = 1e-12


@dataclass(frozen=True)
class StepSchedule:
    """Positive coefficients c_1..c_N that split one measurement update.

    The coefficients must sum to 1 (within 1e-12); step i assimilates the
    measurement with covariance inflated to R / c_i. ``uniform`` uses
    c_i = 1/N, ``variable`` the increasing weights c_i = i / (N(N+1)/2),
    and ``custom`` any positive set summing to 1. ``adaptive`` defers the
    choice of steps to an ErrorController.
    """

    kind: str
    coefficients: Optional[np.ndarray] = None
    controller: Optional["ErrorController"] = None

    def __post_init__(self):
        if self.kind == "adaptive":
            if self.controller is None:
                raise ValueError("adaptive schedule requires a controller")
            return
        coeffs = np.asarray(self.coefficients, dtype=float)
        if coeffs.ndim != 1 or coeffs.size < 1:
            raise ValueError("schedule coefficients must be a nonempty vector")
        if np.any(coeffs <= 0):
            raise ValueError("schedule coefficients must be positive")
        object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def uniform(cls, n_steps: int) -> "StepSchedule":
        if n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        return cls(kind="uniform", coefficients=np.full(n_steps, 1.0 / n_steps))

    @classmethod
    def variable(cls, n_steps: int) -> "StepSchedule":
        """Increasing weights i / (N(N+1)/2), light first steps, heavy last."""
        if n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        total = n_steps * (n_steps + 1) / 2.0
        return cls(kind="variable", coefficients=np.arange(1, n_steps + 1) / total)

    @classmethod
    def custom(cls, coefficients, validate: bool = True) -> "StepSchedule":
        """Arbitrary positive coefficients.

        With ``validate=True`` (default) the sum must be 1 within 1e-12.
        ``validate=False`` exists only for negative-control experiments.
        """
        sched = cls(kind="custom", coefficients=np.asarray(coefficients, dtype=float))
        if validate and abs(float(np.sum(sched.coefficients)) - 1.0) > 1e-12:
            raise ValueError(
                f"schedule coefficients must sum to 1, got {float(np.sum(sched.coefficients))!r}"
            )
        return sched

    @classmethod
    def adaptive(cls, controller: "ErrorController") -> "StepSchedule":
        return cls(kind="adaptive", controller=controller)

    @property
    def n_steps(self) -> int:
        if self.kind == "adaptive":
            raise ValueError("adaptive schedules have no fixed step count")
        return self.coefficients.size


@dataclass(frozen=True)
class ErrorController:
    """Tolerances and factors for the adaptive pseudo-time step controller.

    The initial step is 1/n0. A trial step is rejected when the scaled
    error estimate exceeds 1; accepted steps grow by at most f_max and
    shrink by at least f_min, through the factor f * sqrt(1/err).
    """

    atol: float
    rtol: float
    f: float = math.sqrt(0.38)
    f_min: float = 0.2
    f_max: float = 6.0
    n0: int = 25
    max_rejections: int = 50

    def __post_init__(self):
        if self.atol <= 0 or self.rtol <= 0:
            raise ValueError("atol and rtol must be positive")
        if not (0 < self.f_min < 1 < self.f_max):
            raise ValueError("factors must satisfy 0 < f_min < 1 < f_max")
        if self.n0 < 1:
            raise ValueError("n0 must be >= 1")
        if self.max_rejections < 1:
            raise ValueError("max_rejections must be >= 1")


@dataclass
class UpdateTrace:
    """Accepted iterates of one measurement update.

    ``times`` are the pseudo-times in (0, 1] at which each iterate was
    committed (strictly increasing, ending at 1); ``states`` and ``covs``
    are the matching estimates. Rejected trial steps are counted but not
    recorded.
    """

    times: np.ndarray
    states: np.ndarray
    covs: np.ndarray
    accepted_steps: int
    rejected_steps: int = 0

    @property
    def iterates(self):
        return list(zip(self.times, self.states, self.covs))


def _ekf_step(x, p, model: MeasurementModel, y, noise_scale: float):
    """One EKF-style update with measurement covariance noise_scale * R.

    Returns (x_new, p_new, k_gain, jac). Shared by every filter so that the
    degenerate configurations coincide bitwise.
    """
    jac = np.atleast_2d(np.asarray(model.jacobian(x), dtype=float))
    r = model.noise_cov if noise_scale == 1.0 else noise_scale * model.noise_cov
    hp = jac @ p
    s = hp @ jac.T + r
    try:
        k_gain = spd_solve(s, hp).T
    except NotPositiveDefiniteError as err:
        raise NotPositiveDefiniteError(
            f"innovation covariance is not positive definite: {err}", pivot=err.pivot
        ) from err
    innov = np.atleast_1d(np.asarray(y, dtype=float)) - np.atleast_1d(model.h(x))
    x_new = x + k_gain @ innov
    p_new = symmetrize((np.eye(p.shape[0]) - k_gain @ jac) @ p)
    return x_new, p_new, k_gain, jac


def kalman_update(
    prior: GaussianBelief, model: MeasurementModel, y
) -> GaussianBelief:
    """The EKF measurement update, linearized at the prior mean."""
    x, p, _, _ = _ekf_step(prior.mean, prior.cov, model, y, 1.0)
    return GaussianBelief(x, p)


def information_update(
    prior: GaussianBelief,
    model: MeasurementModel,
    y,
    linearization: Optional[np.ndarray] = None,
) -> GaussianBelief:
    """Additive information-form update at a fixed linearization.

    Information matrix: P^-1 + H^T R^-1 H; information state: z + H^T R^-1 y.
    This is the linear-measurement form (it uses the raw measurement, not an
    effective one), so it matches ``kalman_update`` exactly when h is linear.
    """
    x0 = prior.mean if linearization is None else np.asarray(linearization, dtype=float)
    jac = np.atleast_2d(np.asarray(model.jacobian(x0), dtype=float))
    n = prior.dim
    try:
        p_inv = spd_solve(prior.cov, np.eye(n))
    except NotPositiveDefiniteError as err:
        raise NotPositiveDefiniteError(
            f"prior covariance is not invertible: {err}", pivot=err.pivot
        ) from err
    ht_rinv = spd_solve(model.noise_cov, jac).T
    info_matrix = symmetrize(p_inv + ht_rinv @ jac)
    info_state = p_inv @ prior.mean + ht_rinv @ np.atleast_1d(np.asarray(y, dtype=float))
    cov = symmetrize(spd_solve(info_matrix, np.eye(n)))
    mean = spd_solve(info_matrix, info_state)
    return GaussianBelief(mean, cov)


def bruf_update(
    prior: GaussianBelief, model: MeasurementModel, y, schedule: StepSchedule
) -> tuple[GaussianBelief, UpdateTrace]:
    """Recursive measurement update over a fixed step schedule.

    Step i relinearizes at the current estimate and applies an EKF-style
    update with measurement covariance R / c_i. A uniform schedule gives the
    plain recursive update (noise N R each step); the variable schedule gives
    the increasing-weight variant. N = 1 coincides with ``kalman_update``
    bitwise.
    """
    if schedule.kind == "adaptive":
        raise ValueError("adaptive schedules are handled by ec_bruf_update")
    coeffs = schedule.coefficients
    x, p = prior.mean, prior.cov
    times = np.cumsum(coeffs)
    states = np.empty((coeffs.size, prior.dim))
    covs = np.empty((coeffs.size, prior.dim, prior.dim))
    for i, c in enumerate(coeffs):
        try:
            x, p, _, _ = _ekf_step(x, p, model, y, 1.0 / c)
        except NotPositiveDefiniteError as err:
            raise NotPositiveDefiniteError(
                f"step {i + 1}: {err}", pivot=err.pivot
            ) from err
        states[i] = x
        covs[i] = p
    trace = UpdateTrace(times=times, states=states, covs=covs, accepted_steps=coeffs.size)
    return GaussianBelief(x, p), trace


def _growth_factor(ctrl: ErrorController, err: float, cap: float) -> float:
    if err == 0.0:
        return cap
    return min(cap, max(ctrl.f_min, ctrl.f * math.sqrt(1.0 / err)))


def ec_bruf_update(
    prior: GaussianBelief, model: MeasurementModel, y, ctrl: ErrorController
) -> tuple[GaussianBelief, UpdateTrace]:
    """Recursive update with adaptive pseudo-time steps.

    Each trial step performs the EKF-style update with covariance R / ds,
    then a second update linearized at the trial state; the scaled RMS
    difference between the trial state and the midpoint combination of the
    two increments drives acceptance and the next step size. Accepted steps
    advance the pseudo-time from 0 to 1.
    """
    x, p = prior.mean, prior.cov
    y = np.atleast_1d(np.asarray(y, dtype=float))
    t_c = 0.0
    ds = 1.0 / ctrl.n0
    times, states, covs = [], [], []
    rejected = 0
    rejections_here = 0
    while t_c < 1.0 - _PSEUDO_TIME_TOL:
        if t_c + ds > 1.0:
            ds = 1.0 - t_c
        try:
            x1, p1, _, _ = _ekf_step(x, p, model, y, 1.0 / ds)
            dx1 = x1 - x
            x2_end, _, _, _ = _ekf_step(x1, p1, model, y, 1.0 / ds)
            dx2 = x2_end - x1
        except NotPositiveDefiniteError as err:
            raise NotPositiveDefiniteError(
                f"at pseudo-time {t_c:.6g}: {err}", pivot=err.pivot
            ) from err
        x_mid = x + 0.5 * (dx1 + dx2)
        scale = ctrl.atol + np.maximum(np.abs(x1), np.abs(x_mid)) * ctrl.rtol
        err = float(np.sqrt(np.mean(((x1 - x_mid) / scale) ** 2)))
        if err > 1.0:
            rejections_here += 1
            rejected += 1
            if rejections_here > ctrl.max_rejections:
                raise StalledControllerError(
                    f"controller rejected {rejections_here} consecutive trials "
                    f"at pseudo-time {t_c:.6g}",
                    pseudo_time=t_c,
                    rejections=rejections_here,
                )
            ds = ds * _growth_factor(ctrl, err, cap=0.9)
            continue
        rejections_here = 0
        t_c = t_c + ds
        x, p = x1, p1
        times.append(min(t_c, 1.0))
        states.append(x)
        covs.append(p)
        ds = ds * _growth_factor(ctrl, err, cap=ctrl.f_max)
    trace = UpdateTrace(
        times=np.asarray(times),
        states=np.asarray(states),
        covs=np.asarray(covs),
        accepted_steps=len(times),
        rejected_steps=rejected,
    )
    return GaussianBelief(x, p), trace


def map_objective(prior: GaussianBelief, model: MeasurementModel, y, x) -> float:
    """Negative log posterior (up to constants) at x.

    J(x) = (x - xbar)^T Pbar^-1 (x - xbar) + (y - h(x))^T R^-1 (y - h(x)).
    """
    x = np.asarray(x, dtype=float)
    dx = x - prior.mean
    res = np.atleast_1d(np.asarray(y, dtype=float)) - np.atleast_1d(model.h(x))
    return float(dx @ spd_solve(prior.cov, dx) + res @ spd_solve(model.noise_cov, res))


_MAX_HALVINGS = 60


def iekf_update(
    prior: GaussianBelief,
    model: MeasurementModel,
    y,
    max_iters: int = 25,
    tol: float = 1e-9,
    line_search: bool = False,
) -> tuple[GaussianBelief, UpdateTrace]:
    """Gauss-Newton iteration of the EKF update toward the posterior mode.

    Each iteration relinearizes at the current iterate x_k and computes the
    candidate xbar + K_k (y - h(x_k) - H_k (xbar - x_k)). With
    ``line_search`` the move from x_k toward the candidate is scaled by
    1/2^j for the smallest j >= 0 that decreases the posterior objective.
    Iteration stops when consecutive iterates differ by less than ``tol``
    or after ``max_iters``. The covariance is updated once, with the gain
    and Jacobian of the last executed iteration.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    xbar, pbar = prior.mean, prior.cov
    x = xbar
    states = []
    k_last = jac_last = None
    j_current = map_objective(prior, model, y, x) if line_search else None
    for _ in range(max_iters):
        jac = np.atleast_2d(np.asarray(model.jacobian(x), dtype=float))
        hp = jac @ pbar
        s = hp @ jac.T + model.noise_cov
        try:
            k_gain = spd_solve(s, hp).T
        except NotPositiveDefiniteError as err:
            raise NotPositiveDefiniteError(
                f"innovation covariance is not positive definite: {err}",
                pivot=err.pivot,
            ) from err
        candidate = xbar + k_gain @ (y - np.atleast_1d(model.h(x)) - jac @ (xbar - x))
        k_last, jac_last = k_gain, jac
        if line_search:
            step = candidate - x
            beta = 1.0
            for _halving in range(_MAX_HALVINGS + 1):
                x_new = x + beta * step
                j_new = map_objective(prior, model, y, x_new)
                if j_new < j_current:
                    break
                beta *= 0.5
            else:
                raise NoDescentError(
                    f"no objective decrease after {_MAX_HALVINGS} halvings"
                )
            j_current = j_new
        else:
            x_new = candidate
        delta = float(np.linalg.norm(x_new - x))
        x = x_new
        states.append(x)
        if delta < tol:
            break
    p_hat = symmetrize((np.eye(prior.dim) - k_last @ jac_last) @ pbar)
    n_iters = len(states)
    trace = UpdateTrace(
        times=np.arange(1, n_iters + 1) / n_iters,
        states=np.asarray(states),
        covs=np.broadcast_to(p_hat, (n_iters, prior.dim, prior.dim)).copy(),
        accepted_steps=n_iters,
    )
    return GaussianBelief(x, p_hat), trace
