"""Ensemble measurement updates and the particle-flow baseline.

The linearized EnKF performs one perturbed-observation update with a
per-member Jacobian; the recursive variants split that update across a step
schedule, re-inflating and recomputing the ensemble covariance each step.
The error-controlled variant drives the whole ensemble through the same
adaptive pseudo-time controller as the single-state update, with the error
measured on the ensemble mean. Gromov flow moves particles along a
prior-to-posterior homotopy with a drift-diffusion step and relies on a
companion EKF for its covariance and resampling distribution.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from bruf.belief import Ensemble, GaussianBelief, MeasurementModel, empirical_cov
from bruf.exceptions import NotPositiveDefiniteError, StalledControllerError
from bruf.linalg import cholesky_lower, spd_solve, spd_solve_many, symmetric_sqrt, symmetrize
from bruf.recursive import ErrorController, StepSchedule, _growth_factor, kalman_update

_PSEUDO_TIME_TOL = 1e-12


@dataclass(frozen=True)
class EnsembleUpdateConfig:
    """Schedule, inflation, and perturbation switches for ensemble updates."""

    schedule: StepSchedule
    inflation: float = 1.0
    perturb_observations: bool = True

    def __post_init__(self):
        if self.inflation < 1.0:
            raise ValueError(f"inflation must be >= 1, got {self.inflation}")


@dataclass(frozen=True)
class GromovConfig:
    """Step count and companion-filter options for the particle flow."""

    n_steps: int = 25
    companion_process_noise: Optional[np.ndarray] = None
    resample_after_update: bool = True

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")


@dataclass
class EnsembleTrace:
    """Pseudo-time snapshots of the ensemble during one update."""

    times: list
    snapshots: list
    accepted_steps: int
    rejected_steps: int = 0


def _draw_perturbations(rng, chol_r, m_members, perturb):
    if not perturb:
        return 0.0
    z = rng.standard_normal((m_members, chol_r.shape[0]))
    return z @ chol_r.T


def _member_update(x_members, cov, model, y, noise_scale, perturbations):
    """Per-member gain update with a common covariance.

    Returns the member increments K_j (y - h(x_j) - gamma_j). The gain
    uses each member's own Jacobian and measurement covariance
    noise_scale * R; the state covariance is common to all members.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    y_pred = model.measure_many(x_members) + perturbations
    jac = model.jacobian_many(x_members)  # (M, m, n)
    r = model.noise_cov if noise_scale == 1.0 else noise_scale * model.noise_cov
    hp = jac @ cov  # (M, m, n)
    s = hp @ np.swapaxes(jac, -1, -2) + r
    try:
        kt = spd_solve_many(s, hp)  # K_j^T, shape (M, m, n)
    except NotPositiveDefiniteError as err:
        raise NotPositiveDefiniteError(
            f"member {err.pivot if err.pivot is not None else '?'}: "
            f"innovation covariance not positive definite",
            pivot=err.pivot,
        ) from err
    innov = y - y_pred  # (M, m)
    return np.einsum("jmn,jm->jn", kt, innov)


def _inflate_about_mean(x_members, factor):
    if factor == 1.0:
        return x_members
    mean = x_members.mean(axis=0)
    return mean + factor * (x_members - mean)


def _recursive_ensemble_step(x_members, model, y, coeff, alpha, rng, perturb, chol_r):
    """One recursive step: inflate by alpha^c, recompute covariance, update."""
    factor = alpha if coeff == 1.0 else alpha**coeff
    x_members = _inflate_about_mean(x_members, factor)
    cov = empirical_cov(x_members)
    gamma = _draw_perturbations(rng, chol_r, x_members.shape[0], perturb)
    dx = _member_update(x_members, cov, model, y, 1.0 / coeff, gamma)
    return x_members + dx


def enkf_update(
    ens: Ensemble, model: MeasurementModel, y, alpha: float, rng, perturb: bool = True
) -> Ensemble:
    """The linearized perturbed-observation ensemble update.

    Inflates by alpha, computes the sample covariance once, then updates
    each member with its own Jacobian and a perturbed predicted measurement.
    The covariance is not refreshed inside the member loop.
    """
    if alpha < 1.0:
        raise ValueError(f"inflation must be >= 1, got {alpha}")
    chol_r = cholesky_lower(model.noise_cov)
    out = _recursive_ensemble_step(
        ens.members, model, y, 1.0, alpha, rng, perturb, chol_r
    )
    return Ensemble(out)


def bruenkf_update(
    ens: Ensemble, model: MeasurementModel, y, cfg: EnsembleUpdateConfig, rng
) -> tuple[Ensemble, EnsembleTrace]:
    """Recursive ensemble update over a fixed step schedule.

    Step i inflates by alpha^{c_i}, recomputes the ensemble mean and
    covariance, and updates every member with fresh observation
    perturbations and measurement covariance R / c_i. A uniform schedule
    with N = 1 reproduces ``enkf_update`` bitwise under the same generator.
    """
    if cfg.schedule.kind == "adaptive":
        raise ValueError("adaptive schedules are handled by ec_bruenkf_update")
    coeffs = cfg.schedule.coefficients
    chol_r = cholesky_lower(model.noise_cov)
    x = ens.members
    times, snapshots = [], []
    t = 0.0
    for i, c in enumerate(coeffs):
        try:
            x = _recursive_ensemble_step(
                x, model, y, c, cfg.inflation, rng, cfg.perturb_observations, chol_r
            )
        except NotPositiveDefiniteError as err:
            raise NotPositiveDefiniteError(f"step {i + 1}: {err}", pivot=err.pivot) from err
        t += c
        times.append(t)
        snapshots.append(x)
    trace = EnsembleTrace(times=times, snapshots=snapshots, accepted_steps=len(times))
    return Ensemble(x), trace


def ec_bruenkf_update(
    ens: Ensemble,
    model: MeasurementModel,
    y,
    ctrl: ErrorController,
    alpha: float,
    rng,
    perturb: bool = True,
) -> tuple[Ensemble, EnsembleTrace]:
    """Error-controlled recursive ensemble update.

    The pseudo-time controller is the single-state one applied to the whole
    ensemble: a trial step is one recursive ensemble step with inflation
    alpha^ds and noise R / ds; the embedded second stage relinearizes each
    member at its trial state, reusing the trial's observation
    perturbations so the estimate measures discretization error rather
    than sampling noise. Each member contributes the scaled RMS difference
    between its trial and midpoint states; the controlling error is the
    maximum over members.
    """
    if alpha < 1.0:
        raise ValueError(f"inflation must be >= 1, got {alpha}")
    chol_r = cholesky_lower(model.noise_cov)
    x = ens.members
    t_c = 0.0
    ds = 1.0 / ctrl.n0
    times, snapshots = [], []
    rejected = 0
    rejections_here = 0
    while t_c < 1.0 - _PSEUDO_TIME_TOL:
        if t_c + ds > 1.0:
            ds = 1.0 - t_c
        factor = alpha if ds == 1.0 else alpha**ds
        x_infl = _inflate_about_mean(x, factor)
        cov = empirical_cov(x_infl)
        gamma = _draw_perturbations(rng, chol_r, x_infl.shape[0], perturb)
        try:
            dx1 = _member_update(x_infl, cov, model, y, 1.0 / ds, gamma)
            x_trial = x_infl + dx1
            cov_trial = empirical_cov(x_trial)
            dx2 = _member_update(x_trial, cov_trial, model, y, 1.0 / ds, gamma)
        except NotPositiveDefiniteError as err:
            raise NotPositiveDefiniteError(
                f"at pseudo-time {t_c:.6g}: {err}", pivot=err.pivot
            ) from err
        x_mid = x_infl + 0.5 * (dx1 + dx2)
        scale = ctrl.atol + np.maximum(np.abs(x_trial), np.abs(x_mid)) * ctrl.rtol
        member_err = np.sqrt(np.mean(((x_trial - x_mid) / scale) ** 2, axis=1))
        err = float(member_err.max())
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
        x = x_trial
        times.append(min(t_c, 1.0))
        snapshots.append(x)
        ds = ds * _growth_factor(ctrl, err, cap=ctrl.f_max)
    trace = EnsembleTrace(
        times=times,
        snapshots=snapshots,
        accepted_steps=len(times),
        rejected_steps=rejected,
    )
    return Ensemble(x), trace


def _flow_inverse_many(p, jac, noise_cov, lam):
    """Batched (P^-1 + lam H_j^T R^-1 H_j)^-1 without forming P^-1.

    Uses the Woodbury identity P - P H^T (R/lam + H P H^T)^-1 H P, which
    reduces to P exactly at lam = 0 and only ever factorizes SPD matrices.
    """
    if lam == 0.0:
        return np.broadcast_to(p, (jac.shape[0],) + p.shape)
    pht = np.swapaxes(jac @ p, -1, -2)  # (M, n, m) since P symmetric
    s_w = jac @ pht + noise_cov / lam
    try:
        core = spd_solve_many(s_w, np.swapaxes(pht, -1, -2))  # (M, m, n)
    except NotPositiveDefiniteError as err:
        raise NotPositiveDefiniteError(
            f"flow covariance factorization failed at lambda={lam:.6g}",
            pivot=err.pivot,
        ) from err
    return p - pht @ core


def gromov_flow_update(
    ens: Ensemble,
    model: MeasurementModel,
    y,
    companion: GaussianBelief,
    cfg: GromovConfig,
    rng,
) -> tuple[Ensemble, GaussianBelief]:
    """Move particles along the prior-to-posterior homotopy, then resample.

    For lambda = 0, Delta, ..., 1 - Delta each particle takes a drift step
    -(P^-1 + lam H^T R^-1 H)^-1 H^T R^-1 (h(x) - y) * Delta plus diffusion
    B w with w ~ N(0, Delta I) and B B^T = Q(lambda), where P is the
    companion filter's prior covariance (held fixed across lambda) and H is
    evaluated at each particle. Afterwards the companion belief receives a
    standard EKF update at its own mean, and (optionally) all particles are
    redrawn from N(mean of moved particles, updated companion covariance).
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    p = companion.cov
    x = ens.members
    m_members, n = x.shape
    delta = 1.0 / cfg.n_steps
    r = model.noise_cov
    sqrt_delta = math.sqrt(delta)
    for step in range(cfg.n_steps):
        lam = step * delta
        jac = model.jacobian_many(x)  # (M, m, n)
        res = model.measure_many(x) - y  # (M, m)
        w_inv = _flow_inverse_many(p, jac, r, lam)  # (M, n, n)
        rinv_res = spd_solve(r, res.T).T  # (M, m)
        drift = -np.einsum("jnk,jk->jn", w_inv, np.einsum("jmn,jm->jn", jac, rinv_res))
        # Q(lambda) = W (H^T R^-1 H) W, assembled as (H W)^T R^-1 (H W)
        hw = jac @ w_inv  # (M, m, n)
        m_dim = r.shape[0]
        rinv_hw = (
            spd_solve(r, hw.transpose(1, 0, 2).reshape(m_dim, -1))
            .reshape(m_dim, m_members, n)
            .transpose(1, 0, 2)
        )
        q_lam = symmetrize(np.swapaxes(hw, -1, -2) @ rinv_hw)
        b = symmetric_sqrt(q_lam)
        w_noise = sqrt_delta * rng.standard_normal((m_members, n))
        x = x + drift * delta + np.einsum("jnk,jk->jn", b, w_noise)
    companion_post = kalman_update(companion, model, y)
    if cfg.resample_after_update:
        mean = x.mean(axis=0)
        chol_post = cholesky_lower(companion_post.cov)
        x = mean + rng.standard_normal((m_members, n)) @ chol_post.T
    return Ensemble(x), companion_post
