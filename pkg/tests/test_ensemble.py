import numpy as np
import pytest

from conftest import linear_model, scalar_fusion_case

from bruf.belief import Ensemble, GaussianBelief, empirical_cov, empirical_mean
from bruf.ensemble import (
    EnsembleUpdateConfig,
    GromovConfig,
    bruenkf_update,
    ec_bruenkf_update,
    enkf_update,
    gromov_flow_update,
)
from bruf.linalg import symmetric_sqrt
from bruf.models.range_obs import RangeScenario, range_model
from bruf.oracle import grid_posterior, hdr_contains, hdr_mask
from bruf.recursive import ErrorController, StepSchedule, kalman_update
from bruf.rng import split_rng


class _ZeroDraws:
    """Generator stand-in producing zero noise (suppressed diffusion)."""

    def standard_normal(self, shape):
        return np.zeros(shape)


def _prior_ensemble(seed, size=200):
    scenario = RangeScenario()
    rng = split_rng(seed, 0, 1)
    chol = np.linalg.cholesky(scenario.prior.cov)
    members = scenario.prior.mean + rng.standard_normal((size, 2)) @ chol.T
    return scenario, Ensemble(members), rng


# --- linearized ensemble update --------------------------------------------

def test_enkf_large_ensemble_tracks_kalman_scalar():
    prior, model = scalar_fusion_case()
    rng = split_rng(318, 0)
    members = rng.standard_normal((10_000, 1))  # draws from the prior
    out = enkf_update(Ensemble(members), model, [2.0], 1.0, rng, perturb=False)
    kal = kalman_update(GaussianBelief([0.0], [[1.0]]), model, [2.0])
    assert abs(empirical_mean(out)[0] - kal.mean[0]) < 0.05


def test_enkf_zero_spread_members_unchanged():
    model = linear_model(np.eye(2), np.eye(2))
    members = np.tile([[1.0, -1.0]], (2, 1))
    rng = split_rng(319, 0)
    out = enkf_update(Ensemble(members), model, [5.0, 5.0], 1.0, rng)
    assert np.array_equal(out.members, members)  # zero covariance => zero gain


def test_enkf_range_members_far_from_mode():
    # our quantification of the qualitative claim that a single linearized
    # perturbed-observation update leaves most members off the likelihood
    # ring: under seed 0 fewer than half land within 0.3 of radius 1
    scenario, ens, rng = _prior_ensemble(0)
    model = range_model(scenario.noise_var)
    out = enkf_update(ens, model, scenario.observed, 1.0, rng)
    radii = np.hypot(out.members[:, 0], out.members[:, 1])
    assert np.mean(np.abs(radii - 1.0) < 0.3) < 0.5


def test_enkf_preserves_member_count():
    scenario, ens, rng = _prior_ensemble(1, size=37)
    model = range_model(scenario.noise_var)
    out = enkf_update(ens, model, scenario.observed, 1.06, rng)
    assert out.size == 37


# --- recursive ensemble update ----------------------------------------------

def test_bruenkf_single_step_equals_enkf_bitwise():
    scenario, ens, _ = _prior_ensemble(5)
    model = range_model(scenario.noise_var)
    a = enkf_update(ens, model, scenario.observed, 1.06, split_rng(5, 1, 1))
    cfg = EnsembleUpdateConfig(schedule=StepSchedule.uniform(1), inflation=1.06)
    b, trace = bruenkf_update(ens, model, scenario.observed, cfg, split_rng(5, 1, 1))
    assert np.array_equal(a.members, b.members)
    assert trace.accepted_steps == 1


def test_bruenkf_single_step_matches_kalman_of_empirical_prior():
    # with perturbations off, inflation 1, and a linear map, one recursive
    # step is exactly the Kalman update of the empirical moments
    model = linear_model(np.array([[1.0, 0.0]]), np.eye(1))
    rng = split_rng(320, 0)
    members = rng.standard_normal((50, 2)) @ np.array([[1.0, 0.3], [0.0, 0.7]])
    ens = Ensemble(members)
    empirical = GaussianBelief(empirical_mean(ens), empirical_cov(ens))
    kal = kalman_update(empirical, model, [1.0])
    for schedule in (StepSchedule.uniform(1), StepSchedule.variable(1)):
        cfg = EnsembleUpdateConfig(
            schedule=schedule, inflation=1.0, perturb_observations=False
        )
        out, _ = bruenkf_update(ens, model, [1.0], cfg, split_rng(321, 0, 1))
        assert np.allclose(
            empirical_mean(out), kal.mean, rtol=1e-9, atol=1e-12
        )


def test_bruenkf_scalar_large_ensemble_single_step():
    prior, model = scalar_fusion_case()
    rng = split_rng(322, 0)
    members = rng.standard_normal((10_000, 1))
    cfg = EnsembleUpdateConfig(
        schedule=StepSchedule.uniform(1), inflation=1.0, perturb_observations=False
    )
    out, _ = bruenkf_update(Ensemble(members), model, [2.0], cfg, rng)
    assert abs(empirical_mean(out)[0] - 1.0) < 0.05


def test_bruenkf_range_settles_on_posterior_crescent():
    scenario, ens, rng = _prior_ensemble(42)
    model = range_model(scenario.noise_var)
    cfg = EnsembleUpdateConfig(schedule=StepSchedule.uniform(25), inflation=1.0)
    out, trace = bruenkf_update(ens, model, scenario.observed, cfg, rng)
    radii = np.hypot(out.members[:, 0], out.members[:, 1])
    near_ring = np.abs(radii - 1.0) < 0.3
    grid = grid_posterior(scenario.prior, model, scenario.observed, resolution=800)
    inside = hdr_contains(grid, hdr_mask(grid, 0.99), out.members)
    assert np.mean(near_ring & inside) >= 0.9
    assert trace.accepted_steps == 25
    assert trace.times[-1] == pytest.approx(1.0, abs=1e-12)


def test_vs_bruenkf_range_settles_too():
    scenario, ens, rng = _prior_ensemble(43)
    model = range_model(scenario.noise_var)
    cfg = EnsembleUpdateConfig(schedule=StepSchedule.variable(25), inflation=1.0)
    out, _ = bruenkf_update(ens, model, scenario.observed, cfg, rng)
    radii = np.hypot(out.members[:, 0], out.members[:, 1])
    assert np.mean(np.abs(radii - 1.0) < 0.3) >= 0.9


def test_inflation_telescopes_across_schedule():
    for schedule in (StepSchedule.uniform(25), StepSchedule.variable(13)):
        alpha = 1.06
        total = np.prod(alpha ** schedule.coefficients)
        assert total == pytest.approx(alpha, rel=1e-12)


def test_member_count_preserved_all_variants():
    scenario, ens, _ = _prior_ensemble(7, size=23)
    model = range_model(scenario.noise_var)
    cfg = EnsembleUpdateConfig(schedule=StepSchedule.uniform(5), inflation=1.02)
    out1, _ = bruenkf_update(ens, model, scenario.observed, cfg, split_rng(7, 0, 2))
    ctrl = ErrorController(atol=0.1, rtol=0.1, n0=5)
    out2, _ = ec_bruenkf_update(
        ens, model, scenario.observed, ctrl, 1.02, split_rng(7, 0, 3)
    )
    assert out1.size == out2.size == 23


# --- error-controlled ensemble update ---------------------------------------

def test_ec_bruenkf_linear_single_full_step_matches_kalman():
    model = linear_model(np.array([[1.0, 0.0]]), np.eye(1))
    rng = split_rng(323, 0)
    members = rng.standard_normal((60, 2)) @ np.array([[1.0, 0.2], [0.0, 0.5]])
    ens = Ensemble(members)
    empirical = GaussianBelief(empirical_mean(ens), empirical_cov(ens))
    kal = kalman_update(empirical, model, [1.0])
    # tolerances loose enough that the first full-interval trial is accepted
    ctrl = ErrorController(atol=100.0, rtol=100.0, n0=1)
    out, trace = ec_bruenkf_update(
        ens, model, [1.0], ctrl, 1.0, split_rng(323, 0, 1), perturb=False
    )
    assert trace.accepted_steps == 1
    assert trace.rejected_steps == 0
    assert np.allclose(empirical_mean(out), kal.mean, rtol=1e-9, atol=1e-12)


def test_ec_bruenkf_zero_error_grows_by_f_max():
    model = linear_model(np.zeros((1, 2)), np.eye(1))  # H = 0: stages agree
    rng = split_rng(324, 0)
    members = rng.standard_normal((10, 2))
    ctrl = ErrorController(atol=1.0, rtol=1.0, n0=100, f_max=6.0)
    _, trace = ec_bruenkf_update(
        Ensemble(members), model, [0.0], ctrl, 1.0, split_rng(324, 0, 1)
    )
    steps = np.diff(np.concatenate([[0.0], np.asarray(trace.times)]))
    assert trace.rejected_steps == 0
    assert steps[1] == pytest.approx(6.0 * steps[0])


def test_ec_bruenkf_range_iteration_count_matches_report():
    # tight tolerances on the range example: about 3970 accepted iterations
    scenario, ens, _ = _prior_ensemble(42)
    model = range_model(scenario.noise_var)
    ctrl = ErrorController(atol=1e-6, rtol=1e-6, n0=25)
    _, trace = ec_bruenkf_update(
        ens, model, scenario.observed, ctrl, 1.0, split_rng(42, 0, 5)
    )
    assert 0.75 * 3970 <= trace.accepted_steps <= 1.25 * 3970


def test_ec_bruenkf_trace_times_end_at_one():
    scenario, ens, _ = _prior_ensemble(8, size=40)
    model = range_model(scenario.noise_var)
    ctrl = ErrorController(atol=0.05, rtol=0.05, n0=10)
    _, trace = ec_bruenkf_update(
        ens, model, scenario.observed, ctrl, 1.0, split_rng(8, 0, 2)
    )
    assert trace.times[-1] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(trace.times) > 0)


# --- particle flow -----------------------------------------------------------

def test_gromov_linear_flow_matches_kalman_map_particle_wise():
    # scalar linear case: the homotopy endpoint applies the Kalman update
    # map to each particle; with suppressed diffusion and 512 steps the
    # discretization error stays below 1e-3 for |x0 - y| <= 1.5
    model = linear_model(np.eye(1), np.eye(1))
    members = np.linspace(-0.5, 1.5, 16)[:, None]
    companion = GaussianBelief([0.0], [[1.0]])
    y = np.array([1.0])
    cfg = GromovConfig(n_steps=512, resample_after_update=False)
    out, post = gromov_flow_update(
        Ensemble(members), model, y, companion, cfg, _ZeroDraws()
    )
    kalman_map = members + 0.5 * (y - members)
    assert np.max(np.abs(out.members - kalman_map)) < 1e-3

    # independent oracle: tiny-step explicit integration of the same flow
    def reference(x0, n_steps=2**15):
        x = float(x0)
        delta = 1.0 / n_steps
        for k in range(n_steps):
            lam = k * delta
            x -= delta * (x - 1.0) / (1.0 + lam)
        return x

    refs = np.array([reference(x) for x in members.ravel()])
    assert np.max(np.abs(out.members.ravel() - refs)) < 1e-3
    assert np.allclose(post.mean, kalman_update(companion, model, y).mean)


def test_gromov_drift_at_lambda_zero():
    # at the start of the flow the bracket collapses to the companion cov
    from bruf.ensemble import _flow_inverse_many

    rng = split_rng(325, 0)
    p = np.array([[2.0, 0.3], [0.3, 1.0]])
    jac = rng.standard_normal((4, 1, 2))
    w = _flow_inverse_many(p, jac, np.eye(1), 0.0)
    assert np.allclose(w, np.broadcast_to(p, (4, 2, 2)))


def test_gromov_flow_q_matrix_psd(rng):
    for _ in range(25):
        n, m = 3, 2
        a = rng.standard_normal((n, n))
        p = a @ a.T + n * np.eye(n)
        h_jac = rng.standard_normal((m, n))
        b = rng.standard_normal((m, m))
        r = b @ b.T + m * np.eye(m)
        for lam in rng.uniform(0.0, 1.0, 4):
            bracket = np.linalg.inv(np.linalg.inv(p) + lam * h_jac.T @ np.linalg.inv(r) @ h_jac)
            q = bracket @ h_jac.T @ np.linalg.inv(r) @ h_jac @ bracket
            q = 0.5 * (q + q.T)
            assert np.linalg.eigvalsh(q)[0] >= -1e-10 * np.trace(q) / n
            symmetric_sqrt(q)  # factorization succeeds


def test_gromov_resampling_draws_from_companion():
    scenario, ens, _ = _prior_ensemble(12, size=400)
    model = range_model(scenario.noise_var)
    cfg = GromovConfig(n_steps=25, resample_after_update=True)
    out, post = gromov_flow_update(
        Ensemble(ens.members), model, scenario.observed, scenario.prior, cfg,
        split_rng(12, 0, 2),
    )
    assert out.size == 400
    # resampled spread matches the companion posterior scale
    emp = empirical_cov(out)
    assert np.all(np.diag(emp) < 4.0 * np.diag(post.cov) + 1e-6)
