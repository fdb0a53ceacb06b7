import numpy as np
import pytest

from bruf.belief import finite_difference_jacobian
from bruf.exceptions import DimensionError, DivergenceError
from bruf.models.lorenz96 import (
    Lorenz96Scenario,
    l96_measurement_model,
    lorenz96_derivative,
    lorenz96_dynamics,
    lorenz96_jacobian,
    lorenz96_spinup,
    rk4_propagate,
)
from bruf.rng import split_rng


def test_uniform_forcing_is_fixed_point():
    x = np.full(40, 8.0)
    assert np.allclose(lorenz96_derivative(x, 8.0), 0.0)


def test_zero_state_gives_forcing():
    assert np.allclose(lorenz96_derivative(np.zeros(40), 8.0), 8.0)


def test_derivative_rejects_small_states():
    with pytest.raises(DimensionError):
        lorenz96_derivative(np.zeros(3), 8.0)


def test_cyclic_shift_equivariance():
    rng = split_rng(308, 0)
    for _ in range(100):
        x = rng.standard_normal(40) * 5
        shift = int(rng.integers(1, 40))
        lhs = lorenz96_derivative(np.roll(x, shift), 8.0)
        rhs = np.roll(lorenz96_derivative(x, 8.0), shift)
        assert np.allclose(lhs, rhs, atol=1e-12)


def test_derivative_batched_rows():
    rng = split_rng(309, 0)
    states = rng.standard_normal((5, 40))
    batched = lorenz96_derivative(states, 8.0)
    for k in range(5):
        assert np.allclose(batched[k], lorenz96_derivative(states[k], 8.0))


def test_jacobian_matches_finite_differences():
    rng = split_rng(310, 0)
    x = rng.standard_normal(40) * 3
    analytic = lorenz96_jacobian(x, 8.0)
    numeric = finite_difference_jacobian(lambda s: lorenz96_derivative(s, 8.0), x)
    assert np.allclose(analytic, numeric, rtol=1e-5, atol=1e-6)


def test_rk4_zero_derivative_is_identity():
    x = np.arange(6.0)
    out = rk4_propagate(x, 0.5, 4, lambda s: np.zeros_like(s))
    assert np.array_equal(out, x)


def test_rk4_exponential():
    out = rk4_propagate(np.array([1.0]), 1.0, 10, lambda s: s)
    assert out[0] == pytest.approx(np.e, abs=1e-5)


def test_rk4_order_four_on_lorenz():
    x0 = lorenz96_spinup(Lorenz96Scenario(), steps=20)
    deriv = lambda s: lorenz96_derivative(s, 8.0)
    reference = rk4_propagate(x0, 0.05, 1000, deriv)
    err_coarse = np.linalg.norm(rk4_propagate(x0, 0.05, 2, deriv) - reference)
    err_fine = np.linalg.norm(rk4_propagate(x0, 0.05, 4, deriv) - reference)
    ratio = err_coarse / err_fine
    assert 8.0 < ratio < 32.0  # fourth order: halving the step cuts ~16x


def test_rk4_divergence_error():
    with pytest.raises(DivergenceError) as info:
        rk4_propagate(np.array([1.0]), 10.0, 5, lambda s: s * s * 1e30)
    assert info.value.substep is not None


def test_measurement_gamma_one_is_identity_on_observed():
    scenario = Lorenz96Scenario(gamma=1.0)
    model = l96_measurement_model(scenario)
    rng = split_rng(311, 0)
    x = rng.standard_normal(40) * 5
    assert np.allclose(model.h(x), x[scenario.obs_indices], atol=1e-14)


def test_measurement_at_scale_point():
    scenario = Lorenz96Scenario(gamma=5.0)
    model = l96_measurement_model(scenario)
    x = np.full(40, 10.0)
    assert np.allclose(model.h(x), 10.0)  # (10/2) * [1 + 1] = 10


def test_measurement_observes_every_other_state():
    scenario = Lorenz96Scenario()
    assert scenario.meas_dim == 20
    # 1-based states 2, 4, ..., 40
    assert np.array_equal(scenario.obs_indices, np.arange(1, 40, 2))


def test_measurement_jacobian_finite_difference():
    scenario = Lorenz96Scenario(gamma=5.0)
    model = l96_measurement_model(scenario)
    rng = split_rng(312, 0)
    for _ in range(100):
        x = rng.standard_normal(40) * 4
        x[np.abs(x) < 1e-3] = 1e-3  # keep away from the |x| kink
        analytic = model.jacobian(x)
        numeric = finite_difference_jacobian(model.h, x)
        assert np.allclose(analytic, numeric, rtol=1e-5, atol=1e-7)


def test_measurement_batch_paths_match():
    scenario = Lorenz96Scenario()
    model = l96_measurement_model(scenario)
    rng = split_rng(313, 0)
    states = rng.standard_normal((7, 40)) * 3
    assert np.allclose(
        model.measure_many(states), np.stack([model.h(s) for s in states])
    )
    assert np.allclose(
        model.jacobian_many(states), np.stack([model.jacobian(s) for s in states])
    )


def test_measurement_shift_equivariance():
    # shifting the state by two slots and the observation pattern with it
    scenario = Lorenz96Scenario()
    model = l96_measurement_model(scenario)
    rng = split_rng(314, 0)
    x = rng.standard_normal(40) * 5
    shifted = np.roll(x, 2)
    assert np.allclose(model.h(shifted), np.roll(model.h(x), 1))


def test_spinup_is_on_attractor():
    scenario = Lorenz96Scenario()
    x0 = lorenz96_spinup(scenario)
    assert np.all(np.isfinite(x0))
    assert 2.0 < np.std(x0) < 6.0  # attractor climatology, not the fixed point
    # deterministic
    assert np.array_equal(x0, lorenz96_spinup(scenario))


def test_tangent_covariance_propagation_is_consistent():
    # P stays symmetric and tracks the empirical linearization growth
    scenario = Lorenz96Scenario()
    dyn = lorenz96_dynamics(scenario)
    x0 = lorenz96_spinup(scenario, steps=50)
    p0 = 0.01 * np.eye(40)
    x1, p1 = dyn.cov_propagator(x0, p0, scenario.dt_obs)
    assert np.allclose(x1, dyn.propagate(x0, scenario.dt_obs))
    assert np.array_equal(p1, p1.T)
    # compare against a particle approximation of the covariance map
    rng = split_rng(315, 0)
    members = x0 + rng.standard_normal((4000, 40)) * 0.1
    moved = rk4_propagate(
        members, scenario.dt_obs, scenario.substeps,
        lambda s: lorenz96_derivative(s, scenario.forcing),
    )
    emp = np.cov(moved.T)
    assert np.linalg.norm(p1 - emp) / np.linalg.norm(emp) < 0.15
