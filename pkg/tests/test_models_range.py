import numpy as np
import pytest

from bruf.belief import finite_difference_jacobian
from bruf.exceptions import SingularPointError
from bruf.models.range_obs import RangeScenario, range_model
from bruf.rng import split_rng


def test_scenario_constants():
    scenario = RangeScenario()
    assert np.array_equal(scenario.prior.mean, [-3.0, 0.0])
    assert np.array_equal(scenario.prior.cov, [[1.0, 0.5], [0.5, 1.0]])
    assert scenario.noise_var == 0.01
    assert scenario.observed == 1.0


def test_range_345_triangle():
    model = range_model()
    assert model.h(np.array([3.0, 4.0])) == pytest.approx([5.0])


def test_range_jacobian_unit_direction():
    model = range_model()
    assert np.allclose(model.jacobian(np.array([3.0, 4.0])), [[0.6, 0.8]])


def test_range_origin_singular():
    model = range_model()
    with pytest.raises(SingularPointError):
        model.jacobian(np.zeros(2))
    with pytest.raises(SingularPointError):
        model.jacobian_many(np.zeros((3, 2)))


def test_range_jacobian_finite_difference_sweep():
    model = range_model()
    rng = split_rng(303, 0)
    for _ in range(100):
        x = rng.uniform(-5, 5, 2)
        if np.hypot(*x) < 0.1:
            continue
        analytic = model.jacobian(x)
        numeric = finite_difference_jacobian(model.h, x)
        assert np.allclose(analytic, numeric, rtol=1e-6, atol=1e-8)


def test_range_batch_paths_match():
    model = range_model()
    rng = split_rng(304, 0)
    states = rng.uniform(1.0, 4.0, size=(16, 2))
    loop_h = np.stack([model.h(s) for s in states])
    loop_j = np.stack([model.jacobian(s) for s in states])
    assert np.allclose(model.measure_many(states), loop_h)
    assert np.allclose(model.jacobian_many(states), loop_j)
