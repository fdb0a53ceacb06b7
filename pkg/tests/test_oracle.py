import numpy as np
import pytest

from conftest import linear_model

from bruf.belief import GaussianBelief
from bruf.models.range_obs import RangeScenario, range_model
from bruf.oracle import grid_posterior, hdr_contains, hdr_mask, map_of
from bruf.recursive import kalman_update

# frozen reference values for the range scenario, computed by this oracle at
# resolution 800 over the default bounds and re-checked at 1600
RANGE_MAP = np.array([-0.965, 0.345])
RANGE_MEAN = np.array([-0.82318929, 0.33790058])
RANGE_COV = np.array([[0.08065113, 0.07201842], [0.07201842, 0.20195052]])


@pytest.fixture(scope="module")
def range_grid():
    scenario = RangeScenario()
    model = range_model(scenario.noise_var)
    return grid_posterior(scenario.prior, model, scenario.observed, resolution=800)


def test_mass_normalized(range_grid):
    assert abs(range_grid.total_mass - 1.0) <= 1e-6
    assert abs(float(np.sum(range_grid.density)) * range_grid.cell_area - 1.0) <= 1e-6


def test_conjugate_case_matches_closed_form(rng):
    prior = GaussianBelief([0.5, -0.3], [[1.0, 0.2], [0.2, 0.8]])
    model = linear_model(np.eye(2), 0.5 * np.eye(2))
    y = np.array([1.0, 0.5])
    posterior = kalman_update(prior, model, y)
    grid = grid_posterior(prior, model, y, bounds=((-5, 5), (-5, 5)), resolution=400)
    assert np.linalg.norm(grid.mean() - posterior.mean) < 1e-3
    assert np.linalg.norm(grid.cov() - posterior.cov) < 1e-3
    assert np.linalg.norm(map_of(grid) - posterior.mean) < 2.0 * (10.0 / 400)


def test_uninformative_measurement_returns_prior():
    scenario = RangeScenario()
    model = range_model(1e12)
    grid = grid_posterior(scenario.prior, model, scenario.observed, resolution=400)
    assert np.linalg.norm(grid.mean() - scenario.prior.mean) < 1e-3


def test_range_reference_values(range_grid):
    assert np.allclose(map_of(range_grid), RANGE_MAP, atol=1e-12)
    assert np.allclose(range_grid.mean(), RANGE_MEAN, atol=1e-6)
    assert np.allclose(range_grid.cov(), RANGE_COV, atol=1e-6)


def test_resolution_doubling_stability(range_grid):
    scenario = RangeScenario()
    model = range_model(scenario.noise_var)
    fine = grid_posterior(scenario.prior, model, scenario.observed, resolution=1600)
    coarse_cell = range_grid.x_centers[1] - range_grid.x_centers[0]
    movement = np.linalg.norm(map_of(fine) - map_of(range_grid))
    assert movement < 0.5 * coarse_cell
    assert np.linalg.norm(fine.mean() - range_grid.mean()) < 1e-3


def test_small_noise_no_underflow():
    scenario = RangeScenario()
    model = range_model(1e-6)
    with np.errstate(all="raise"):
        grid = grid_posterior(scenario.prior, model, scenario.observed, resolution=400)
    assert abs(grid.total_mass - 1.0) <= 1e-6


def test_map_tie_breaks_lowest_index():
    scenario = RangeScenario()
    model = range_model(scenario.noise_var)
    grid = grid_posterior(scenario.prior, model, scenario.observed, resolution=200)
    tied = grid.density.copy()
    peak = tied.max()
    tied[10, 20] = peak * 2
    tied[30, 5] = peak * 2
    from dataclasses import replace

    forced = replace(grid, density=tied)
    assert np.array_equal(
        map_of(forced), [grid.x_centers[10], grid.y_centers[20]]
    )


def test_hdr_mass_near_one_covers_support(range_grid):
    mask = hdr_mask(range_grid, 0.999999)
    covered = float(np.sum(range_grid.density[mask])) * range_grid.cell_area
    assert covered >= 0.999999


def test_hdr_isotropic_gaussian_one_sigma():
    prior = GaussianBelief([0.0, 0.0], np.eye(2))
    model = linear_model(np.eye(2), 1e12 * np.eye(2))
    grid = grid_posterior(prior, model, [0.0, 0.0], bounds=((-6, 6), (-6, 6)), resolution=600)
    mask = hdr_mask(grid, 1.0 - np.exp(-0.5))  # 2-D chi-square mass at 1 sigma
    xx, yy = np.meshgrid(grid.x_centers, grid.y_centers, indexing="ij")
    radii = np.hypot(xx, yy)
    assert abs(radii[mask].max() - 1.0) < 0.02


def test_hdr_contains(range_grid):
    mask = hdr_mask(range_grid, 0.99)
    inside = hdr_contains(range_grid, mask, RANGE_MAP)
    outside = hdr_contains(range_grid, mask, np.array([[50.0, 50.0], [-5.9, 3.9]]))
    assert inside.all()
    assert not outside.any()


def test_hdr_mask_rejects_bad_mass(range_grid):
    with pytest.raises(ValueError):
        hdr_mask(range_grid, 1.5)
