import numpy as np
import pytest

from bruf.belief import GaussianBelief, MeasurementModel


@pytest.fixture
def rng():
    return np.random.default_rng(20240810)


def linear_model(h_mat: np.ndarray, noise_cov: np.ndarray) -> MeasurementModel:
    h_mat = np.asarray(h_mat, dtype=float)
    return MeasurementModel(
        h=lambda x: h_mat @ x,
        jacobian=lambda x: h_mat.copy(),
        noise_cov=noise_cov,
        h_batch=lambda X: X @ h_mat.T,
        jacobian_batch=lambda X: np.broadcast_to(
            h_mat, (X.shape[0],) + h_mat.shape
        ).copy(),
    )


def scalar_fusion_case():
    """Prior N(0,1), identity measurement, R=1: posterior N(y/2, 1/2)."""
    prior = GaussianBelief([0.0], [[1.0]])
    model = linear_model(np.eye(1), np.eye(1))
    return prior, model


def random_spd(rng, n: int, boost: float = 1.0) -> np.ndarray:
    a = rng.standard_normal((n, n))
    return a @ a.T + boost * n * np.eye(n)


def random_linear_setup(rng, n: int, m: int):
    prior = GaussianBelief(rng.standard_normal(n), random_spd(rng, n))
    model = linear_model(rng.standard_normal((m, n)), random_spd(rng, m, 0.5))
    y = rng.standard_normal(m)
    return prior, model, y


def quadratic_model(rng, n: int, m: int, curvature: float = 0.1) -> MeasurementModel:
    """A smooth nonlinear measurement with analytic Jacobian for sweeps."""
    h_mat = rng.standard_normal((m, n))
    quad = rng.standard_normal((m, n)) * curvature
    noise = random_spd(rng, m, 0.5)

    def h(x):
        return h_mat @ x + quad @ (x * x)

    def jacobian(x):
        return h_mat + 2.0 * quad * x[None, :]

    return MeasurementModel(h=h, jacobian=jacobian, noise_cov=noise)
