"""Equivalence of the recursive update to one Kalman update on linear problems."""

import numpy as np

from conftest import random_linear_setup

from bruf.recursive import StepSchedule, bruf_update, kalman_update
from bruf.rng import split_rng

STEP_COUNTS = (1, 2, 3, 5, 10, 20)


def test_covariance_and_state_equivalence_sweep():
    rng = split_rng(501, 0)
    worst_cov = worst_state = 0.0
    for _ in range(500):
        n = int(rng.integers(1, 9))
        m = int(rng.integers(1, 7))
        prior, model, y = random_linear_setup(rng, n, m)
        reference = kalman_update(prior, model, y)
        ref_cov_norm = np.linalg.norm(reference.cov)
        ref_state_norm = np.linalg.norm(reference.mean)
        for n_steps in STEP_COUNTS:
            updated, _ = bruf_update(prior, model, y, StepSchedule.uniform(n_steps))
            worst_cov = max(
                worst_cov,
                np.linalg.norm(updated.cov - reference.cov) / ref_cov_norm,
            )
            worst_state = max(
                worst_state,
                np.linalg.norm(updated.mean - reference.mean) / (1.0 + ref_state_norm),
            )
    assert worst_cov <= 1e-10
    assert worst_state <= 1e-10


def test_generalized_schedule_equivalence():
    rng = split_rng(502, 0)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 9))
        m = int(rng.integers(1, 7))
        prior, model, y = random_linear_setup(rng, n, m)
        reference = kalman_update(prior, model, y)
        n_steps = int(rng.integers(2, 13))
        coeffs = rng.uniform(0.1, 1.0, n_steps)
        schedule = StepSchedule.custom(coeffs / coeffs.sum())
        updated, _ = bruf_update(prior, model, y, schedule)
        worst = max(
            worst,
            np.linalg.norm(updated.cov - reference.cov) / np.linalg.norm(reference.cov),
            np.linalg.norm(updated.mean - reference.mean)
            / (1.0 + np.linalg.norm(reference.mean)),
        )
    assert worst <= 1e-10


def test_broken_schedule_breaks_equivalence():
    rng = split_rng(503, 0)
    prior, model, y = random_linear_setup(rng, 4, 3)
    reference = kalman_update(prior, model, y)
    coeffs = np.full(5, 0.2) * 0.9  # sums to 0.9
    broken = StepSchedule.custom(coeffs, validate=False)
    updated, _ = bruf_update(prior, model, y, broken)
    deviation = np.linalg.norm(updated.mean - reference.mean) / (
        1.0 + np.linalg.norm(reference.mean)
    )
    assert deviation > 1e-6
