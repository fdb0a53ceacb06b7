"""Random linear sweeps checking recursive-update equivalence to one Kalman update."""

from dataclasses import dataclass

import numpy as np

from bruf.belief import GaussianBelief, MeasurementModel
from bruf.harness.emit import emit_plot_data
from bruf.recursive import StepSchedule, bruf_update, kalman_update
from bruf.rng import split_rng


@dataclass
class TheoremReport:
    rows: list  # (n, m, N, schedule_kind, cov_dev, state_dev)
    max_deviation: float
    tolerance: float
    worst_case: dict

    @property
    def passed(self) -> bool:
        return self.max_deviation < self.tolerance


def random_linear_problem(rng, max_n: int = 8, max_m: int = 6):
    """A random SPD-prior linear-measurement instance."""
    n = int(rng.integers(1, max_n + 1))
    m = int(rng.integers(1, max_m + 1))
    a = rng.standard_normal((n, n))
    prior = GaussianBelief(rng.standard_normal(n), a @ a.T + n * np.eye(n))
    h_mat = rng.standard_normal((m, n))
    b = rng.standard_normal((m, m))
    model = MeasurementModel(
        h=lambda x, H=h_mat: H @ x,
        jacobian=lambda x, H=h_mat: H.copy(),
        noise_cov=b @ b.T + m * np.eye(m),
    )
    y = rng.standard_normal(m)
    return prior, model, y


def run_theorem_check(config) -> TheoremReport:
    """Execute the uniform-N and generalized-schedule sweeps.

    Writes one CSV row per (instance, schedule); the report carries the
    worst relative deviation and the worst instance for replay.
    """
    params = config.theorem_params
    n_problems = int(params.get("n_problems", 500))
    n_schedules = int(params.get("n_schedules", 100))
    step_counts = params.get("step_counts", [1, 2, 3, 5, 10, 20])
    if isinstance(step_counts, (int, float)):
        step_counts = [int(step_counts)]
    tolerance = float(params.get("tolerance", 1e-10))
    negative_control = bool(params.get("negative_control", False))

    rows = []
    worst = {"deviation": -1.0}
    max_dev = 0.0

    def record(prior, model, y, schedule, label, trial):
        nonlocal max_dev, worst
        reference = kalman_update(prior, model, y)
        updated, _ = bruf_update(prior, model, y, schedule)
        cov_dev = float(
            np.linalg.norm(updated.cov - reference.cov)
            / np.linalg.norm(reference.cov)
        )
        state_dev = float(
            np.linalg.norm(updated.mean - reference.mean)
            / (1.0 + np.linalg.norm(reference.mean))
        )
        dev = max(cov_dev, state_dev)
        rows.append(
            (
                prior.dim,
                model.meas_dim,
                schedule.coefficients.size,
                label,
                cov_dev,
                state_dev,
            )
        )
        if dev > max_dev:
            max_dev = dev
            worst = {
                "deviation": dev,
                "trial": trial,
                "schedule": label,
                "prior_mean": prior.mean.tolist(),
                "prior_cov": prior.cov.tolist(),
                "jacobian": model.jacobian(prior.mean).tolist(),
                "noise_cov": model.noise_cov.tolist(),
                "measurement": np.atleast_1d(y).tolist(),
                "coefficients": schedule.coefficients.tolist(),
            }

    rng = split_rng(config.seed, 0, 0)
    for trial in range(n_problems):
        prior, model, y = random_linear_problem(rng)
        for n_steps in step_counts:
            record(prior, model, y, StepSchedule.uniform(int(n_steps)), "uniform", trial)

    rng = split_rng(config.seed, 0, 1)
    for trial in range(n_schedules):
        prior, model, y = random_linear_problem(rng)
        n_steps = int(rng.integers(2, 13))
        coeffs = rng.uniform(0.1, 1.0, n_steps)
        coeffs = coeffs / coeffs.sum()
        if negative_control:
            schedule = StepSchedule.custom(coeffs * 0.9, validate=False)
        else:
            schedule = StepSchedule.custom(coeffs)
        record(prior, model, y, schedule, "generalized", trial)

    return TheoremReport(
        rows=rows, max_deviation=max_dev, tolerance=tolerance, worst_case=worst
    )


def emit_theorem_artifacts(report: TheoremReport, config, output_dir: str) -> list:
    artifacts = {
        "theorem_deviations": (
            ("n", "m", "N", "schedule", "cov_rel_dev", "state_rel_dev"),
            report.rows,
        )
    }
    files = emit_plot_data(artifacts, output_dir, config)
    if not report.passed:
        import json
        import os

        path = os.path.join(output_dir, "worst_case.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(report.worst_case, fh, indent=2, sort_keys=True)
            fh.write("\n")
        files.append(path)
    return files
