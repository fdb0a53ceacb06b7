"""Monte Carlo error metrics: per-step SNEES and time-averaged RMSE.

All reductions over Monte Carlo runs sort the per-run values before
summing, so every metric is bitwise permutation-invariant in the run order.
Runs containing non-finite estimates poison their metric to +inf rather
than being dropped silently.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from bruf.exceptions import DimensionError, NotPositiveDefiniteError
from bruf.linalg import spd_solve


@dataclass(frozen=True)
class RunRecord:
    """Truth, estimate, and covariance trajectories of one filter run."""

    truth: np.ndarray  # (K, n)
    estimate: np.ndarray  # (K, n)
    cov: Optional[np.ndarray] = None  # (K, n, n)
    wall_time: Optional[float] = None

    def __post_init__(self):
        truth = np.asarray(self.truth, dtype=float)
        estimate = np.asarray(self.estimate, dtype=float)
        if truth.shape != estimate.shape or truth.ndim != 2:
            raise DimensionError(
                f"truth {truth.shape} and estimate {estimate.shape} must be equal (K, n) arrays"
            )
        if self.cov is not None:
            cov = np.asarray(self.cov, dtype=float)
            if cov.shape != (truth.shape[0], truth.shape[1], truth.shape[1]):
                raise DimensionError(f"cov shape {cov.shape} does not match states")
            object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "truth", truth)
        object.__setattr__(self, "estimate", estimate)

    @property
    def n_steps(self) -> int:
        return self.truth.shape[0]

    @property
    def dim(self) -> int:
        return self.truth.shape[1]


def _check_aligned(records: Sequence[RunRecord]):
    if not records:
        raise DimensionError("no runs provided")
    k, n = records[0].n_steps, records[0].dim
    for rec in records:
        if rec.n_steps != k or rec.dim != n:
            raise DimensionError("runs must share length and state dimension")
    return k, n


def _ordered_mean(values: np.ndarray) -> float:
    """Mean with a canonical summation order (permutation-invariant)."""
    return float(np.sum(np.sort(values)) / values.size)


def snees(records: Sequence[RunRecord], burn_in: int = 0) -> np.ndarray:
    """State-normalized estimation error squared per time step.

    (1/n_m) sum_i epsilon^T P^-1 epsilon / n, averaged across runs, for
    steps from ``burn_in`` onward. Steps where any run's covariance cannot
    be factorized are excluded (returned as NaN) with a warning.
    """
    k, n = _check_aligned(records)
    for rec in records:
        if rec.cov is None:
            raise DimensionError("SNEES needs covariance trajectories")
    out = np.empty(k - burn_in)
    excluded = 0
    for idx, step in enumerate(range(burn_in, k)):
        vals = np.empty(len(records))
        ok = True
        for r, rec in enumerate(records):
            eps = rec.truth[step] - rec.estimate[step]
            if not np.all(np.isfinite(eps)):
                vals[r] = math.inf
                continue
            try:
                vals[r] = float(eps @ spd_solve(rec.cov[step], eps)) / n
            except NotPositiveDefiniteError:
                ok = False
                break
        if not ok:
            out[idx] = math.nan
            excluded += 1
        else:
            out[idx] = _ordered_mean(vals)
    if excluded:
        warnings.warn(
            f"SNEES excluded {excluded} steps with singular covariance", stacklevel=2
        )
    return out


def _per_step_mean_sq(records, indices, burn_in):
    """Cross-run mean of squared error norms per step, +inf on divergence."""
    k, _ = _check_aligned(records)
    steps = range(burn_in, k)
    out = np.empty(k - burn_in)
    for idx, step in enumerate(steps):
        vals = np.empty(len(records))
        for r, rec in enumerate(records):
            err = rec.truth[step][indices] - rec.estimate[step][indices]
            vals[r] = float(err @ err) if np.all(np.isfinite(err)) else math.inf
        out[idx] = _ordered_mean(vals) if np.all(np.isfinite(vals)) else math.inf
    return out


def time_avg_position_rmse(
    records: Sequence[RunRecord], position_indices, burn_in: int = 0
) -> float:
    """Time average of the per-step cross-run RMS position error norm.

    (1/n_t) sum_k sqrt((1/n_m) sum_i ||eps_p(k)||^2) over counted steps.
    """
    indices = np.asarray(position_indices, dtype=int)
    mean_sq = _per_step_mean_sq(records, indices, burn_in)
    if not np.all(np.isfinite(mean_sq)):
        return math.inf
    return float(np.mean(np.sqrt(mean_sq)))


def time_avg_rmse(records: Sequence[RunRecord], burn_in: int = 0) -> float:
    """Full-state time-averaged RMSE, normalized per component.

    Same structure as the position metric with the squared norm divided by
    the state dimension before the root (RMS over components).
    """
    _, n = _check_aligned(records)
    indices = np.arange(n)
    mean_sq = _per_step_mean_sq(records, indices, burn_in)
    if not np.all(np.isfinite(mean_sq)):
        return math.inf
    return float(np.mean(np.sqrt(mean_sq / n)))


METRIC_COLUMNS = ("filter", "N", "M", "gamma", "seed_base", "metric_name", "value")


def metric_row(
    filter_name: str,
    metric_name: str,
    value: float,
    n_steps=None,
    ensemble_size=None,
    gamma=None,
    seed_base=None,
) -> dict:
    """One tidy output row; unused sweep parameters are left empty."""
    return {
        "filter": filter_name,
        "N": "" if n_steps is None else n_steps,
        "M": "" if ensemble_size is None else ensemble_size,
        "gamma": "" if gamma is None else gamma,
        "seed_base": "" if seed_base is None else seed_base,
        "metric_name": metric_name,
        "value": value,
    }
