"""Monte Carlo campaign for the radar tracking scenario.

Per run: simulate the constant-velocity truth, generate r-u-v measurements,
two-point initialize from the first two, then update each configured filter
from the third step on. Truth and measurements come from the run's stream
(seed, run, 0) so all filters see identical data within a run.
"""

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from bruf.belief import GaussianBelief
from bruf.exceptions import ConfigError
from bruf.harness import filters as filter_bank
from bruf.harness.emit import emit_plot_data
from bruf.linalg import symmetrize
from bruf.metrics import (
    RunRecord,
    metric_row,
    snees,
    time_avg_position_rmse,
)
from bruf.models.tracking import (
    TrackingScenario,
    ruv_model,
    simulate_tracking_truth,
    tracking_initialize,
)
from bruf.rng import split_rng

POSITION_INDICES = (0, 2, 4)


@dataclass
class TrackingResults:
    scenario: TrackingScenario
    records: dict  # filter name -> list[RunRecord]
    wall_times: dict  # filter name -> total seconds


def _scenario_from(config) -> TrackingScenario:
    params = config.scenario_params
    kwargs = {}
    for key in ("dt", "q_tilde", "sigma_r", "sigma_u", "sigma_v", "duration"):
        if key in params:
            kwargs[key] = params[key]
    return TrackingScenario(**kwargs)


def _single_run(args):
    config, scenario, run_idx = args
    model = ruv_model(scenario.sigma_r, scenario.sigma_u, scenario.sigma_v)
    f_mat = scenario.transition
    q_mat = scenario.process_noise
    chol_r = np.linalg.cholesky(model.noise_cov)

    truth_rng = split_rng(config.seed, run_idx, 0)
    truth = simulate_tracking_truth(scenario, truth_rng)
    clean = np.stack([model.h(truth[k]) for k in range(1, scenario.duration + 1)])
    measurements = clean + truth_rng.standard_normal((scenario.duration, 3)) @ chol_r.T

    out = {}
    for spec in config.filters:
        updater = filter_bank.single_state_updater(spec)
        belief = tracking_initialize(measurements[0], measurements[1], scenario)
        truths = [truth[2]]
        estimates = [belief.mean]
        covs = [belief.cov]
        start = time.perf_counter()
        diverged = False
        for k in range(3, scenario.duration + 1):
            if not diverged:
                x_pred = f_mat @ belief.mean
                p_pred = symmetrize(f_mat @ belief.cov @ f_mat.T + q_mat)
                try:
                    if not np.all(np.isfinite(x_pred)):
                        raise FloatingPointError("non-finite prediction")
                    belief, _ = updater(
                        GaussianBelief(x_pred, p_pred), model, measurements[k - 1]
                    )
                except Exception:
                    diverged = True
            truths.append(truth[k])
            if diverged:
                estimates.append(np.full(6, np.nan))
                covs.append(np.eye(6))
            else:
                estimates.append(belief.mean)
                covs.append(belief.cov)
        elapsed = time.perf_counter() - start
        out[spec.name] = (
            RunRecord(
                np.asarray(truths),
                np.asarray(estimates),
                np.asarray(covs),
                wall_time=elapsed,
            )
        )
    return run_idx, out


def run_tracking(config) -> TrackingResults:
    if not config.filters:
        raise ConfigError("tracking needs at least one [filter:...] section")
    for spec in config.filters:
        if spec.is_ensemble:
            raise ConfigError(f"filter {spec.name!r}: ensemble kinds do not run in tracking")
    scenario = _scenario_from(config)
    jobs = [(config, scenario, i) for i in range(config.n_runs)]
    if config.threads > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(_single_run, jobs))
    else:
        results = [_single_run(job) for job in jobs]
    results.sort(key=lambda item: item[0])

    records = {spec.name: [] for spec in config.filters}
    wall = {spec.name: 0.0 for spec in config.filters}
    for _, per_filter in results:
        for name, rec in per_filter.items():
            records[name].append(rec)
            wall[name] += rec.wall_time
    return TrackingResults(scenario=scenario, records=records, wall_times=wall)


def emit_tracking_artifacts(results: TrackingResults, config, output_dir: str) -> list:
    """Per-step RMSE and SNEES curves plus the summary table."""
    rmse_rows = []
    snees_rows = []
    table_rows = []
    for spec in config.filters:
        recs = results.records[spec.name]
        n_steps = recs[0].n_steps
        errs = np.stack(
            [rec.truth - rec.estimate for rec in recs]
        )  # (runs, K, 6)
        pos_sq = np.sum(errs[:, :, POSITION_INDICES] ** 2, axis=2)
        rmse_curve = np.sqrt(np.sort(pos_sq, axis=0).mean(axis=0))
        snees_curve = snees(recs, burn_in=0)
        for k in range(n_steps):
            step = k + 2  # records start at the two-point initialization step
            rmse_rows.append((spec.name, step, rmse_curve[k] / 1000.0))
            snees_rows.append((spec.name, step, snees_curve[k]))
        avg = time_avg_position_rmse(recs, POSITION_INDICES, config.burn_in) / 1000.0
        table_rows.append(
            metric_row(
                spec.name,
                "time_avg_position_rmse_km",
                avg,
                n_steps=spec.n_steps if spec.kind in ("bruf", "vs-bruf") else None,
                seed_base=config.seed,
            )
        )
        table_rows.append(
            metric_row(
                spec.name,
                "wall_time_s",
                results.wall_times[spec.name],
                seed_base=config.seed,
            )
        )
    artifacts = {
        "tracking_rmse_curve": (("filter", "step", "position_rmse_km"), rmse_rows),
        "tracking_snees_curve": (("filter", "step", "snees"), snees_rows),
        "tracking_summary": (
            ("filter", "N", "M", "gamma", "seed_base", "metric_name", "value"),
            table_rows,
        ),
    }
    return emit_plot_data(artifacts, output_dir, config)
