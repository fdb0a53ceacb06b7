"""Monte Carlo sweeps for the Lorenz '96 scenario.

Sweeps ensemble size and/or measurement nonlinearity; each (filter, M,
gamma, run) cell assimilates 350 observation cycles and reduces to a
time-averaged RMSE after burn-in. Diverged runs poison their cell to +inf
rather than being dropped.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from bruf.belief import Ensemble, GaussianBelief
from bruf.exceptions import ConfigError
from bruf.harness import filters as filter_bank
from bruf.harness.emit import emit_plot_data
from bruf.linalg import symmetrize
from bruf.metrics import RunRecord, metric_row, time_avg_rmse
from bruf.models.lorenz96 import (
    Lorenz96Scenario,
    l96_measurement_model,
    lorenz96_derivative,
    lorenz96_dynamics,
    lorenz96_spinup,
    rk4_propagate,
)
from bruf.ensemble import gromov_flow_update
from bruf.rng import split_rng

ARTIFICIAL_COMPANION_NOISE = 0.1


@dataclass
class LorenzResults:
    scenario_base: Lorenz96Scenario
    # rows: (filter, M, gamma, run, rmse)
    per_run: list
    # mean over runs: {(filter, M, gamma): rmse}
    mean_rmse: dict
    all_diverged: list  # (filter, M, gamma) cells where every run diverged


def _scenario_from(config, gamma) -> Lorenz96Scenario:
    params = config.scenario_params
    kwargs = {"gamma": float(gamma)}
    for key in ("n", "forcing", "meas_scale", "dt_obs", "substeps", "n_cycles"):
        if key in params:
            kwargs[key] = params[key]
    if config.burn_in:
        kwargs["burn_in"] = config.burn_in
    return Lorenz96Scenario(**kwargs)


def _simulate(scenario, initial_state, seed, run_idx):
    """Truth trajectory and noisy measurements from stream (seed, run, 0)."""
    model = l96_measurement_model(scenario)
    rng = split_rng(seed, run_idx, 0)
    truth = np.empty((scenario.n_cycles + 1, scenario.n))
    truth[0] = initial_state
    for k in range(scenario.n_cycles):
        truth[k + 1] = rk4_propagate(
            truth[k],
            scenario.dt_obs,
            scenario.substeps,
            lambda s: lorenz96_derivative(s, scenario.forcing),
        )
    noise = rng.standard_normal((scenario.n_cycles, scenario.meas_dim))
    measurements = model.measure_many(truth[1:]) + noise
    return truth, measurements


def _assimilate(scenario, spec, truth, measurements, initial_state, rng):
    """One filter over the whole window; returns the RMSE after burn-in."""
    model = l96_measurement_model(scenario)
    dyn = lorenz96_dynamics(scenario)
    members = initial_state + rng.standard_normal((spec.ensemble_size, scenario.n))
    is_gromov = spec.kind == "gromov"
    if is_gromov:
        gconfig = filter_bank.gromov_config(spec, scenario.n, ARTIFICIAL_COMPANION_NOISE)
        companion_mean = members.mean(axis=0)
        companion_cov = np.eye(scenario.n)
    else:
        updater = filter_bank.ensemble_updater(spec)

    def deriv(s):
        return lorenz96_derivative(s, scenario.forcing)

    truths, estimates = [], []
    for k in range(scenario.n_cycles):
        members = rk4_propagate(members, scenario.dt_obs, scenario.substeps, deriv)
        if is_gromov:
            companion_mean, companion_cov = dyn.cov_propagator(
                companion_mean, companion_cov, scenario.dt_obs
            )
            companion_cov = symmetrize(companion_cov) + gconfig.companion_process_noise
            ens, companion = gromov_flow_update(
                Ensemble(members),
                model,
                measurements[k],
                GaussianBelief(companion_mean, companion_cov),
                gconfig,
                rng,
            )
            companion_mean, companion_cov = companion.mean, companion.cov
        else:
            ens, _ = updater(Ensemble(members), model, measurements[k], rng)
        members = ens.members
        truths.append(truth[k + 1])
        estimates.append(members.mean(axis=0))
    record = RunRecord(np.asarray(truths), np.asarray(estimates))
    return time_avg_rmse([record], burn_in=scenario.burn_in)


def _one_cell(args):
    config, gamma, filter_idx, spec, ensemble_size, run_idx, initial_state = args
    scenario = _scenario_from(config, gamma)
    truth, measurements = _simulate(scenario, initial_state, config.seed, run_idx)
    rng = split_rng(config.seed, run_idx, filter_idx)
    sized = _with_size(spec, ensemble_size)
    try:
        rmse = _assimilate(scenario, sized, truth, measurements, initial_state, rng)
    except Exception:
        rmse = math.inf
    return (spec.name, ensemble_size, gamma, run_idx, rmse)


def _with_size(spec, ensemble_size):
    if spec.ensemble_size == ensemble_size:
        return spec
    from dataclasses import replace

    return replace(spec, ensemble_size=ensemble_size)


def run_lorenz96(config) -> LorenzResults:
    if not config.filters:
        raise ConfigError("lorenz96 needs at least one [filter:...] section")
    for spec in config.filters:
        if not spec.is_ensemble:
            raise ConfigError(
                f"filter {spec.name!r}: single-state kinds do not run in lorenz96"
            )
    params = config.scenario_params
    m_list = params.get("m_list", [spec.ensemble_size for spec in config.filters][:1])
    if isinstance(m_list, (int, float)):
        m_list = [int(m_list)]
    gamma_list = params.get("gamma_list", [params.get("gamma", 5)])
    if isinstance(gamma_list, (int, float)):
        gamma_list = [gamma_list]
    if not m_list or not gamma_list:
        raise ConfigError("m_list and gamma lists must be nonempty")

    spinup_cache = {}
    jobs = []
    for gamma in gamma_list:
        scenario = _scenario_from(config, gamma)
        key = (scenario.n, scenario.forcing, scenario.dt_obs, scenario.substeps)
        if key not in spinup_cache:
            spinup_cache[key] = lorenz96_spinup(scenario)
        initial = spinup_cache[key]
        for filter_idx, spec in enumerate(config.filters, start=1):
            for m_size in m_list:
                for run_idx in range(config.n_runs):
                    jobs.append(
                        (config, gamma, filter_idx, spec, int(m_size), run_idx, initial)
                    )

    if config.threads > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            rows = list(pool.map(_one_cell, jobs, chunksize=1))
    else:
        rows = [_one_cell(job) for job in jobs]
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))

    mean_rmse = {}
    all_diverged = []
    for name, m_size, gamma, _run, _ in rows:
        mean_rmse.setdefault((name, m_size, gamma), [])
    for name, m_size, gamma, _run, rmse in rows:
        mean_rmse[(name, m_size, gamma)].append(rmse)
    means = {}
    for key, vals in mean_rmse.items():
        arr = np.asarray(vals)
        if np.all(np.isinf(arr)):
            all_diverged.append(key)
        finite_mean = float(np.sum(np.sort(arr)) / arr.size) if np.all(np.isfinite(arr)) else math.inf
        means[key] = finite_mean
    scenario0 = _scenario_from(config, gamma_list[0])
    return LorenzResults(
        scenario_base=scenario0,
        per_run=rows,
        mean_rmse=means,
        all_diverged=all_diverged,
    )


def minimal_converging_m(results: LorenzResults, filter_name: str, gamma, threshold: float = 1.0):
    """Smallest swept M whose mean RMSE is below ``threshold`` (None if none)."""
    sizes = sorted(
        m for (name, m, g) in results.mean_rmse if name == filter_name and g == gamma
    )
    for m_size in sizes:
        if results.mean_rmse[(filter_name, m_size, gamma)] < threshold:
            return m_size
    return None


def emit_lorenz_artifacts(results: LorenzResults, config, output_dir: str) -> list:
    per_run_rows = [
        (name, m, gamma, run, rmse) for (name, m, gamma, run, rmse) in results.per_run
    ]
    mean_rows = []
    for (name, m, gamma), rmse in sorted(results.mean_rmse.items()):
        spec = next(s for s in config.filters if s.name == name)
        mean_rows.append(
            metric_row(
                name,
                "time_avg_rmse",
                rmse,
                n_steps=spec.n_steps if spec.kind != "enkf" else None,
                ensemble_size=m,
                gamma=gamma,
                seed_base=config.seed,
            )
        )
    artifacts = {
        "lorenz96_rmse_runs": (
            ("filter", "M", "gamma", "run", "time_avg_rmse"),
            per_run_rows,
        ),
        "lorenz96_rmse_mean": (
            ("filter", "N", "M", "gamma", "seed_base", "metric_name", "value"),
            mean_rows,
        ),
    }
    return emit_plot_data(artifacts, output_dir, config)
