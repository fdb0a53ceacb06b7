"""Resolve configured filter specs into update callables."""

import numpy as np

from bruf.belief import Ensemble, GaussianBelief
from bruf.ensemble import (
    EnsembleUpdateConfig,
    GromovConfig,
    bruenkf_update,
    ec_bruenkf_update,
    enkf_update,
    gromov_flow_update,
)
from bruf.exceptions import ConfigError
from bruf.harness.config import FilterSpec
from bruf.recursive import (
    ErrorController,
    StepSchedule,
    bruf_update,
    ec_bruf_update,
    iekf_update,
    kalman_update,
)


def error_controller(spec: FilterSpec) -> ErrorController:
    kwargs = dict(atol=spec.atol, rtol=spec.rtol, n0=spec.n0)
    if spec.f is not None:
        kwargs["f"] = spec.f
    if spec.f_min is not None:
        kwargs["f_min"] = spec.f_min
    if spec.f_max is not None:
        kwargs["f_max"] = spec.f_max
    return ErrorController(**kwargs)


def single_state_updater(spec: FilterSpec):
    """(belief, model, y) -> (belief, trace or None) for one measurement."""
    kind = spec.kind
    if kind == "ekf":
        return lambda prior, model, y: (kalman_update(prior, model, y), None)
    if kind == "bruf":
        sched = StepSchedule.uniform(spec.n_steps)
        return lambda prior, model, y: bruf_update(prior, model, y, sched)
    if kind == "vs-bruf":
        sched = StepSchedule.variable(spec.n_steps)
        return lambda prior, model, y: bruf_update(prior, model, y, sched)
    if kind == "ec-bruf":
        ctrl = error_controller(spec)
        return lambda prior, model, y: ec_bruf_update(prior, model, y, ctrl)
    if kind == "iekf":
        return lambda prior, model, y: iekf_update(
            prior, model, y, max_iters=spec.max_iters, tol=spec.tol,
            line_search=spec.line_search,
        )
    raise ConfigError(f"{spec.name!r} ({kind}) is not a single-state filter")


def ensemble_updater(spec: FilterSpec):
    """(ensemble, model, y, rng) -> (ensemble, trace or None)."""
    kind = spec.kind
    if kind == "enkf":
        return lambda ens, model, y, rng: (
            enkf_update(ens, model, y, spec.alpha, rng),
            None,
        )
    if kind in ("bruenkf", "vs-bruenkf"):
        sched = (
            StepSchedule.uniform(spec.n_steps)
            if kind == "bruenkf"
            else StepSchedule.variable(spec.n_steps)
        )
        cfg = EnsembleUpdateConfig(schedule=sched, inflation=spec.alpha)
        return lambda ens, model, y, rng: bruenkf_update(ens, model, y, cfg, rng)
    if kind == "ec-bruenkf":
        ctrl = error_controller(spec)
        return lambda ens, model, y, rng: ec_bruenkf_update(
            ens, model, y, ctrl, spec.alpha, rng
        )
    raise ConfigError(f"{spec.name!r} ({kind}) is not a plain ensemble filter")


def gromov_config(spec: FilterSpec, state_dim: int, artificial_q: float = 0.1) -> GromovConfig:
    return GromovConfig(
        n_steps=spec.n_steps,
        companion_process_noise=artificial_q * np.eye(state_dim),
        resample_after_update=spec.resample,
    )
