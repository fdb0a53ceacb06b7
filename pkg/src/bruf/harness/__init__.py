"""Experiment harness: config parsing, scenario runners, CSV/manifest output."""

from bruf.harness.config import ExperimentConfig, FilterSpec, default_config, parse_config

__all__ = ["ExperimentConfig", "FilterSpec", "default_config", "parse_config"]
