"""Experiment configuration: flat key = value sections, one per filter.

The file format is INI-style: an ``[experiment]`` section with campaign
settings, an optional ``[scenario]`` section with model overrides, an
optional ``[theorem]`` section for the theorem-check subcommand, and one
``[filter:NAME]`` section per configured filter. Keys are case-sensitive.
Example::

    [experiment]
    scenario = tracking
    n_runs = 100
    seed = 20240810
    output_dir = out

    [filter:vs-bruf-25]
    kind = vs-bruf
    n_steps = 25
"""

import configparser
import hashlib
from dataclasses import dataclass, field
from typing import Optional

from bruf.exceptions import ConfigError

SCENARIOS = ("theorem-check", "range-demo", "tracking", "lorenz96")

FILTER_KINDS = (
    "ekf",
    "iekf",
    "bruf",
    "vs-bruf",
    "ec-bruf",
    "enkf",
    "bruenkf",
    "vs-bruenkf",
    "ec-bruenkf",
    "gromov",
)

_SINGLE_STATE_KINDS = ("ekf", "iekf", "bruf", "vs-bruf", "ec-bruf")
_ENSEMBLE_KINDS = ("enkf", "bruenkf", "vs-bruenkf", "ec-bruenkf", "gromov")


@dataclass(frozen=True)
class FilterSpec:
    """One configured filter: a kind plus its free parameters."""

    name: str
    kind: str
    n_steps: int = 25
    atol: float = 1e-3
    rtol: float = 1e-3
    f: Optional[float] = None
    f_min: Optional[float] = None
    f_max: Optional[float] = None
    n0: int = 25
    alpha: float = 1.0
    ensemble_size: int = 200
    max_iters: int = 25
    tol: float = 1e-9
    line_search: bool = False
    resample: bool = True

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise ConfigError(f"unknown filter kind {self.kind!r}")

    @property
    def is_ensemble(self) -> bool:
        return self.kind in _ENSEMBLE_KINDS


@dataclass
class ExperimentConfig:
    """A parsed experiment: scenario, filters, seeds, and overrides."""

    scenario: str
    filters: list
    n_runs: int = 10
    seed: int = 20240810
    burn_in: int = 0
    output_dir: str = "out"
    threads: int = 1
    scenario_params: dict = field(default_factory=dict)
    theorem_params: dict = field(default_factory=dict)
    source_text: str = ""

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(
                f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}"
            )
        if self.n_runs < 1:
            raise ConfigError("n_runs must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        names = [f.name for f in self.filters]
        if len(set(names)) != len(names):
            raise ConfigError("filter names must be unique")

    def config_hash(self) -> str:
        """Stable digest of the canonicalized configuration."""
        canon = [f"scenario={self.scenario}", f"n_runs={self.n_runs}",
                 f"seed={self.seed}", f"burn_in={self.burn_in}"]
        for key in sorted(self.scenario_params):
            canon.append(f"scenario.{key}={self.scenario_params[key]!r}")
        for key in sorted(self.theorem_params):
            canon.append(f"theorem.{key}={self.theorem_params[key]!r}")
        for spec in self.filters:
            canon.append(repr(spec))
        return hashlib.sha256("\n".join(canon).encode()).hexdigest()


_BOOL_VALUES = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def _coerce(raw: str):
    text = raw.strip()
    low = text.lower()
    if low in _BOOL_VALUES:
        return _BOOL_VALUES[low]
    if "," in text:
        return [_coerce(part) for part in text.split(",") if part.strip()]
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def _filter_spec(name: str, items: dict) -> FilterSpec:
    if "kind" not in items:
        raise ConfigError(f"filter {name!r} is missing 'kind'")
    known = {f.name for f in FilterSpec.__dataclass_fields__.values()}
    kwargs = {}
    for key, raw in items.items():
        if key not in known:
            raise ConfigError(f"filter {name!r}: unknown key {key!r}")
        kwargs[key] = _coerce(raw) if key != "kind" else raw.strip()
    return FilterSpec(name=name, **kwargs)


def parse_config_text(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as err:
        raise ConfigError(f"cannot parse config: {err}") from err
    if "experiment" not in parser:
        raise ConfigError("config must contain an [experiment] section")
    exp = dict(parser["experiment"])
    if "scenario" not in exp:
        raise ConfigError("[experiment] must set 'scenario'")

    filters = []
    for section in parser.sections():
        if section.startswith("filter:"):
            name = section.split(":", 1)[1].strip()
            if not name:
                raise ConfigError("filter section needs a name: [filter:NAME]")
            filters.append(_filter_spec(name, dict(parser[section])))

    try:
        cfg = ExperimentConfig(
            scenario=exp["scenario"].strip(),
            filters=filters,
            n_runs=int(exp.get("n_runs", 10)),
            seed=int(exp.get("seed", 20240810)),
            burn_in=int(exp.get("burn_in", 0)),
            output_dir=exp.get("output_dir", "out").strip(),
            threads=int(exp.get("threads", 1)),
            scenario_params={k: _coerce(v) for k, v in parser.items("scenario")}
            if "scenario" in parser
            else {},
            theorem_params={k: _coerce(v) for k, v in parser.items("theorem")}
            if "theorem" in parser
            else {},
            source_text=text,
        )
    except (ValueError, TypeError) as err:
        raise ConfigError(f"bad experiment setting: {err}") from err
    return cfg


def parse_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {path!r}: {err}") from err
    return parse_config_text(text)


_DEFAULT_TEXTS = {
    "theorem-check": """\
[experiment]
scenario = theorem-check
seed = 20240810

[theorem]
n_problems = 500
n_schedules = 100
step_counts = 1,2,3,5,10,20
tolerance = 1e-10
""",
    "range-demo": """\
[experiment]
scenario = range-demo
seed = 20240810

[scenario]
resolution = 800
ensemble_size = 200
convergence_max_steps = 25

[filter:ekf]
kind = ekf

[filter:bruf-25]
kind = bruf
n_steps = 25

[filter:vs-bruf-25]
kind = vs-bruf
n_steps = 25

[filter:ec-bruf]
kind = ec-bruf
atol = 0.1
rtol = 0.1
n0 = 25

[filter:iekf]
kind = iekf
max_iters = 25
tol = 0
line_search = true

[filter:enkf]
kind = enkf
ensemble_size = 200

[filter:bruenkf-25]
kind = bruenkf
n_steps = 25
ensemble_size = 200

[filter:vs-bruenkf-25]
kind = vs-bruenkf
n_steps = 25
ensemble_size = 200

[filter:ec-bruenkf]
kind = ec-bruenkf
atol = 1e-6
rtol = 1e-6
n0 = 25
ensemble_size = 200
""",
    "tracking": """\
[experiment]
scenario = tracking
n_runs = 100
seed = 20240810

[filter:ekf]
kind = ekf

[filter:bruf-10]
kind = bruf
n_steps = 10

[filter:bruf-25]
kind = bruf
n_steps = 25

[filter:vs-bruf-10]
kind = vs-bruf
n_steps = 10

[filter:vs-bruf-25]
kind = vs-bruf
n_steps = 25

[filter:ec-bruf]
kind = ec-bruf
atol = 1e-7
rtol = 1e-7
n0 = 25

[filter:iekf]
kind = iekf
max_iters = 25
tol = 1e-9
line_search = false
""",
    "lorenz96": """\
[experiment]
scenario = lorenz96
n_runs = 10
seed = 20240810
burn_in = 50

[scenario]
gamma = 5
m_list = 10,15,20,25,30,35,40

[filter:enkf]
kind = enkf
alpha = 1.06

[filter:bruenkf-25]
kind = bruenkf
n_steps = 25
alpha = 1.06

[filter:vs-bruenkf-25]
kind = vs-bruenkf
n_steps = 25
alpha = 1.06

[filter:ec-bruenkf]
kind = ec-bruenkf
atol = 1e-3
rtol = 1e-3
n0 = 25
alpha = 1.06

[filter:gromov]
kind = gromov
n_steps = 25
resample = true
""",
}


def default_config(scenario: str) -> ExperimentConfig:
    """The built-in configuration used when no config file is given."""
    if scenario not in _DEFAULT_TEXTS:
        raise ConfigError(f"no default config for scenario {scenario!r}")
    return parse_config_text(_DEFAULT_TEXTS[scenario])
