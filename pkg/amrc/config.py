"""Run configuration: a dict of typed settings with defaults, named presets and
optional JSON files.
"""
from collections.abc import Iterable
from pathlib import Path
import json
import logging
import math
import os
import typing

from amrc.errors import ConfigError
from amrc.feature_map import INSTANCE_MAPS
from amrc.tracker import NOISE_TIMINGS

logger = logging.getLogger(__name__)

CONFIG_ENV_VAR = "AMRC_CONFIG"

SYNTHETIC = "synthetic"
AUTO = "auto"
MULTIDIM = "multidim"
UNIDIM = "unidim"
MODES = (MULTIDIM, UNIDIM)
RANDOMIZED = "randomized"
DETERMINISTIC = "deterministic"
BOTH = "both"
RULES = (RANDOMIZED, DETERMINISTIC, BOTH)
ESTIMATED = "estimated"
ORACLE = "oracle"
LAMBDA_MODES = (ESTIMATED, ORACLE)
MIN_CHECKPOINT_TRIALS = 1000

DEFAULTS: typing.Dict[str, typing.Any] = {
    "dataset": SYNTHETIC,
    "map": AUTO,
    "rff_dim": 200,
    "rff_scale": None,
    "order": 1,
    "window": 200,
    "cache": 100,
    "iters": 2000,
    "delta": 0.05,
    "mode": MULTIDIM,
    "rule": BOTH,
    "seed": 0,
    "lambda_mode": ESTIMATED,
    "steps": 10000,
    "omega": 0.1,
    "noise_std": math.sqrt(2.0),
    "checkpoints": 0,
    "trials": 1000,
    "oracle_iters": 5000,
    "oracle_pool": 50,
    "standardize": True,
    "label_column": None,
    "record_timing": True,
    "max_subset_size": None,
    "lambda_floor": 0.0,
    "process_noise": 0.01,
    "init_obs_noise": 1.0,
    "forgetting": 0.3,
    "noise_floor": 1e-8,
    "noise_timing": "before",
}

# Value parsers; None-able keys accept "none" / "" from the command line
_INTS = {
    "rff_dim", "order", "window", "cache", "iters", "seed", "steps",
    "checkpoints", "trials", "oracle_iters", "oracle_pool", "max_subset_size",
}
_FLOATS = {
    "rff_scale", "delta", "omega", "noise_std", "lambda_floor", "process_noise",
    "init_obs_noise", "forgetting", "noise_floor",
}
_BOOLS = {"standardize", "record_timing"}
_NULLABLE = {"rff_scale", "label_column", "max_subset_size"}
_CHOICES = {
    "map": INSTANCE_MAPS + (AUTO,),
    "mode": MODES,
    "rule": RULES,
    "lambda_mode": LAMBDA_MODES,
    "noise_timing": NOISE_TIMINGS,
}
_TRUE_STRINGS = {"1", "true", "yes", "on"}
_FALSE_STRINGS = {"0", "false", "no", "off"}


class RunConfig(dict):
    """A dict-like run configuration. Behaves like a normal dict except that
    values are coerced to the type of their key, so strings from the command
    line or JSON files can be stored directly. Defines the default
    configuration.
    """

    def __init__(self, **kwargs: typing.Any) -> None:
        super().__init__(DEFAULTS)
        self.update(kwargs)

    def __setitem__(self, key: typing.Any, value: typing.Any) -> None:
        if key not in DEFAULTS:
            raise ConfigError(f'Unknown config key: "{key}"')
        super().__setitem__(key, RunConfig.transform_val(key, value))

    @staticmethod
    def transform_val(key: str, val: typing.Any) -> typing.Any:
        if key in _NULLABLE and (
            val is None or (isinstance(val, str) and val.lower() in ("", "none"))
        ):
            return None
        try:
            if key in _BOOLS:
                if isinstance(val, str):
                    if val.lower() in _TRUE_STRINGS:
                        return True
                    if val.lower() in _FALSE_STRINGS:
                        return False
                    raise ValueError(val)
                return bool(val)
            if key in _INTS:
                if isinstance(val, float) and not val.is_integer():
                    raise ValueError(val)
                return int(val)
            if key in _FLOATS:
                return float(val)
        except (TypeError, ValueError):
            raise ConfigError(f'Invalid value for "{key}": {val!r}') from None
        if key in _CHOICES and val not in _CHOICES[key]:
            choices = ", ".join(_CHOICES[key])
            raise ConfigError(f'Invalid {key}: "{val}" (choose from {choices})')
        return val

    def update(self, d: typing.Mapping) -> None:  # type: ignore
        for key in d.keys():
            self[key] = d[key]

    @property
    def is_synthetic(self) -> bool:
        return self["dataset"] == SYNTHETIC

    @property
    def instance_map(self) -> str:
        """The instance map, resolving "auto" by dataset."""
        if self["map"] == AUTO:
            return "linear" if self.is_synthetic else "rff"
        return self["map"]

    @property
    def rules(self) -> typing.Tuple[str, ...]:
        if self["rule"] == BOTH:
            return (RANDOMIZED, DETERMINISTIC)
        return (self["rule"],)

    def validate(self) -> "RunConfig":
        positive = (
            "rff_dim", "window", "cache", "iters", "steps", "trials",
            "oracle_iters", "oracle_pool",
        )
        for key in positive:
            if self[key] < 1:
                raise ConfigError(f"{key} must be positive")
        if self["order"] < 0:
            raise ConfigError("order must be nonnegative")
        if self["checkpoints"] < 0:
            raise ConfigError("checkpoints must be nonnegative")
        if not 0.0 < self["delta"] < 1.0:
            raise ConfigError("delta must be in (0, 1)")
        if not 0.0 < self["forgetting"] < 1.0:
            raise ConfigError("forgetting must be in (0, 1)")
        if self["rff_scale"] is not None and self["rff_scale"] <= 0:
            raise ConfigError("rff_scale must be positive")
        if self["max_subset_size"] is not None and self["max_subset_size"] < 1:
            raise ConfigError("max_subset_size must be positive")
        for key in ("omega", "noise_std"):
            if self[key] <= 0:
                raise ConfigError(f"{key} must be positive")
        for key in ("lambda_floor", "process_noise", "init_obs_noise", "noise_floor"):
            if self[key] < 0:
                raise ConfigError(f"{key} must be nonnegative")
        if not self.is_synthetic:
            if self["lambda_mode"] == ORACLE:
                raise ConfigError("lambda_mode oracle needs the synthetic dataset")
            if self["checkpoints"]:
                raise ConfigError("checkpoints need the synthetic dataset")
        if self["checkpoints"] and self.instance_map != "linear":
            raise ConfigError("checkpoints need the linear instance map")
        if self["lambda_mode"] == ORACLE and self.instance_map != "linear":
            raise ConfigError("lambda_mode oracle needs the linear instance map")
        if self["checkpoints"] > self["steps"] and self.is_synthetic:
            raise ConfigError("checkpoints cannot exceed steps")
        if self["checkpoints"] and self["trials"] < MIN_CHECKPOINT_TRIALS:
            raise ConfigError(
                f"checkpoints need at least {MIN_CHECKPOINT_TRIALS} trials"
            )
        return self


# Named presets, selected with --name
_config_registry: typing.Dict[str, RunConfig] = {}


def named_config(
    name: typing.Union[str, typing.Iterable[str]], config_dict: typing.Mapping
) -> None:
    """Adds a named preset to the registry. The first argument may either be a
    string or a collection of strings.
    """
    names = (
        name
        if isinstance(name, Iterable) and not isinstance(name, (str, bytes))
        else [name]
    )
    for each in names:
        _config_registry[each] = RunConfig(**config_dict)


def get_named_config(name: str) -> RunConfig:
    try:
        preset = _config_registry[name]
    except KeyError:
        raise ConfigError(f'Invalid --name: "{name}"') from None
    return RunConfig(**preset)


def available_presets() -> typing.List[str]:
    return sorted(_config_registry)


named_config("synthetic", {"dataset": SYNTHETIC, "map": "linear", "steps": 10000})
named_config("benchmark", {"map": "rff", "rule": DETERMINISTIC})
named_config(
    "bound-check",
    {
        "dataset": SYNTHETIC,
        "map": "linear",
        "lambda_mode": ORACLE,
        "rule": RANDOMIZED,
        "steps": 2000,
        "checkpoints": 20,
        "trials": 1000,
    },
)


def load_config_file(path: typing.Union[str, Path]) -> typing.Dict[str, typing.Any]:
    """Reads a JSON object of config keys."""
    filepath = Path(path)
    try:
        with filepath.open("r", encoding="utf-8") as fp:
            data = json.load(fp)
    except FileNotFoundError:
        raise ConfigError(f"Config file {filepath} not found") from None
    except json.JSONDecodeError as error:
        raise ConfigError(
            f"Config file {filepath} is not valid JSON: {error}"
        ) from None
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {filepath} must contain a JSON object")
    logger.debug(f"Loaded config file {filepath}: {data}")
    return data


def resolve_config(
    name: typing.Optional[str] = None,
    config_file: typing.Optional[typing.Union[str, Path]] = None,
    overrides: typing.Optional[typing.Mapping] = None,
) -> RunConfig:
    """Merges defaults < preset ``name`` < JSON file < ``overrides``. The file
    falls back to the AMRC_CONFIG environment variable.
    """
    cfg = get_named_config(name) if name else RunConfig()
    if config_file is None and os.environ.get(CONFIG_ENV_VAR):
        config_file = os.environ[CONFIG_ENV_VAR]
    if config_file:
        cfg.update(load_config_file(config_file))
    if overrides:
        cfg.update(overrides)
    return cfg.validate()
