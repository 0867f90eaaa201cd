"""
Run configuration for the activity-shift toolkit.

A RunConfig is read from the `[run]` section of an INI file; command-line
values override file values, which override the defaults below.
"""

import configparser
import logging
import os
from dataclasses import asdict, dataclass, fields, replace
from datetime import date
from typing import Any, Dict, Mapping, Optional

from .exceptions import ValidationError
from .modules.switchpoint import PVALUE_STATISTICS
from .modules.timeline import AnalysisWindow

logger = logging.getLogger(__name__)

CONFIG_ENV_VAR = "ACTIVITY_SHIFT_CONFIG_FILE"
SOLVERS_BAYES = ("exact", "mcmc")


@dataclass(frozen=True)
class RunConfig:
    """Every setting of an analysis run."""

    window_start: date = date(2019, 10, 1)
    window_end: date = date(2020, 4, 28)
    split_date: date = date(2020, 3, 9)
    baseline_start: Optional[date] = None
    k_max: int = 5
    min_segment_len: int = 7
    alpha: Optional[float] = None
    bins: int = 25
    epsilon: float = 1e-9
    bootstrap_resamples: int = 1000
    bootstrap_level: float = 0.95
    seed: int = 0
    solver_ssr: str = "dp"
    solver_bayes: str = "exact"
    chains: int = 4
    draws: int = 2000
    warmup: int = 1000
    jump_floor: float = 1e-4
    pvalue_replicates: int = 0
    pvalue_statistic: str = "total"
    levels_max: int = 4
    width_prior_days: float = 0.05
    workers: int = 1
    error_fraction: float = 0.10

    def __post_init__(self):
        window = self.window
        if not window.contains(self.split_date):
            raise ValidationError(f"split_date {self.split_date} is outside the window")
        if self.baseline_start is not None and not window.start_date <= self.baseline_start < self.split_date:
            raise ValidationError("baseline_start must fall between the window start and split_date")
        checks = [
            (self.k_max >= 0, "k_max must be >= 0"),
            (self.min_segment_len >= 1, "min_segment_len must be >= 1"),
            (self.alpha is None or self.alpha > 0, "alpha must be positive"),
            (self.bins >= 2, "bins must be >= 2"),
            (self.epsilon > 0, "epsilon must be positive"),
            (self.bootstrap_resamples >= 1, "bootstrap_resamples must be >= 1"),
            (0 < self.bootstrap_level < 1, "bootstrap_level must lie in (0, 1)"),
            (self.solver_ssr == "dp", "solver_ssr must be 'dp'"),
            (self.solver_bayes in SOLVERS_BAYES, f"solver_bayes must be one of {SOLVERS_BAYES}"),
            (self.chains >= 2, "chains must be >= 2"),
            (self.draws >= 1000, "draws must be >= 1000"),
            (self.warmup >= 0, "warmup must be >= 0"),
            (self.jump_floor >= 0, "jump_floor must be >= 0"),
            (self.pvalue_replicates == 0 or self.pvalue_replicates >= 100,
             "pvalue_replicates must be 0 or >= 100"),
            (self.pvalue_statistic in PVALUE_STATISTICS, f"pvalue_statistic must be one of {PVALUE_STATISTICS}"),
            (self.levels_max >= 0, "levels_max must be >= 0"),
            (self.width_prior_days > 0, "width_prior_days must be positive"),
            (self.workers != 0, "workers must be non-zero"),
            (0 <= self.error_fraction <= 1, "error_fraction must lie in [0, 1]"),
        ]
        for ok, message in checks:
            if not ok:
                raise ValidationError(message)

    @property
    def window(self) -> AnalysisWindow:
        return AnalysisWindow(self.window_start, self.window_end)

    @property
    def before_start(self) -> date:
        return self.baseline_start or self.window_start

    def to_dict(self) -> Dict[str, Any]:
        """Effective configuration with dates as ISO strings."""
        return {
            key: value.isoformat() if isinstance(value, date) else value
            for key, value in asdict(self).items()
        }

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any], base: Optional["RunConfig"] = None) -> "RunConfig":
        """
        Build a config from string or typed values layered over `base`.

        Raises:
            ValidationError: On unknown keys or unparsable values
        """
        base = base or cls()
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ValidationError(f"Unknown config keys: {unknown}")
        parsed = {}
        for key, raw in values.items():
            if raw is None:
                continue
            parsed[key] = _convert(key, raw, getattr(base, key))
        return replace(base, **parsed)


_OPTIONAL_FLOATS = {"alpha"}
_OPTIONAL_DATES = {"baseline_start"}


def _convert(key: str, raw: Any, current: Any) -> Any:
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if key in _OPTIONAL_DATES or isinstance(current, date):
            return None if text.lower() in ("", "none") else date.fromisoformat(text)
        if key in _OPTIONAL_FLOATS:
            return None if text.lower() in ("", "none", "auto") else float(text)
        if isinstance(current, bool):
            return text.lower() in ("1", "true", "yes", "on")
        if isinstance(current, int):
            return int(text)
        if isinstance(current, float):
            return float(text)
    except ValueError:
        raise ValidationError(f"Bad value for {key}: '{raw}'")
    return text


def load_config(config_path: str) -> Dict[str, str]:
    """
    Load the `[run]` section of an INI file.

    Args:
        config_path: Path to the config file

    Returns:
        Dictionary of raw string values (empty if the file has no [run] section)

    Raises:
        ValidationError: If the file does not exist
    """
    if not os.path.exists(config_path):
        raise ValidationError(f"Config file not found: {config_path}")
    config = configparser.ConfigParser()
    config.read(config_path, encoding="utf-8")
    if "run" in config:
        return dict(config["run"])
    return {}


def resolve_config(config_path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Effective RunConfig: overrides, then the config file, then defaults.

    The file comes from `config_path`, else from the ACTIVITY_SHIFT_CONFIG_FILE
    environment variable.
    """
    if not config_path and CONFIG_ENV_VAR in os.environ:
        config_path = os.environ[CONFIG_ENV_VAR]
    config = RunConfig()
    if config_path:
        logger.debug(f"Loading config from file: {config_path}")
        config = RunConfig.from_mapping(load_config(config_path), config)
    if overrides:
        config = RunConfig.from_mapping({k: v for k, v in overrides.items() if v is not None}, config)
    logger.debug(f"Effective config: {config.to_dict()}")
    return config
