"""Configuration management for disfluency-mapper."""

import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from dotenv import dotenv_values, load_dotenv

from .core.align import ConventionTable, DifferenceOptions
from .core.analyze import FragmentOptions, Lexicons
from .core.exceptions import ConfigError
from .core.project import PatternWeights

# Load environment variables from .env file
load_dotenv()

ENV_PREFIX = "DISFL_"

_CHOICES = {
    "sub_policy": ("A", "D"),
    "pmi_base": ("e", "2", "10"),
    "fragment_denominator": ("fragments", "errors"),
    "log_level": ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"),
}
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass
class Config:
    """Pipeline configuration; every report embeds the resolved values."""

    # Constraint assignment
    window: int = 2
    sub_policy: str = "A"

    # Pattern scorer weights
    w_copy: float = 2.0
    w_orphan: float = 0.5
    w_dev: float = 1.0

    # Analysis
    pmi_base: str = "e"
    split_contractions: bool = False
    exclude_single_phone_fragments: bool = False
    single_phone_max_graphemes: int = 1
    fragment_denominator: str = "fragments"

    # Boundary reassignment rules
    rule_unintelligible: bool = True
    rule_backchannel: bool = True

    # Resource files (empty for the packaged defaults)
    function_words: str = ""
    other_words: str = ""
    backchannels: str = ""
    conventions: str = ""
    score_table: str = ""

    # Runtime
    workers: int = 1
    log_level: str = "WARNING"

    def __post_init__(self) -> None:
        for name, allowed in _CHOICES.items():
            if str(getattr(self, name)) not in allowed:
                raise ConfigError(f"{name} must be one of {', '.join(allowed)}")
        if self.window < 0:
            raise ConfigError("window must be >= 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.single_phone_max_graphemes < 0:
            raise ConfigError("single_phone_max_graphemes must be >= 0")

    def as_report_dict(self) -> Dict[str, Any]:
        """Resolved values, minus settings that cannot change any output."""
        values = asdict(self)
        del values["workers"], values["log_level"]
        return dict(sorted(values.items()))

    def to_env_text(self) -> str:
        """Render as a key=value file that ``load_config`` reads back."""
        lines = []
        for name, value in asdict(self).items():
            if isinstance(value, bool):
                value = str(value).lower()
            lines.append(f"{name}={value}")
        return "\n".join(lines) + "\n"

    @property
    def weights(self) -> PatternWeights:
        return PatternWeights(copy=self.w_copy, orphan=self.w_orphan, deviation=self.w_dev)

    @property
    def difference_options(self) -> DifferenceOptions:
        return DifferenceOptions(
            split_contractions=self.split_contractions,
            exclude_single_phone_fragments=self.exclude_single_phone_fragments,
            single_phone_max_graphemes=self.single_phone_max_graphemes,
        )

    @property
    def fragment_options(self) -> FragmentOptions:
        return FragmentOptions(
            single_phone_max_graphemes=self.single_phone_max_graphemes,
            denominator=self.fragment_denominator,
        )

    def convention_table(self) -> ConventionTable:
        return ConventionTable.load(self.conventions or None)

    def lexicons(self, table: Optional[ConventionTable] = None) -> Lexicons:
        return Lexicons.load(
            self.function_words or None,
            self.other_words or None,
            self.backchannels or None,
            table,
        )


_FIELDS = {f.name: f for f in fields(Config)}


def _coerce(name: str, raw: Any) -> Any:
    if raw is None:
        raise ConfigError(f"{name} has no value")
    default = _FIELDS[name].default
    text = str(raw).strip()
    try:
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered in _TRUE:
                return True
            if lowered in _FALSE:
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError as e:
        raise ConfigError(f"cannot parse {name}={text!r}") from e
    if name == "log_level":
        return text.upper()
    return text


def _field_name(key: str) -> str:
    name = key.strip().lower()
    if name.startswith(ENV_PREFIX.lower()):
        name = name[len(ENV_PREFIX) :]
    return name


def load_config(
    path: Union[str, Path, None] = None,
    env: Optional[Mapping[str, str]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> Config:
    """Resolve configuration: defaults < DISFL_* environment < config file < overrides.

    Args:
        path: Flat key=value config file; keys may carry the DISFL_ prefix
        env: Environment mapping (defaults to os.environ)
        overrides: Values from command-line options; None entries are skipped

    Returns:
        Resolved Config

    Raises:
        ConfigError: On unknown keys in the file or unparsable values
    """
    env = os.environ if env is None else env
    values: Dict[str, Any] = {}
    for name in _FIELDS:
        key = f"{ENV_PREFIX}{name.upper()}"
        if key in env:
            values[name] = _coerce(name, env[key])

    if path is not None:
        if not Path(path).is_file():
            raise ConfigError(f"config file not found: {path}")
        for key, raw in dotenv_values(path).items():
            name = _field_name(key)
            if name not in _FIELDS:
                raise ConfigError(f"unknown config key '{key}' in {path}")
            values[name] = _coerce(name, raw)

    for name, value in (overrides or {}).items():
        if value is not None:
            values[name] = value
    return Config(**values)
