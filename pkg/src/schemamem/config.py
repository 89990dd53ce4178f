"""Runtime settings.

Settings come from an INI file (key = value under sections), then from
environment variables of the form SCHEMAMEM_<SECTION>__<KEY>, where the
section name is uppercased and any '.' becomes '_'. The file path itself
can be given via SCHEMAMEM_CONFIG. Unknown sections or keys are rejected
rather than ignored, except under [conflict.tolerances] where keys are
record-key names by design.
"""

from __future__ import annotations

import configparser
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .adaptation import AdaptationConfig
from .conflict import AGE_UNITS, SUPPORT_MODES, ReliabilityWeights
from .errors import ConfigInvalid
from .provider import ConflictPolicy, ExtractionRules
from .values import parse_timestamp

log = logging.getLogger(__name__)

ENV_CONFIG_PATH = "SCHEMAMEM_CONFIG"
ENV_PREFIX = "SCHEMAMEM_"
# owned by other layers (CLI store directory), never settings overrides
ENV_RESERVED = {ENV_CONFIG_PATH, "SCHEMAMEM_ROOT"}

_KNOWN_KEYS: dict[str, set[str]] = {
    "engine": {"theta_meta", "theta_elem", "age_unit", "supports_normalization", "now"},
    "weights": {"recency", "source", "support"},
    "conflict": {"default_relative_tolerance", "time_tolerance_seconds"},
    "conflict.tolerances": set(),  # open key space
    "retrieval": {"k", "budget"},
    "server": {"host", "port"},
    "extraction": {"rules_file", "min_keys"},
}


@dataclass
class Settings:
    theta_meta: float = 0.70
    theta_elem: float = 0.60
    w_recency: float = 1.0 / 3.0
    w_source: float = 1.0 / 3.0
    w_support: float = 1.0 / 3.0
    age_unit: str = "days"
    supports_normalization: str = "saturating"
    now: Any = None  # fixed clock for reproducible runs; None = wall clock
    default_relative_tolerance: float = 1e-6
    time_tolerance_seconds: float = 0.0
    numeric_tolerances: dict[str, float] = field(default_factory=dict)
    retrieval_k: int = 5
    budget: int = 8
    host: str = "127.0.0.1"
    port: int = 8787
    extraction_rules: ExtractionRules | None = None

    def conflict_policy(self) -> ConflictPolicy:
        return ConflictPolicy(
            numeric_tolerances=dict(self.numeric_tolerances),
            default_relative_tolerance=self.default_relative_tolerance,
            time_tolerance_seconds=self.time_tolerance_seconds,
        )

    def adaptation_config(self) -> AdaptationConfig:
        return AdaptationConfig(
            theta_meta=self.theta_meta,
            theta_elem=self.theta_elem,
            weights=ReliabilityWeights(
                recency=self.w_recency, source=self.w_source, support=self.w_support
            ),
            policy=self.conflict_policy(),
            age_unit_seconds=AGE_UNITS[self.age_unit],
            supports_normalization=self.supports_normalization,
        )


def _parse_float(section: str, key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigInvalid(f"[{section}] {key} must be a number, got {raw!r}") from exc


def _parse_int(section: str, key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigInvalid(f"[{section}] {key} must be an integer, got {raw!r}") from exc


def _apply(settings: Settings, section: str, key: str, raw: str) -> None:
    if section not in _KNOWN_KEYS:
        raise ConfigInvalid(f"unknown config section [{section}]")
    if section != "conflict.tolerances" and key not in _KNOWN_KEYS[section]:
        raise ConfigInvalid(f"unknown key {key!r} in section [{section}]")

    if section == "engine":
        if key in ("theta_meta", "theta_elem"):
            setattr(settings, key, _parse_float(section, key, raw))
        elif key == "age_unit":
            if raw not in AGE_UNITS:
                raise ConfigInvalid(f"age_unit must be one of {sorted(AGE_UNITS)}, got {raw!r}")
            settings.age_unit = raw
        elif key == "supports_normalization":
            if raw not in SUPPORT_MODES:
                raise ConfigInvalid(
                    f"supports_normalization must be one of {sorted(SUPPORT_MODES)}, got {raw!r}"
                )
            settings.supports_normalization = raw
        elif key == "now":
            try:
                settings.now = parse_timestamp(raw)
            except ValueError as exc:
                raise ConfigInvalid(f"[engine] now is not a timestamp: {raw!r}") from exc
    elif section == "weights":
        setattr(settings, f"w_{key}", _parse_float(section, key, raw))
    elif section == "conflict":
        setattr(settings, key, _parse_float(section, key, raw))
    elif section == "conflict.tolerances":
        settings.numeric_tolerances[key] = _parse_float(section, key, raw)
    elif section == "retrieval":
        target = "retrieval_k" if key == "k" else "budget"
        value = _parse_int(section, key, raw)
        if value < 1:
            raise ConfigInvalid(f"[retrieval] {key} must be >= 1")
        setattr(settings, target, value)
    elif section == "server":
        if key == "port":
            settings.port = _parse_int(section, key, raw)
        else:
            settings.host = raw
    elif section == "extraction":
        if key == "rules_file":
            path = Path(raw)
            try:
                data = json.loads(path.read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigInvalid(f"cannot load extraction rules from {path}: {exc}") from exc
            settings.extraction_rules = ExtractionRules.from_json(data)
        else:  # min_keys
            if settings.extraction_rules is None:
                settings.extraction_rules = ExtractionRules()
            settings.extraction_rules.min_extracted_keys = _parse_int(section, key, raw)


def _env_overrides(env: Mapping[str, str]) -> list[tuple[str, str, str]]:
    """Translate SCHEMAMEM_<SECTION>__<KEY> variables to (section, key, raw)."""
    out: list[tuple[str, str, str]] = []
    for name in sorted(env):
        if not name.startswith(ENV_PREFIX) or name in ENV_RESERVED:
            continue
        body = name[len(ENV_PREFIX):]
        if "__" not in body:
            raise ConfigInvalid(
                f"malformed override {name}: expected {ENV_PREFIX}<SECTION>__<KEY>"
            )
        section_part, key = body.split("__", 1)
        section = section_part.lower().replace("_", ".")
        if section not in _KNOWN_KEYS:
            # sections without dots map straight through
            section = section_part.lower()
        out.append((section, key.lower(), env[name]))
    return out


def load_settings(
    path: str | Path | None = None,
    env: Mapping[str, str] | None = None,
) -> Settings:
    """Build settings from defaults, an optional INI file, then env overrides.

    Raises:
        ConfigInvalid: missing file, unknown section/key, or a bad value.
    """
    env = os.environ if env is None else env
    settings = Settings()
    chosen = path or env.get(ENV_CONFIG_PATH)
    if chosen:
        file_path = Path(chosen)
        if not file_path.exists():
            raise ConfigInvalid(f"config file not found: {file_path}")
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str  # tolerance keys are case-sensitive record keys
        try:
            parser.read_string(file_path.read_text(encoding="utf-8"), source=str(file_path))
        except configparser.Error as exc:
            raise ConfigInvalid(f"cannot parse {file_path}: {exc}") from exc
        for section in parser.sections():
            for key, raw in parser.items(section):
                norm = key if section == "conflict.tolerances" else key.lower()
                _apply(settings, section, norm, raw)
        log.debug("loaded settings from %s", file_path)
    for section, key, raw in _env_overrides(env):
        _apply(settings, section, key, raw)
    total = settings.w_recency + settings.w_source + settings.w_support
    if abs(total - 1.0) > 1e-9:
        raise ConfigInvalid(f"reliability weights must sum to 1, got {total}")
    return settings
