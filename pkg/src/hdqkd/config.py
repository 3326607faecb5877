"""JSON run configuration with strict validation and flag overrides.

Layout::

    {"dimension": 4, "seed": 0, "workers": 1,
     "link": {...LinkParams...},
     "intensities": {...IntensitySettings...},
     "security": {...SecurityParams...}}

Every section is optional; unknown keys are rejected.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace

from .finite_key import SecurityParams
from .link import IntensitySettings, LinkParams
from .states import DIMENSIONS

SECTIONS = {"link": LinkParams, "intensities": IntensitySettings, "security": SecurityParams}
TOP_LEVEL = ("dimension", "seed", "workers")


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class RunConfig:
    link: LinkParams = field(default_factory=LinkParams)
    intensities: IntensitySettings = field(default_factory=IntensitySettings)
    security: SecurityParams = field(default_factory=SecurityParams)
    dimension: int = 4
    seed: int = 0
    workers: int = 1

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension, "seed": self.seed, "workers": self.workers,
            **{name: asdict(getattr(self, name)) for name in SECTIONS},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _build(cls, name: str, values: dict):
    known = {f.name: f for f in fields(cls)}
    for key in values:
        if key not in known:
            raise ConfigError(f"{name}.{key}", "unknown key")
    try:
        return cls(**values)
    except TypeError as exc:
        raise ConfigError(name, str(exc)) from None
    except ValueError as exc:
        raise ConfigError(name, str(exc)) from None


def _check_top(key: str, value):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(key, "must be an integer")
    if key == "dimension" and value not in DIMENSIONS:
        raise ConfigError(key, "must be 2 or 4")
    if key == "seed" and not 0 <= value < 2 ** 64:
        raise ConfigError(key, "must be an unsigned 64-bit integer")
    if key == "workers" and value < 1:
        raise ConfigError(key, "must be >= 1")


def from_dict(data: dict, overrides: dict | None = None) -> RunConfig:
    """Build a validated config; ``overrides`` maps ``section.key`` or top-level keys to values."""
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    merged = {name: dict(data.get(name) or {}) for name in SECTIONS}
    for key in data:
        if key not in SECTIONS and key not in TOP_LEVEL:
            raise ConfigError(key, "unknown key")
        if key in SECTIONS and not isinstance(data[key], dict):
            raise ConfigError(key, "must be an object")
    top = {k: data[k] for k in TOP_LEVEL if k in data}
    for dotted, value in (overrides or {}).items():
        if "." in dotted:
            section, key = dotted.split(".", 1)
            if section not in SECTIONS:
                raise ConfigError(dotted, "unknown section")
            merged[section][key] = value
        elif dotted in TOP_LEVEL:
            top[dotted] = value
        else:
            raise ConfigError(dotted, "unknown key")
    for key, value in top.items():
        _check_top(key, value)
    built = {name: _build(cls, name, merged[name]) for name, cls in SECTIONS.items()}
    return RunConfig(**built, **top)


def loads(text: str, overrides: dict | None = None) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON ({exc})") from None
    return from_dict(data, overrides)


def load(path, overrides: dict | None = None) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read(), overrides)


def with_length(cfg: RunConfig, length_km: float) -> RunConfig:
    return replace(cfg, link=cfg.link.with_length(length_km))


def parse_assignment(text: str) -> tuple[str, object]:
    """``key=value`` with the value parsed as JSON when possible."""
    if "=" not in text:
        raise ConfigError(text, "override must look like key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value
