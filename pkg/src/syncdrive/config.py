"""Strict TOML run-configuration files.

A run file mirrors :class:`~syncdrive.sim.Scenario` field for field, with
one table per nested record and two extra top-level keys, ``run_name`` and
``output_dir``. Unknown keys anywhere are errors.
"""

from __future__ import annotations

import dataclasses
import sys
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .model import LeadProfile, VehicleState
from .mpc import MpcConfig
from .sim import Scenario
from .supervision import SupervisionConfig
from .v2x import NetworkModel


class ConfigError(ValueError):
    pass


SECTIONS = {
    "lead_profile": LeadProfile,
    "lead_initial": VehicleState,
    "follower_initial": VehicleState,
    "mpc": MpcConfig,
    "network": NetworkModel,
    "supervision": SupervisionConfig,
}
RUN_KEYS = {"run_name": str, "output_dir": str}


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario = field(default_factory=Scenario)
    run_name: str = "run"
    output_dir: str = "runs"


def _hints(cls) -> dict[str, Any]:
    return typing.get_type_hints(cls)


def valid_keys() -> list[str]:
    keys = sorted(RUN_KEYS)
    for f in dataclasses.fields(Scenario):
        if f.name in SECTIONS:
            keys += [f"{f.name}.{g.name}" for g in dataclasses.fields(SECTIONS[f.name])]
        else:
            keys.append(f.name)
    return sorted(keys)


def _coerce(key: str, value: Any, hint: Any) -> Any:
    origin = typing.get_origin(hint)
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        return float(value)
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return value
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false, got {value!r}")
        return value
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string, got {value!r}")
        return value
    if hint is frozenset or origin is frozenset:
        if not isinstance(value, (list, tuple, set, frozenset)):
            raise ConfigError(f"{key}: expected a list, got {value!r}")
        return frozenset(value)
    if origin is tuple:
        # breakpoints: list of [time, accel] pairs
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key}: expected a list of [time, value] pairs")
        out = []
        for item in value:
            if not isinstance(item, (list, tuple)) or len(item) != 2:
                raise ConfigError(f"{key}: each entry must be a [time, value] pair")
            out.append(tuple(_coerce(key, x, float) for x in item))
        return tuple(out)
    raise ConfigError(f"{key}: unsupported field type {hint!r}")


def _build(cls, data: dict, prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix}: expected a table")
    hints = _hints(cls)
    unknown = set(data) - set(hints)
    if unknown:
        names = ", ".join(sorted(f"{prefix}.{k}" for k in unknown))
        raise ConfigError(f"unknown key(s) {names}; valid keys: {', '.join(valid_keys())}")
    kwargs = {k: _coerce(f"{prefix}.{k}", v, hints[k]) for k, v in data.items()}
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{prefix}: {exc}") from exc


def from_dict(data: dict) -> RunConfig:
    data = dict(data)
    run_kwargs = {}
    for key, typ in RUN_KEYS.items():
        if key in data:
            run_kwargs[key] = _coerce(key, data.pop(key), typ)

    hints = _hints(Scenario)
    unknown = set(data) - set(hints)
    if unknown:
        raise ConfigError(
            f"unknown key(s) {', '.join(sorted(unknown))}; valid keys: {', '.join(valid_keys())}"
        )
    kwargs = {}
    for key, value in data.items():
        if key in SECTIONS:
            kwargs[key] = _build(SECTIONS[key], value, key)
        else:
            kwargs[key] = _coerce(key, value, hints[key])
    try:
        scenario = Scenario(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(scenario=scenario, **run_kwargs)


def _plain(value: Any) -> Any:
    if dataclasses.is_dataclass(value):
        return {f.name: _plain(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, frozenset):
        return sorted(value)
    if isinstance(value, (tuple, list)):
        return [_plain(v) for v in value]
    return value


def to_dict(cfg: RunConfig) -> dict:
    out: dict[str, Any] = {"run_name": cfg.run_name, "output_dir": cfg.output_dir}
    scalars = {}
    tables = {}
    for key, value in _plain(cfg.scenario).items():
        (tables if key in SECTIONS else scalars)[key] = value
    out.update(scalars)
    out.update(tables)
    return out


def dumps(cfg: RunConfig) -> str:
    return tomli_w.dumps(to_dict(cfg))


def loads(text: str) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc
    return from_dict(data)


def load(path: Path | str) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError(f"no such file: {path}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return loads(text)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_value(text: str) -> Any:
    """Parse an override value as a TOML value, falling back to a bare string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(cfg: RunConfig, overrides: list[str]) -> RunConfig:
    data = to_dict(cfg)
    keys = set(valid_keys())
    for item in overrides:
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"override {item!r} is not key=value")
        if key not in keys:
            raise ConfigError(f"unknown key {key!r}; valid keys: {', '.join(sorted(keys))}")
        value = parse_value(raw.strip())
        section, _, name = key.partition(".")
        if name:
            data[section][name] = value
        else:
            data[section] = value
    return from_dict(data)
