"""Flat ``key = value`` run configuration.

Example::

    # steel only, smaller images
    materials = steel
    steel.b = 150
    cell_pixels = 6
    episodes = 300
    seed = 1
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from bridgespan.cost_model import DEFAULT_MATERIALS
from bridgespan.dqn_agent import TrainConfig
from bridgespan.environment import EnvConfig

#: cell size used for training runs; 16 px does not fit a desk-scale budget
TRAIN_CELL_PIXELS = 6

_ENV_KEYS = {"min_span", "max_span", "step_length", "max_steps", "cell_pixels"}
_TRAIN_KEYS = {f.name for f in dataclasses.fields(TrainConfig)}
_RUN_KEYS = {"output_dir", "name", "oracle_tol", "materials"}
_MATERIAL_FIELDS = ("a", "b", "m", "c", "r")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    env: EnvConfig = field(default_factory=lambda: EnvConfig(cell_pixels=TRAIN_CELL_PIXELS))
    train: TrainConfig = field(default_factory=TrainConfig)
    output_dir: str = "out"
    name: str | None = None
    oracle_tol: float = 1e-10


def _number(key: str, raw: str, kind: type) -> int | float:
    try:
        if kind is int:
            value = float(raw)
            if not value.is_integer():
                raise ValueError
            return int(value)
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected {kind.__name__}, got {raw!r}") from None


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse and validate config text; raises :class:`ConfigError`."""
    entries: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        if key in entries:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        entries[key] = value
    return build_config(entries, source)


def build_config(entries: dict[str, str], source: str = "<config>") -> RunConfig:
    known_materials = {p.name: p for p in DEFAULT_MATERIALS}
    overrides: dict[str, dict[str, float]] = {}
    env_kwargs: dict = {}
    train_kwargs: dict = {}
    run_kwargs: dict = {}
    order = [p.name for p in DEFAULT_MATERIALS]

    for key, raw in entries.items():
        if "." in key:
            material, _, attr = key.partition(".")
            if material not in known_materials or attr not in _MATERIAL_FIELDS:
                raise ConfigError(f"{source}: unknown key {key!r}")
            overrides.setdefault(material, {})[attr] = _number(key, raw, float)
        elif key in _ENV_KEYS:
            env_kwargs[key] = _number(key, raw, int)
        elif key in _TRAIN_KEYS:
            kind = TrainConfig.__dataclass_fields__[key].type
            train_kwargs[key] = _number(key, raw, int if kind == "int" else float)
        elif key == "materials":
            order = [name.strip() for name in raw.split(",") if name.strip()]
            unknown = [name for name in order if name not in known_materials]
            if unknown or not order or len(set(order)) != len(order):
                raise ConfigError(f"{source}: bad material list {raw!r}")
        elif key == "oracle_tol":
            run_kwargs[key] = _number(key, raw, float)
        elif key in _RUN_KEYS:
            run_kwargs[key] = raw
        else:
            raise ConfigError(f"{source}: unknown key {key!r}")

    try:
        materials = tuple(
            dataclasses.replace(known_materials[name], **overrides.get(name, {})) for name in order
        )
        env_kwargs.setdefault("cell_pixels", TRAIN_CELL_PIXELS)
        env = EnvConfig(materials=materials, **env_kwargs)
        train = TrainConfig(**train_kwargs)
        config = RunConfig(env=env, train=train, **run_kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from None
    if not config.oracle_tol > 0:
        raise ConfigError(f"{source}: oracle_tol must be > 0")
    return config


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))

