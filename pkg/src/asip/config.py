"""Layered TOML configuration: packaged defaults, then user files."""

from __future__ import annotations

import copy
import math
import os
import sys
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .bspline import CostWeights
from .mpc import MpcController
from .scenes import ScenarioConfig
from .simulator import SimConfig
from .world import SensorModel

ENV_VAR = "ASIP_DEFAULTS"


class ConfigError(ValueError):
    """Malformed or unknown configuration entries."""


def _read(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc


def load_defaults() -> dict:
    override = os.environ.get(ENV_VAR)
    if override:
        return _read(override)
    with resources.files("asip").joinpath("defaults.toml").open("rb") as fh:
        return tomllib.load(fh)


def merge(base: dict, extra: dict, where: str = "") -> dict:
    """Recursive merge; keys absent from ``base`` are rejected."""
    out = copy.deepcopy(base)
    for key, val in extra.items():
        if key not in out:
            raise ConfigError(f"unknown config key {where + key!r}")
        if isinstance(out[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{where + key!r} must be a table")
            out[key] = merge(out[key], val, f"{where}{key}.")
        else:
            out[key] = val
    return out


def load(*paths) -> dict:
    cfg = load_defaults()
    for p in paths:
        if p:
            cfg = merge(cfg, _read(Path(p)))
    return cfg


def _wrap(fn):
    def inner(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    inner.__name__ = fn.__name__
    inner.__doc__ = fn.__doc__
    return inner


@_wrap
def scenario_config(cfg: dict, config_id: int, seed: int) -> ScenarioConfig:
    s = cfg["scenario"]
    return ScenarioConfig(
        config_id=int(config_id),
        seed=int(seed),
        boundary=tuple(float(x) for x in s["boundary"]),
        component_range=tuple(int(x) for x in s["component_range"]),
        obstacle_count=int(s["obstacle_count"]),
        obstacle_size_range=tuple(float(x) for x in s["obstacle_size_range"]),
        resolution=float(s["resolution"]),
        min_gap=float(s["min_gap"]),
        start_offset=float(s["start_offset"]),
    )


@_wrap
def occlusion_base(cfg: dict) -> ScenarioConfig:
    o, s = cfg["occlusion"], cfg["scenario"]
    return ScenarioConfig(
        config_id=int(o["config_id"]),
        boundary=tuple(float(x) for x in o["boundary"]),
        component_range=tuple(int(x) for x in o["component_range"]),
        obstacle_count=0,
        obstacle_size_range=tuple(float(x) for x in o["obstacle_size_range"]),
        resolution=float(s["resolution"]),
        min_gap=float(s["min_gap"]),
        start_offset=float(s["start_offset"]),
    )


@_wrap
def planner_kwargs(cfg: dict) -> dict:
    p = dict(cfg["planner"])
    p["angle_threshold"] = math.radians(float(p.pop("angle_threshold_deg")))
    return p


@_wrap
def naive_kwargs(cfg: dict) -> dict:
    return dict(cfg["naive"])


@_wrap
def sim_config(cfg: dict, adaptation: bool | None = None) -> SimConfig:
    s = dict(cfg["sim"])
    sensor = SensorModel(fov=float(s.pop("fov")), max_range=float(s.pop("max_range")))
    if adaptation is not None:
        s["adaptation"] = bool(adaptation)
    return SimConfig(sensor=sensor, **s)


@_wrap
def cost_weights(cfg: dict) -> CostWeights:
    return CostWeights(**cfg["trajectory"])


@_wrap
def mpc_controller(cfg: dict) -> MpcController:
    return MpcController(dt=float(cfg["sim"]["dt"]), **cfg["mpc"])
