"""YAML run configuration: schema, validation, env overrides, resolution.

Unknown keys are hard errors (silent hyperparameter typos are the main
reproducibility hazard). Any key can be overridden with an environment
variable ``ACCWAVE_<SECTION>__<KEY>`` whose value is parsed as YAML.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import yaml

from .model import TrafficParams
from .ppo import PpoHyper

__all__ = ["ConfigError", "RunConfig", "load_config", "resolve_overrides"]

ENV_PREFIX = "ACCWAVE_"
CONFIG_SCHEMA_VERSION = "accwave-config-v1"


class ConfigError(ValueError):
    pass


def _num(lo=None, hi=None):
    def check(v, path):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {v!r}")
        if lo is not None and v < lo:
            raise ConfigError(f"{path}: {v} is below the minimum {lo}")
        if hi is not None and v > hi:
            raise ConfigError(f"{path}: {v} is above the maximum {hi}")
        return float(v)
    return check


def _int(lo=None):
    def check(v, path):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{path}: expected an integer, got {v!r}")
        if lo is not None and v < lo:
            raise ConfigError(f"{path}: {v} is below the minimum {lo}")
        return v
    return check


def _bool(v, path):
    if not isinstance(v, bool):
        raise ConfigError(f"{path}: expected true/false, got {v!r}")
    return v


def _str(*allowed):
    def check(v, path):
        if not isinstance(v, str):
            raise ConfigError(f"{path}: expected a string, got {v!r}")
        if allowed and v not in allowed:
            raise ConfigError(f"{path}: {v!r} is not one of {sorted(allowed)}")
        return v
    return check


def _numlist(n=None):
    def check(v, path):
        if not isinstance(v, list) or (n is not None and len(v) != n) \
                or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v):
            raise ConfigError(f"{path}: expected a list of {n or 'N'} numbers, got {v!r}")
        return [float(x) for x in v]
    return check


# (checker, default); default None with required=True marked by _REQUIRED
_REQUIRED = object()

SCHEMA = {
    "traffic": {
        "road_length_m": (_num(lo=1.0), 1000.0),
        "vehicle_length_m": (_num(lo=0.1), 5.0),
        "inflow_veh_per_hour": (_num(lo=1.0), 1200.0),
        "acc_penetration": (_num(lo=0.0, hi=1.0), 0.15),
        "tau_acc_s": (_num(lo=1e-6), 2.0),
        "tau_manual_s": (_num(lo=1e-6), 60.0),
        "manual_time_gap_s": (_num(lo=1e-6), 1.0),
        "acc_time_gap_setpoint_s": (_num(lo=1e-6), 1.5),
        "free_flow_speed_m_s": (_num(lo=1e-6), 30.0),
        "h_min_s": (_num(lo=1e-6), 0.5),
        "h_max_s": (_num(lo=1e-6), 3.0),
    },
    "grid": {
        "dx_m": (_num(lo=1e-6), 5.0),
        "dt_s": (_num(lo=1e-9), 0.1),
        "worst_case_speed_m_s": (_num(lo=0.0), None),  # defaults to v_f
    },
    "scenario": {
        "name": (_str(), "run"),
        "horizon_s": (_num(lo=1e-9), 300.0),
        "delay_actual_s": (_num(lo=0.0), 0.0),
        "delay_assumed_s": (_num(lo=0.0), None),  # defaults to delay_actual
        "alpha_noise_std": (_num(lo=0.0), 0.0),
        "alpha_noise_mean": (_num(lo=0.0, hi=1.0), None),  # defaults to traffic alpha
        "alpha_noise_resample": (_str("per_step", "per_episode"), "per_step"),
        "initial_wave_amplitude_veh_per_m": (_num(lo=0.0), 0.010),
        "seed": (_int(lo=0), 0),
    },
    "controller": {
        "kind": (_str("open_loop", "fixed_gain", "ppo_policy"), "open_loop"),
        "gains": (_numlist(3), [0.1, 0.9, 0.05]),
        "checkpoint": (_str(), ""),
        "deterministic": (_bool, True),
    },
    "training": {
        "gamma": (_num(lo=1e-9, hi=1.0), 0.99),
        "clip_eps": (_num(lo=1e-9, hi=0.999999), 0.2),
        "epochs_per_batch": (_int(lo=1), 150),
        "batch_len": (_int(lo=1), 100),
        "lr": (_num(lo=0.0), 0.001),
        "stop_reward": (_num(), -0.1),
        "max_updates": (_int(lo=1), 3000),
        "advantage_norm": (_bool, True),
        "episode_s": (_num(lo=1e-9), 300.0),
        "reset_each_episode": (_bool, False),
        "value_bound": (_num(lo=1e-9), 200.0),
        "hidden": (_numlist(), [1024, 512, 512, 512, 512, 512]),
        "mu_init": (_num(lo=1e-6, hi=1 - 1e-6), 0.5),
        "sigma_init": (_num(lo=1e-6, hi=1 - 1e-6), 0.15),
        "seed": (_int(lo=0), 0),
    },
    "output": {
        "dir": (_str(), "runs/out"),
        "trace_t_stride": (_int(lo=1), 1),
        "trace_x_stride": (_int(lo=1), 1),
    },
}


@dataclass
class RunConfig:
    raw: dict

    # resolved objects
    @property
    def traffic(self) -> TrafficParams:
        t = self.raw["traffic"]
        return TrafficParams(
            L=t["road_length_m"],
            l=t["vehicle_length_m"],
            q_in=t["inflow_veh_per_hour"] / 3600.0,
            alpha=t["acc_penetration"],
            tau_acc=t["tau_acc_s"],
            tau_m=t["tau_manual_s"],
            h_m=t["manual_time_gap_s"],
            h_acc_bar=t["acc_time_gap_setpoint_s"],
            v_f=t["free_flow_speed_m_s"],
            D=self.raw["scenario"]["delay_actual_s"],
            h_min=t["h_min_s"],
            h_max=t["h_max_s"],
        )

    @property
    def hyper(self) -> PpoHyper:
        tr = self.raw["training"]
        return PpoHyper(
            gamma=tr["gamma"], clip_eps=tr["clip_eps"],
            epochs_per_batch=tr["epochs_per_batch"], batch_len=tr["batch_len"],
            lr=tr["lr"], stop_reward=tr["stop_reward"],
            max_updates=tr["max_updates"], advantage_norm=tr["advantage_norm"],
            episode_s=tr["episode_s"],
            reset_each_episode=tr["reset_each_episode"],
        )

    def __getitem__(self, key):
        return self.raw[key]

    def snapshot_json(self) -> str:
        return json.dumps({"schema": CONFIG_SCHEMA_VERSION, **self.raw},
                          indent=2, sort_keys=True)


def _validate(data: dict) -> dict:
    if not isinstance(data, dict):
        raise ConfigError("top level of the config must be a mapping")
    out = {}
    for section, keys in SCHEMA.items():
        src = data.get(section, {})
        if not isinstance(src, dict):
            raise ConfigError(f"{section}: expected a mapping")
        unknown = set(src) - set(keys)
        if unknown:
            raise ConfigError(
                f"{section}: unknown key(s) {sorted(unknown)}; known keys are "
                f"{sorted(keys)}")
        sec = {}
        for key, (check, default) in keys.items():
            if key in src:
                sec[key] = check(src[key], f"{section}.{key}")
            else:
                sec[key] = default
        out[section] = sec
    unknown_sections = set(data) - set(SCHEMA)
    if unknown_sections:
        raise ConfigError(f"unknown config section(s) {sorted(unknown_sections)}; "
                          f"known sections are {sorted(SCHEMA)}")
    # cross-field defaults
    if out["grid"]["worst_case_speed_m_s"] is None:
        out["grid"]["worst_case_speed_m_s"] = out["traffic"]["free_flow_speed_m_s"]
    if out["scenario"]["delay_assumed_s"] is None:
        out["scenario"]["delay_assumed_s"] = out["scenario"]["delay_actual_s"]
    if out["scenario"]["alpha_noise_mean"] is None:
        out["scenario"]["alpha_noise_mean"] = out["traffic"]["acc_penetration"]
    dt = out["grid"]["dt_s"]
    for which in ("delay_actual_s", "delay_assumed_s"):
        dval = out["scenario"][which]
        if abs(dval / dt - round(dval / dt)) > 1e-9:
            raise ConfigError(
                f"scenario.{which}: {dval} s is not a multiple of grid.dt_s = {dt} s")
    return out


def resolve_overrides(environ=None) -> dict:
    """Collect ACCWAVE_SECTION__KEY environment overrides as a nested dict."""
    environ = os.environ if environ is None else environ
    nested: dict = {}
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        path = name[len(ENV_PREFIX):].lower()
        if "__" not in path:
            continue
        section, key = path.split("__", 1)
        nested.setdefault(section, {})[key] = yaml.safe_load(value)
    return nested


def load_config(path, environ=None, overrides: dict | None = None) -> RunConfig:
    """Read, override and validate a YAML config file."""
    with open(path) as f:
        data = yaml.safe_load(f) or {}
    for source in (resolve_overrides(environ), overrides or {}):
        for section, keys in source.items():
            data.setdefault(section, {})
            if not isinstance(data[section], dict):
                raise ConfigError(f"{section}: expected a mapping")
            data[section].update(keys)
    return RunConfig(raw=_validate(data))
