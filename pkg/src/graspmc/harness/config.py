"""Experiment configuration: flat ``section.key = value`` text files.

Values are parsed as JSON when possible (numbers, booleans, lists, quoted
strings) and kept as bare strings otherwise.  ``#`` starts a comment.  Any
``target.<param>`` key other than ``target.name`` is forwarded to the target
factory.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from graspmc.gdmc import DartingParams
from graspmc.kameleon import KameleonParams
from graspmc.kernel import KernelParams
from graspmc.rwmh import BIAS_LEVELS, RwParams
from graspmc.targets import TARGETS

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parent.parent / "configs" / "default.cfg"

DEFAULTS: dict = {
    "target.name": "tri_mode",
    "demos.m": 5,
    "demos.seeds": None,
    "demos.budget": 500,
    "sketch.count": 1000,
    "sketch.biases": list(BIAS_LEVELS),
    "run.iterations": 1000,
    "run.burn_in": 100,
    "run.seeds": [0],
    "run.workers": 1,
    "sampler.gamma": 1e-5,
    "sampler.n": 100,
    "sampler.nu": 2.38 / math.sqrt(6.0),
    "sampler.eta": 1.0,
    "sampler.sigma": 0.16,
    "sampler.ell": 0.5,
    "darting.p_check": 0.5,
    "darting.omega": 0.7,
    "darting.acceptance_mode": "standard",
    "darting.literal_volume": False,
    "darting.assign_c": 10.0,
    "rw.pos_std": 0.05,
    "rw.kappa": 50.0,
    "sweep.c_values": None,
    "sweep.c_start": 0.0,
    "sweep.c_split": 0.1,
    "sweep.c_end": 0.2,
    "sweep.step_low": 0.005,
    "sweep.step_high": 0.01,
    "output.dir": "out",
}

_TYPES = {
    "demos.m": int, "demos.budget": int, "sketch.count": int, "run.iterations": int,
    "run.burn_in": int, "run.workers": int, "sampler.n": int,
    "darting.literal_volume": bool,
}


class ConfigError(ValueError):
    pass


def _parse_value(key: str, text: str):
    text = text.strip()
    if text == "":
        raise ConfigError(f"config key {key!r} has an empty value")
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        if text[0] in "[{\"":
            raise ConfigError(f"config key {key!r}: cannot parse value {text!r}") from None
        low = text.lower()
        if low in ("true", "false"):
            return low == "true"
        return text


def _coerce(key: str, value):
    if value is None:
        return None
    default = DEFAULTS.get(key)
    want = _TYPES.get(key)
    try:
        if want is bool:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if want is int:
            if isinstance(value, bool) or float(value) != int(value):
                raise TypeError
            return int(value)
        if isinstance(default, float):
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if isinstance(default, list) or key in ("sweep.c_values", "demos.seeds"):
            if not isinstance(value, list):
                raise TypeError
            return value
        if isinstance(default, str) and not isinstance(value, str):
            raise TypeError
    except (TypeError, ValueError):
        raise ConfigError(f"config key {key!r}: invalid value {value!r}") from None
    return value


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: missing key")
        if key in values:
            raise ConfigError(f"config key {key!r} given twice")
        values[key] = _parse_value(key, val)
    return values


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=lambda: dict(DEFAULTS))
    target_params: dict = field(default_factory=dict)

    @classmethod
    def from_mapping(cls, mapping: dict) -> ExperimentConfig:
        values = dict(DEFAULTS)
        tparams = {}
        for key, val in mapping.items():
            if key.startswith("target.") and key != "target.name":
                tparams[key.split(".", 1)[1]] = val
                continue
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = _coerce(key, val)
        cfg = cls(values, tparams)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        return cls.from_mapping(parse_config_text(path.read_text()))

    def __getitem__(self, key):
        return self.values[key]

    def replace(self, **updates) -> ExperimentConfig:
        flat = self.to_flat()
        flat.update({k.replace("__", "."): v for k, v in updates.items()})
        return ExperimentConfig.from_mapping(flat)

    def validate(self) -> None:
        v = self.values
        name = v["target.name"]
        if name not in TARGETS:
            raise ConfigError(f"config key 'target.name': unknown target {name!r}; "
                              f"available: {', '.join(sorted(TARGETS))}")
        for b in v["sketch.biases"]:
            if b not in BIAS_LEVELS:
                raise ConfigError(f"config key 'sketch.biases': unknown bias {b!r}")
        if v["demos.m"] < 1:
            raise ConfigError("config key 'demos.m' must be >= 1")
        if not v["run.seeds"] or not all(isinstance(s, int) for s in v["run.seeds"]):
            raise ConfigError("config key 'run.seeds' must be a non-empty list of integers")
        for key in ("sampler.gamma", "sampler.nu", "sampler.sigma", "sampler.ell",
                    "darting.omega", "rw.pos_std"):
            if not v[key] > 0:
                raise ConfigError(f"config key {key!r} must be > 0")
        if not 0.0 <= v["darting.p_check"] <= 1.0:
            raise ConfigError("config key 'darting.p_check' must lie in [0, 1]")
        if v["darting.acceptance_mode"] not in ("standard", "paper_literal"):
            raise ConfigError("config key 'darting.acceptance_mode' must be standard or paper_literal")
        if any(c < 0 for c in self.c_values()):
            raise ConfigError("config key 'sweep.c_values' must be >= 0")
        try:
            self.make_target()
        except TypeError as exc:
            raise ConfigError(f"target parameters for {name!r}: {exc}") from None

    # -- derived objects --

    def to_flat(self) -> dict:
        flat = dict(self.values)
        flat.update({f"target.{k}": v for k, v in self.target_params.items()})
        return flat

    def to_text(self) -> str:
        return "".join(f"{k} = {json.dumps(v)}\n" for k, v in sorted(self.to_flat().items()))

    def make_target(self):
        return TARGETS[self["target.name"]].factory(**self.target_params)

    def seed_positions(self):
        seeds = self["demos.seeds"]
        return seeds if seeds is not None else TARGETS[self["target.name"]].seed_positions

    def c_values(self) -> list[float]:
        if self["sweep.c_values"] is not None:
            return [float(c) for c in self["sweep.c_values"]]
        return c_grid(self["sweep.c_start"], self["sweep.c_split"], self["sweep.c_end"],
                      self["sweep.step_low"], self["sweep.step_high"])

    def kameleon_params(self, c: float) -> KameleonParams:
        v = self.values
        return KameleonParams(gamma=v["sampler.gamma"], nu=v["sampler.nu"], n=v["sampler.n"],
                              burn_in=v["run.burn_in"], iterations=v["run.iterations"],
                              kernel=KernelParams(v["sampler.sigma"], v["sampler.ell"], c),
                              eta=v["sampler.eta"])

    def darting_params(self) -> DartingParams:
        v = self.values
        return DartingParams(v["darting.p_check"], v["darting.omega"],
                             v["darting.acceptance_mode"], v["darting.literal_volume"],
                             v["darting.assign_c"])

    def rw_params(self) -> RwParams:
        return RwParams.isotropic(self["rw.pos_std"], self["rw.kappa"])


def c_grid(start: float, split: float, end: float, step_low: float, step_high: float) -> list[float]:
    """``start..split`` in ``step_low`` increments, then ``split..end`` in
    ``step_high`` increments (``split`` counted once), rounded to 10 digits."""
    lo = np.arange(0, round((split - start) / step_low) + 1) * step_low + start
    hi = np.arange(1, round((end - split) / step_high) + 1) * step_high + split
    return [round(float(c), 10) for c in np.concatenate([lo, hi])]


def default_config_text() -> str:
    return ExperimentConfig().to_text()
