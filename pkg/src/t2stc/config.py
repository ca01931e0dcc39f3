"""
Experiment configuration: a flat ``key = value`` document with dotted
sections, parsed into frozen dataclasses.

Example::

    preset = duffing-track        # optional; later keys override it
    controller.kind = adaptive_t2_stc
    controller.gamma_f = 15
    mf.x.m1 = [-3.5, -2.5, -1.5, -0.5, 0.5, 1.5, 2.5]
    mf.x.sigma = [0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5]
    noise.snr_db = 20
    sim.x0 = [1, 0]

Values are JSON literals (numbers, lists, ``true``/``false``, ``null``) or
bare words, which are read as strings (so ``kind = none`` is the string
``"none"``; use ``null`` for a missing value).  ``#`` starts a comment.
"""

from __future__ import annotations

import dataclasses
import json
import math
import typing
from dataclasses import dataclass
from typing import Any, Optional

from .controller import (
    DEFAULT_RADII, STATE_MF_MEANS, STATE_MF_SIGMA, SURFACE1_MF_MEANS, SURFACE1_MF_SIGMA,
    SURFACE2_MF_MEANS, SURFACE2_MF_SIGMA,
)
from .plant import PLANT_PRESETS
from .sim import CONTROLLER_KINDS


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending key when known."""

    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass(frozen=True)
class PlantConfig:
    preset: str = "duffing"
    order: int = 2
    f: str = ""
    delta_f: str = ""
    disturbance: str = ""


@dataclass(frozen=True)
class ControllerConfig:
    kind: str = "adaptive_t2_stc"
    lam: float = 10.0
    gamma_f: float = 15.0
    gamma_1: float = 10.0
    gamma_2: float = 6.0
    radii: Optional[tuple[float, ...]] = DEFAULT_RADII
    lambda1: float = 10.0
    lambda2: float = 10.0
    eta: float = 0.1
    k_switch: float = 3.0


@dataclass(frozen=True)
class MFConfig:
    m1: tuple[float, ...] = ()
    m2: tuple[float, ...] = ()
    sigma: tuple[float, ...] = ()

    @property
    def means(self):
        return tuple(zip(self.m1, self.m2))


def _mf(means, sigma) -> MFConfig:
    return MFConfig(tuple(float(a) for a, _ in means), tuple(float(b) for _, b in means),
                    tuple(float(sigma) for _ in means))


@dataclass(frozen=True)
class MFTables:
    x: MFConfig = _mf(STATE_MF_MEANS, STATE_MF_SIGMA)
    s1: MFConfig = _mf(SURFACE1_MF_MEANS, SURFACE1_MF_SIGMA)
    s2: MFConfig = _mf(SURFACE2_MF_MEANS, SURFACE2_MF_SIGMA)


@dataclass(frozen=True)
class ReferenceConfig:
    amplitude: float = math.pi / 3.0
    coefs: tuple[float, ...] = (1.0, 0.3)
    freqs: tuple[float, ...] = (1.0, 3.0)


@dataclass(frozen=True)
class NoiseConfig:
    snr_db: Optional[float] = 20.0
    seed: int = 0


@dataclass(frozen=True)
class SimSettings:
    t_end: float = 20.0
    h: float = 1e-3
    x0: tuple[float, ...] = (1.0, 0.0)
    decimate: int = 1
    window: tuple[float, ...] = (10.0, 20.0)
    band: float = 0.05


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"
    long_format: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    plant: PlantConfig = PlantConfig()
    controller: ControllerConfig = ControllerConfig()
    mf: MFTables = MFTables()
    reference: ReferenceConfig = ReferenceConfig()
    noise: NoiseConfig = NoiseConfig()
    sim: SimSettings = SimSettings()
    output: OutputConfig = OutputConfig()

    def replace(self, **dotted) -> "ExperimentConfig":
        """Copy with dotted-key overrides, e.g. ``replace(**{"sim.t_end": 5.0})``."""
        return build(dotted, self)


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

PRESETS: dict[str, ExperimentConfig] = {
    "duffing-track": ExperimentConfig(noise=NoiseConfig(20.0, 0)),
    "duffing-free": ExperimentConfig(
        controller=ControllerConfig(kind="none"),
        noise=NoiseConfig(None, 0),
        sim=SimSettings(t_end=100.0, x0=(0.1, 0.0), window=(0.0, 100.0)),
    ),
    "duffing-doublewell-free": ExperimentConfig(
        plant=PlantConfig(preset="duffing-doublewell"),
        controller=ControllerConfig(kind="none"),
        noise=NoiseConfig(None, 0),
        sim=SimSettings(t_end=100.0, x0=(0.1, 0.0), window=(0.0, 100.0)),
    ),
}

REQUIRED_KEYS = ("plant.preset", "controller.kind", "sim.t_end", "sim.x0")


# ---------------------------------------------------------------------------
# Flatten / build
# ---------------------------------------------------------------------------

def flatten(obj, prefix: str = "") -> dict[str, Any]:
    out: dict[str, Any] = {}
    for f in dataclasses.fields(obj):
        v = getattr(obj, f.name)
        key = prefix + _key_name(f.name)
        if dataclasses.is_dataclass(v):
            out.update(flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _key_name(attr: str) -> str:
    return "lambda" if attr == "lam" else attr


def _attr_name(key: str) -> str:
    return "lam" if key == "lambda" else key


def _coerce(value, tp, path):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union:
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(value, inner[0], path)
    if origin is tuple:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            value = [value]
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"expected a list, got {value!r}", path)
        return tuple(_coerce(v, args[0], path) for v in value)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"expected true/false, got {value!r}", path)
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
            raise ConfigError(f"expected an integer, got {value!r}", path)
        return int(value)
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", path)
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", path)
        return value
    raise ConfigError(f"unsupported field type {tp}", path)


def _build_exact(flat: dict[str, Any], cls, prefix: str):
    hints = typing.get_type_hints(cls)
    kwargs = {}
    for f in dataclasses.fields(cls):
        key = prefix + _key_name(f.name)
        tp = hints[f.name]
        if dataclasses.is_dataclass(tp):
            kwargs[f.name] = _build_exact(flat, tp, key + ".")
        else:
            kwargs[f.name] = _coerce(flat[key], tp, key)
    return cls(**kwargs)


def build(flat: dict[str, Any], base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    """Config from dotted keys; keys not given are taken from ``base`` (default: built-in defaults)."""
    merged = flatten(ExperimentConfig() if base is None else base)
    unknown = sorted(set(flat) - set(merged))
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}", unknown[0])
    merged.update(flat)
    return _build_exact(merged, ExperimentConfig, "")


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------

def _parse_value(text: str, path: str):
    text = text.strip()
    if not text:
        raise ConfigError("missing value", path)
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    if text[0] in "[{\"" or any(c.isspace() for c in text):
        raise ConfigError(f"cannot parse value {text!r}", path)
    return text


def _strip_comment(line: str) -> str:
    in_str = False
    for i, ch in enumerate(line):
        if ch == '"':
            in_str = not in_str
        elif ch == "#" and not in_str:
            return line[:i]
    return line


_KNOWN_KEYS = frozenset(flatten(ExperimentConfig()))


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a config document."""
    flat: dict[str, Any] = {}
    base: Optional[ExperimentConfig] = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in flat or (key == "preset" and base is not None):
            raise ConfigError(f"line {lineno}: duplicate key", key)
        if key != "preset" and key not in _KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key", key)
        v = _parse_value(value, f"line {lineno}: {key}")
        if key == "preset":
            if v not in PRESETS:
                raise ConfigError(f"unknown preset {v!r}; choose from {sorted(PRESETS)}", key)
            base = PRESETS[v]
            continue
        flat[key] = v

    if base is None:
        missing = [k for k in REQUIRED_KEYS if k not in flat]
        if missing:
            raise ConfigError(f"missing required field(s): {', '.join(missing)}")
    cfg = build(flat, base)
    validate(cfg)
    return cfg


def _format_value(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, tuple):
        v = list(v)
    return json.dumps(v)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Document that :func:`parse_config` maps back to ``cfg`` exactly."""
    lines = [f"{k} = {_format_value(v)}" for k, v in flatten(cfg).items()]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def _check_mf(mf: MFConfig, name: str):
    path = f"mf.{name}"
    if not mf.m1:
        raise ConfigError("needs at least one set", path)
    if not (len(mf.m1) == len(mf.m2) == len(mf.sigma)):
        raise ConfigError("m1, m2 and sigma must have the same length", path)
    for i, (a, b, sg) in enumerate(zip(mf.m1, mf.m2, mf.sigma)):
        if a > b:
            raise ConfigError(f"set {i + 1} has m1 ({a}) > m2 ({b})", f"{path}[{i}]")
        if not sg > 0:
            raise ConfigError(f"set {i + 1} has non-positive sigma ({sg})", f"{path}[{i}]")


def validate(cfg: ExperimentConfig) -> None:
    p = cfg.plant
    if p.preset not in PLANT_PRESETS and p.preset != "custom":
        raise ConfigError(f"unknown plant {p.preset!r}", "plant.preset")
    if p.preset == "custom" and not p.f:
        raise ConfigError("custom plant needs plant.f", "plant.f")
    if p.order < 2:
        raise ConfigError("order must be >= 2", "plant.order")

    c = cfg.controller
    if c.kind not in CONTROLLER_KINDS:
        raise ConfigError(f"unknown kind {c.kind!r}; choose from {CONTROLLER_KINDS}", "controller.kind")
    for name in ("lam", "gamma_f", "gamma_1", "gamma_2", "lambda1", "lambda2", "eta", "k_switch"):
        if not getattr(c, name) > 0:
            raise ConfigError("must be positive", f"controller.{_key_name(name)}")
    if c.radii is not None and (len(c.radii) != 3 or min(c.radii) < 0):
        raise ConfigError("needs three non-negative radii", "controller.radii")

    _check_mf(cfg.mf.x, "x")
    _check_mf(cfg.mf.s1, "s1")
    _check_mf(cfg.mf.s2, "s2")

    r = cfg.reference
    if len(r.coefs) != len(r.freqs):
        raise ConfigError("coefs and freqs must have the same length", "reference")

    if not 0 <= cfg.noise.seed < 2 ** 64:
        raise ConfigError("must be an unsigned 64-bit integer", "noise.seed")

    s = cfg.sim
    order = 2 if p.preset != "custom" else p.order
    if len(s.x0) != order:
        raise ConfigError(f"needs {order} entries", "sim.x0")
    if not 0 < s.h <= 0.01:
        raise ConfigError("must lie in (0, 0.01]", "sim.h")
    if not s.t_end > 0:
        raise ConfigError("must be positive", "sim.t_end")
    if s.decimate < 1:
        raise ConfigError("must be >= 1", "sim.decimate")
    if len(s.window) != 2 or not s.window[0] < s.window[1]:
        raise ConfigError("needs [t_a, t_b] with t_a < t_b", "sim.window")
    if not s.band > 0:
        raise ConfigError("must be positive", "sim.band")
