"""Run configuration: a JSON document with one section per model component."""

from __future__ import annotations

import dataclasses
import json
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from .channel import ChannelModel
from .decoy import PIPELINE_METHODS, ProtocolParams, SecurityBudget
from .numerics import DomainError
from .optimizer import OptimizationSpace, OptimizerConfig
from .tail_bounds import MethodTag

DEFAULT_CONFIG = "table1.json"


class ConfigError(ValueError):
    """A configuration value is missing, mistyped or out of range.

    Attributes:
        field: dotted path of the offending entry, e.g. ``protocol.mu``.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class Sweep:
    L_start: float = 0.0
    L_end: float = 100.0
    L_step: float = 25.0

    def __post_init__(self):
        if self.L_start < 0:
            raise DomainError(f"L_start must be nonnegative, got {self.L_start}")
        if self.L_start > self.L_end:
            raise DomainError(f"need L_start <= L_end, got {self.L_start} > {self.L_end}")
        if not self.L_step > 0:
            raise DomainError(f"L_step must be positive, got {self.L_step}")

    def lengths(self) -> list[float]:
        """Grid from ``L_start`` to ``L_end`` inclusive, free of accumulated drift."""
        count = int(math.floor((self.L_end - self.L_start) / self.L_step + 1e-9))
        return [self.L_start + i * self.L_step for i in range(count + 1)]


@dataclass(frozen=True)
class RunConfig:
    channel: ChannelModel = field(default_factory=ChannelModel)
    protocol: ProtocolParams = field(default_factory=lambda: ProtocolParams(
        mu=0.4, nu=0.1, p_mu=0.7, p_nu=0.2, p_z=0.9, q_z=0.9))
    budget: SecurityBudget = field(default_factory=SecurityBudget)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    space: OptimizationSpace = field(default_factory=OptimizationSpace)
    sweep: Sweep = field(default_factory=Sweep)
    methods: tuple[MethodTag, ...] = (MethodTag.OURS_NUMERIC, MethodTag.OURS_ANALYTIC,
                                      MethodTag.CURTY, MethodTag.LIM)

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name == "methods":
                out[f.name] = [m.value for m in value]
            else:
                out[f.name] = dataclasses.asdict(value)
        return out


_SECTIONS = {
    "channel": ChannelModel,
    "protocol": ProtocolParams,
    "budget": SecurityBudget,
    "optimizer": OptimizerConfig,
    "space": OptimizationSpace,
    "sweep": Sweep,
}


def _coerce(path: str, kind: Any, value: Any) -> Any:
    """Check one JSON scalar against the annotated field type."""
    kind = str(kind)
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return int(value)
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    if kind.startswith("tuple"):
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            raise ConfigError(path, f"expected a two-element list, got {value!r}")
        return tuple(_coerce(f"{path}[{i}]", "float", v) for i, v in enumerate(value))
    raise ConfigError(path, f"unsupported field type {kind}")


def _blame(section: str, fields: dict, message: str) -> str:
    """Dotted path of the field named earliest in a validator message."""
    hits = [(m.start(), k) for k in fields if (m := re.search(rf"\b{re.escape(k)}\b", message))]
    return f"{section}.{min(hits)[1]}" if hits else section


def _section(name: str, cls: type, raw: Any, base: Any) -> Any:
    if not isinstance(raw, dict):
        raise ConfigError(name, "expected an object")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ConfigError(f"{name}.{unknown[0]}", "unknown field")
    values = {k: _coerce(f"{name}.{k}", known[k].type, v) for k, v in raw.items()}
    try:
        return dataclasses.replace(base, **values)
    except DomainError as exc:
        raise ConfigError(_blame(name, known, str(exc)), str(exc)) from None


def _methods(raw: Any) -> tuple[MethodTag, ...]:
    if not isinstance(raw, list) or not raw:
        raise ConfigError("methods", "expected a nonempty list of method names")
    out = []
    for i, name in enumerate(raw):
        try:
            tag = MethodTag.parse(name)
        except (DomainError, ValueError):
            raise ConfigError(f"methods[{i}]", f"unknown method {name!r}") from None
        if tag not in PIPELINE_METHODS:
            raise ConfigError(f"methods[{i}]", f"method {tag.value} cannot drive the key-rate pipeline")
        out.append(tag)
    return tuple(out)


def parse_config(raw: Any, base: RunConfig | None = None) -> RunConfig:
    """Build a :class:`RunConfig` from parsed JSON.

    Missing sections and fields keep the defaults; unknown keys are errors.
    """
    base = base or RunConfig()
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "expected a JSON object")
    allowed = set(_SECTIONS) | {"methods"}
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(unknown[0], "unknown section")
    values = {}
    for name, cls in _SECTIONS.items():
        if name in raw:
            values[name] = _section(name, cls, raw[name], getattr(base, name))
    if "methods" in raw:
        values["methods"] = _methods(raw["methods"])
    return dataclasses.replace(base, **values)


def load_config(path: str | Path | None = None) -> RunConfig:
    """Read a config file; ``None`` loads the bundled defaults."""
    try:
        if path is None:
            text = resources.files("finitekey").joinpath("data").joinpath(DEFAULT_CONFIG).read_text()
        else:
            text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read config: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return parse_config(raw)
