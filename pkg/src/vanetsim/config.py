"""Scenario configuration: defaults, validation and a key = value file format."""
from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, fields
from pathlib import Path

PROTOCOLS = ("gpsr", "dgrp", "rdgr")
SECTION = "scenario"


class ConfigError(ValueError):
    """Invalid scenario configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class RdgrWeights:
    rho: float = 0.6
    omega: float = 0.4
    lam: float = 0.2

    def validate(self) -> None:
        for name in ("rho", "omega", "lam"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0.0:
                raise ConfigError(name, f"weight must be finite and >= 0, got {value}")
        if abs(self.rho + self.omega - 1.0) > 1e-9:
            raise ConfigError("rho", f"rho + omega must equal 1 (got {self.rho} + {self.omega})")
        if not self.rho > self.omega:
            raise ConfigError("rho", f"rho must exceed omega (got rho={self.rho}, omega={self.omega})")


@dataclass(frozen=True)
class ScenarioConfig:
    # geometry / mobility
    area_width: float = 1000.0
    area_height: float = 1000.0
    n_vehicles: int = 100
    v_min: float = 0.0
    v_max: float = 25.0
    horizontal_roads: int = 3
    vertical_roads: int = 3
    lanes_per_direction: int = 2
    lane_width: float = 3.5
    d_sec: float = 10.0
    follow_margin: float = 5.0
    lane_change_time: float = 2.0
    mobility_dt: float = 0.1
    # radio / beaconing
    tx_range: float = 250.0
    beacon_interval: float = 0.5
    neighbor_expiry: float = 1.0
    loss_p: float = 0.0
    per_hop_delay: float = 0.002
    # routing
    protocol: str = "rdgr"
    rho: float = 0.6
    omega: float = 0.4
    lam: float = 0.2
    horizon: float = 0.5
    ls_cap: float = 10.0
    d_floor: float = 1.0
    rdgr_progress_filter: bool = True
    # traffic
    n_senders: int = 40
    cbr_rate: float = 2.0
    packet_size: int = 512
    ttl_hops: int = 64
    deadline: float = 30.0
    carry_retry: float = 0.5
    # run control
    duration: float = 200.0
    warmup: float = 10.0
    seed: int = 1

    @property
    def weights(self) -> RdgrWeights:
        return RdgrWeights(self.rho, self.omega, self.lam)

    @property
    def effective_senders(self) -> int:
        """Sender count actually used; flows need disjoint endpoints."""
        return max(1, min(self.n_senders, self.n_vehicles // 2))

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def validate(self) -> "ScenarioConfig":
        def positive(name):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(name, f"must be > 0, got {value}")

        for name in ("area_width", "area_height", "lane_width", "d_sec", "mobility_dt",
                     "tx_range", "beacon_interval", "neighbor_expiry", "cbr_rate",
                     "deadline", "carry_retry", "duration", "ls_cap", "d_floor",
                     "lane_change_time"):
            positive(name)
        for name in ("n_vehicles", "horizontal_roads", "vertical_roads",
                     "lanes_per_direction", "n_senders", "ttl_hops", "packet_size"):
            if getattr(self, name) < 1:
                raise ConfigError(name, f"must be >= 1, got {getattr(self, name)}")
        if self.n_vehicles < 2:
            raise ConfigError("n_vehicles", "at least two vehicles are needed for a flow")
        if not 0.0 <= self.v_min <= self.v_max:
            raise ConfigError("v_min", f"need 0 <= v_min <= v_max, got {self.v_min}, {self.v_max}")
        if not 0.0 <= self.loss_p < 1.0:
            raise ConfigError("loss_p", f"must lie in [0, 1), got {self.loss_p}")
        for name in ("per_hop_delay", "horizon", "warmup", "follow_margin"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ConfigError(name, f"must be >= 0, got {value}")
        if self.mobility_dt > 1.0:
            raise ConfigError("mobility_dt", "must lie in (0, 1] s")
        if self.warmup >= self.duration:
            raise ConfigError("warmup", "must be shorter than duration")
        if self.protocol not in PROTOCOLS:
            raise ConfigError("protocol", f"must be one of {', '.join(PROTOCOLS)}, got {self.protocol!r}")
        self.weights.validate()
        return self


_FIELDS = {f.name: f for f in fields(ScenarioConfig)}


def _coerce(name: str, raw: str):
    kind = type(getattr(ScenarioConfig(), name))
    text = raw.strip()
    try:
        if kind is bool:
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(name, f"cannot parse {raw!r} as {kind.__name__}") from None


def parse_config(text: str, **overrides) -> ScenarioConfig:
    """Parse ``key = value`` text; a ``[scenario]`` header is optional."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    if not any(line.strip().startswith("[") for line in text.splitlines()):
        text = f"[{SECTION}]\n" + text
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<file>", str(exc).splitlines()[0]) from None
    extra_sections = [s for s in parser.sections() if s != SECTION]
    if extra_sections:
        raise ConfigError(extra_sections[0], f"unknown section, only [{SECTION}] is allowed")
    values = {}
    if parser.has_section(SECTION):
        for key, raw in parser.items(SECTION):
            if key not in _FIELDS:
                raise ConfigError(key, "unknown configuration key")
            values[key] = _coerce(key, raw)
    values.update(overrides)
    return ScenarioConfig(**values).validate()


def load_config(path: str | Path | None = None, **overrides) -> ScenarioConfig:
    if path is None:
        return parse_config("", **overrides)
    return parse_config(Path(path).read_text(), **overrides)


def dump_config(config: ScenarioConfig) -> str:
    lines = [f"[{SECTION}]"]
    for f in fields(config):
        value = getattr(config, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        else:
            value = repr(value) if isinstance(value, float) else str(value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def save_config(config: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(dump_config(config))
