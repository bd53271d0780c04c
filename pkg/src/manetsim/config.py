"""Scenario configuration: parameter set for one simulation run."""

import dataclasses
from dataclasses import dataclass, field


class ConfigError(ValueError):
    """Raised when a scenario configuration is invalid."""


PROTOCOLS = ("FORP", "LBR", "MMBCR")


@dataclass
class ScenarioConfig:
    # topology / radio
    area: tuple = (1000.0, 1000.0)      # meters (width, height)
    node_count: int = 50
    tx_range: float = 250.0             # meters
    tpc: bool = False                   # transmission power control on/off

    # mobility (random waypoint, zero pause)
    v_max: float = 10.0                 # m/s
    min_speed: float = 0.01             # m/s; avoids permanently stuck nodes
    tick: float = 0.1                   # s; topology rebuilt every tick

    # traffic
    session_count: int = 15
    cbr_rate: float = 4.0               # data packets per second
    packet_size: int = 512              # bytes
    start_window: tuple = (1.0, 40.0)   # session start times drawn uniformly here
    buffer_cap: int = 64                # per-session buffered packets; oldest dropped

    # energy
    initial_battery: float = 1500.0     # Joules
    bitrate: float = 2.0e6              # bits/s
    beacon_interval: float = 1.0        # s

    # stop condition: exactly one of the two modes
    duration: float = 1000.0            # s; ignored when until_first_failure
    until_first_failure: bool = False
    max_duration: float = 20000.0       # safety cap for until_first_failure runs

    # routing / delay model
    protocol: str = "FORP"
    kappa: float = 0.5                  # contention coefficient in the delay model
    forwarding_overhead: float = 1.0e-3  # s per hop during route discovery
    discovery_retry_interval: float = 0.5  # s to wait after a failed discovery

    seed: int = 1

    def validate(self):
        w, h = self.area
        if w <= 0 or h <= 0:
            raise ConfigError(f"zero-area rectangle: {self.area}")
        if self.node_count < 2:
            raise ConfigError(f"need at least 2 nodes, got {self.node_count}")
        if self.tx_range <= 0:
            raise ConfigError("tx_range must be positive")
        if self.v_max <= 0:
            raise ConfigError("v_max must be positive")
        if not 0 < self.min_speed <= self.v_max:
            raise ConfigError("min_speed must lie in (0, v_max]")
        if self.tick <= 0:
            raise ConfigError("tick must be positive")
        if self.session_count < 0:
            raise ConfigError("session_count must be >= 0")
        if self.cbr_rate <= 0 or self.packet_size <= 0:
            raise ConfigError("cbr_rate and packet_size must be positive")
        if self.initial_battery <= 0:
            raise ConfigError("initial_battery must be positive")
        if self.bitrate <= 0:
            raise ConfigError("bitrate must be positive")
        if self.beacon_interval <= 0:
            raise ConfigError("beacon_interval must be positive")
        if not self.until_first_failure and self.duration <= 0:
            raise ConfigError("duration must be positive")
        if self.until_first_failure and self.max_duration <= 0:
            raise ConfigError("max_duration must be positive")
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"unknown protocol {self.protocol!r}")
        if self.kappa < 0:
            raise ConfigError("kappa must be >= 0")
        lo, hi = self.start_window
        if lo < 0 or hi < lo:
            raise ConfigError(f"bad start_window {self.start_window}")
        return self

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)


def set1_config(**overrides):
    """Experiment set 1: 1500 J per node, fixed 1000 s horizon."""
    cfg = ScenarioConfig(initial_battery=1500.0, duration=1000.0,
                         until_first_failure=False)
    return cfg.replace(**overrides)


def set2_config(**overrides):
    """Experiment set 2: 100 J per node, run until the first node dies."""
    cfg = ScenarioConfig(initial_battery=100.0, until_first_failure=True)
    return cfg.replace(**overrides)


# --- key = value config files -------------------------------------------------

_TUPLE_FIELDS = {"area", "start_window"}
_BOOL_FIELDS = {"tpc", "until_first_failure"}
_INT_FIELDS = {"node_count", "session_count", "packet_size", "buffer_cap", "seed"}
_STR_FIELDS = {"protocol"}


def save_config(cfg: ScenarioConfig, path):
    with open(path, "w") as f:
        for fld in dataclasses.fields(cfg):
            value = getattr(cfg, fld.name)
            if fld.name in _TUPLE_FIELDS:
                value = ",".join(repr(v) for v in value)
            f.write(f"{fld.name} = {value}\n")


def load_config(path) -> ScenarioConfig:
    values = {}
    field_names = {f.name for f in dataclasses.fields(ScenarioConfig)}
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, text = line.partition("=")
            key, text = key.strip(), text.strip()
            if key not in field_names:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _parse_value(key, text)
    return ScenarioConfig(**values).validate()


def _parse_value(key, text):
    if key in _TUPLE_FIELDS:
        return tuple(float(part) for part in text.split(","))
    if key in _BOOL_FIELDS:
        if text.lower() in ("true", "1", "on", "yes"):
            return True
        if text.lower() in ("false", "0", "off", "no"):
            return False
        raise ConfigError(f"bad boolean for {key}: {text!r}")
    if key in _INT_FIELDS:
        return int(text)
    if key in _STR_FIELDS:
        return text
    return float(text)
