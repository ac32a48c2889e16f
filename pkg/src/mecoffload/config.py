"""Experiment configuration: YAML with explicit unit suffixes.

Values are written as plain numbers (SI base units: seconds, hertz, nats)
or as "NUMBER UNIT" strings such as "20 ms", "0.5 GHz", "4e4 nats". Data
sizes given in bits are converted by ln 2. Unknown keys anywhere in the
file are rejected to catch typos.
"""
import math
from dataclasses import dataclass, field, replace

import yaml

from .channel import Channel, make_channel
from .errors import ConfigError
from .model import EdgeProfile, RadioProfile, TaskProfile

LN2 = math.log(2.0)

_TIME_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9}
_FREQ_UNITS = {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9}
_DATA_UNITS = {"nat": 1.0, "nats": 1.0, "bit": LN2, "bits": LN2}
_UNIT_TABLES = {"time": _TIME_UNITS, "freq": _FREQ_UNITS, "data": _DATA_UNITS, "plain": {}}

SWEEP_PARAMETERS = ("data", "deadline", "block", "edge_cpu")
_SWEEP_KIND = {"data": "data", "deadline": "time", "block": "time", "edge_cpu": "freq"}


def parse_quantity(value, kind: str, where: str) -> float:
    """A raw number (already SI) or a 'NUMBER UNIT' string."""
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a quantity, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{where}: expected a number or 'NUMBER UNIT' string, got {value!r}")
    text = value.strip()
    if text.lower() in ("inf", "infinity"):
        return math.inf
    parts = text.split()
    if len(parts) > 2:
        raise ConfigError(f"{where}: cannot parse quantity {value!r}")
    try:
        number = float(parts[0])
    except ValueError:
        raise ConfigError(f"{where}: cannot parse number in {value!r}") from None
    if len(parts) == 1:
        return number
    table = _UNIT_TABLES[kind]
    factor = table.get(parts[1])
    if factor is None:
        allowed = ", ".join(sorted(table)) or "none (dimensionless)"
        raise ConfigError(f"{where}: unknown unit {parts[1]!r} (allowed: {allowed})")
    return number * factor


def _as_int(value, where: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{where}: must be >= {minimum}, got {value}")
    return value


def _take(section: dict, where: str, spec: dict) -> dict:
    """Pull typed fields out of a mapping, rejecting anything unexpected."""
    if not isinstance(section, dict):
        raise ConfigError(f"{where}: expected a mapping")
    unknown = set(section) - set(spec)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    out = {}
    for key, (kind, required) in spec.items():
        if key not in section:
            if required:
                raise ConfigError(f"{where}: missing required key {key!r}")
            out[key] = None
            continue
        raw = section[key]
        if kind == "int":
            out[key] = _as_int(raw, f"{where}.{key}", minimum=1)
        elif kind == "raw":
            out[key] = raw
        else:
            out[key] = parse_quantity(raw, kind, f"{where}.{key}")
    return out


@dataclass(frozen=True)
class SweepSpec:
    """Which parameter to sweep and where; values are SI."""

    parameter: str
    values: tuple
    gain_means: tuple = ()


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully normalized experiment settings (SI units)."""

    deadline: float
    data: float
    cycles_per_nat: float
    local_cpu_cap: float
    cpu_coeff: float
    edge_cpu: float
    bandwidth: float
    block: float
    gain_mean: float
    h_min: float | None = None
    h_max: float | None = None
    grid_size: int = 513
    node_count: int = 64
    tol: float | None = None  # outer search width (nats); default data * 1e-5
    episodes: int = 10_000
    seed: int = 1
    sweep: SweepSpec | None = None

    def task(self) -> TaskProfile:
        return TaskProfile(deadline=self.deadline, data=self.data,
                           cycles_per_nat=self.cycles_per_nat,
                           local_cpu_cap=self.local_cpu_cap, cpu_coeff=self.cpu_coeff)

    def edge(self) -> EdgeProfile:
        return EdgeProfile(cpu=self.edge_cpu)

    def radio(self) -> RadioProfile:
        return RadioProfile(bandwidth=self.bandwidth, block=self.block)

    def channel(self) -> Channel:
        return make_channel(self.gain_mean, self.h_min, self.h_max, self.node_count)

    def outer_tol(self) -> float:
        return self.data * 1e-5 if self.tol is None else self.tol

    def with_overrides(self, seed=None, grid=None, nodes=None, episodes=None, tol=None):
        changes = {}
        if seed is not None:
            changes["seed"] = int(seed)
        if grid is not None:
            changes["grid_size"] = int(grid)
        if nodes is not None:
            changes["node_count"] = int(nodes)
        if episodes is not None:
            changes["episodes"] = int(episodes)
        if tol is not None:
            changes["tol"] = float(tol)
        return replace(self, **changes) if changes else self


def default_config() -> ExperimentConfig:
    """The reference parameter set used throughout the experiments."""
    return ExperimentConfig(deadline=0.02, data=4e4, cycles_per_nat=40.0,
                            local_cpu_cap=0.5e9, cpu_coeff=1e-23, edge_cpu=1e9,
                            bandwidth=1e6, block=0.002, gain_mean=100.0)


def _parse_sweep(raw, cfg_kwargs) -> SweepSpec:
    fields = _take(raw, "sweep", {
        "parameter": ("raw", True),
        "start": ("raw", False),
        "stop": ("raw", False),
        "count": ("raw", False),
        "step": ("raw", False),
        "values": ("raw", False),
        "gain_means": ("raw", False),
    })
    parameter = fields["parameter"]
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError(f"sweep.parameter must be one of {SWEEP_PARAMETERS}, got {parameter!r}")
    kind = _SWEEP_KIND[parameter]
    if fields["values"] is not None:
        if not isinstance(fields["values"], list) or not fields["values"]:
            raise ConfigError("sweep.values must be a nonempty list")
        values = [parse_quantity(v, kind, "sweep.values") for v in fields["values"]]
        if fields["start"] is not None or fields["stop"] is not None:
            raise ConfigError("sweep: give either values or start/stop, not both")
    else:
        if fields["start"] is None or fields["stop"] is None:
            raise ConfigError("sweep: needs either values or start+stop")
        start = parse_quantity(fields["start"], kind, "sweep.start")
        stop = parse_quantity(fields["stop"], kind, "sweep.stop")
        if fields["count"] is not None and fields["step"] is not None:
            raise ConfigError("sweep: give count or step, not both")
        if fields["count"] is not None:
            count = _as_int(fields["count"], "sweep.count", minimum=1)
        elif fields["step"] is not None:
            step = parse_quantity(fields["step"], kind, "sweep.step")
            if step <= 0 or stop < start:
                raise ConfigError("sweep: step must be positive and stop >= start")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            stop = start + (count - 1) * step
        else:
            raise ConfigError("sweep: start/stop needs count or step")
        if count == 1:
            values = [start]
        else:
            values = [start + i * (stop - start) / (count - 1) for i in range(count)]
    gain_means = ()
    if fields["gain_means"] is not None:
        if parameter != "edge_cpu":
            raise ConfigError("sweep.gain_means is only valid for the edge_cpu sweep")
        if not isinstance(fields["gain_means"], list) or not fields["gain_means"]:
            raise ConfigError("sweep.gain_means must be a nonempty list")
        gain_means = tuple(parse_quantity(v, "plain", "sweep.gain_means")
                           for v in fields["gain_means"])
    elif parameter == "edge_cpu":
        gain_means = (cfg_kwargs["gain_mean"],)
    if any(v <= 0 for v in values) or any(v <= 0 for v in gain_means):
        raise ConfigError("sweep values must be positive")
    return SweepSpec(parameter=parameter, values=tuple(values), gain_means=gain_means)


def parse_config_text(text: str) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(raw) - {"task", "edge", "radio", "channel", "numerics", "sweep"}
    if unknown:
        raise ConfigError(f"unknown top-level sections {sorted(unknown)}")

    task = _take(raw.get("task", {}), "task", {
        "deadline": ("time", True), "data": ("data", True),
        "cycles_per_nat": ("plain", True), "local_cpu_cap": ("freq", True),
        "cpu_coeff": ("plain", True),
    })
    edge = _take(raw.get("edge", {}), "edge", {"cpu": ("freq", True)})
    radio = _take(raw.get("radio", {}), "radio",
                  {"bandwidth": ("freq", True), "block": ("time", True)})
    chan = _take(raw.get("channel", {}), "channel", {
        "mean": ("plain", True), "h_min": ("plain", False), "h_max": ("plain", False),
    })
    numerics = _take(raw.get("numerics", {}), "numerics", {
        "grid_size": ("int", False), "node_count": ("int", False),
        "tol": ("data", False), "episodes": ("int", False), "seed": ("raw", False),
    })

    kwargs = dict(deadline=task["deadline"], data=task["data"],
                  cycles_per_nat=task["cycles_per_nat"], local_cpu_cap=task["local_cpu_cap"],
                  cpu_coeff=task["cpu_coeff"], edge_cpu=edge["cpu"],
                  bandwidth=radio["bandwidth"], block=radio["block"],
                  gain_mean=chan["mean"], h_min=chan["h_min"], h_max=chan["h_max"])
    for name, value in kwargs.items():
        if name in ("h_min", "h_max"):
            continue
        if not (value > 0 and math.isfinite(value)):
            raise ConfigError(f"{name} must be positive and finite, got {value}")
    if kwargs["block"] > kwargs["deadline"]:
        raise ConfigError("radio.block must not exceed task.deadline")
    if numerics["grid_size"] is not None:
        if numerics["grid_size"] < 32:
            raise ConfigError("numerics.grid_size must be >= 32")
        kwargs["grid_size"] = numerics["grid_size"]
    if numerics["node_count"] is not None:
        if numerics["node_count"] < 8:
            raise ConfigError("numerics.node_count must be >= 8")
        kwargs["node_count"] = numerics["node_count"]
    if numerics["tol"] is not None:
        kwargs["tol"] = numerics["tol"]
    if numerics["episodes"] is not None:
        if numerics["episodes"] < 100:
            raise ConfigError("numerics.episodes must be >= 100")
        kwargs["episodes"] = numerics["episodes"]
    if numerics["seed"] is not None:
        kwargs["seed"] = _as_int(numerics["seed"], "numerics.seed", minimum=0)
    if "sweep" in raw:
        kwargs["sweep"] = _parse_sweep(raw["sweep"], kwargs)
    return ExperimentConfig(**kwargs)


def parse_config(path) -> ExperimentConfig:
    with open(path, "r") as fh:
        return parse_config_text(fh.read())


def serialize_config(cfg: ExperimentConfig) -> str:
    """Normalized SI snapshot; parsing it back yields the same settings."""
    out = {
        "task": {"deadline": cfg.deadline, "data": cfg.data,
                 "cycles_per_nat": cfg.cycles_per_nat, "local_cpu_cap": cfg.local_cpu_cap,
                 "cpu_coeff": cfg.cpu_coeff},
        "edge": {"cpu": cfg.edge_cpu},
        "radio": {"bandwidth": cfg.bandwidth, "block": cfg.block},
        "channel": {"mean": cfg.gain_mean},
        "numerics": {"grid_size": cfg.grid_size, "node_count": cfg.node_count,
                     "episodes": cfg.episodes, "seed": cfg.seed},
    }
    if cfg.h_min is not None:
        out["channel"]["h_min"] = cfg.h_min
    if cfg.h_max is not None:
        out["channel"]["h_max"] = cfg.h_max
    if cfg.tol is not None:
        out["numerics"]["tol"] = cfg.tol
    if cfg.sweep is not None:
        sweep = {"parameter": cfg.sweep.parameter, "values": list(cfg.sweep.values)}
        if cfg.sweep.parameter == "edge_cpu":
            sweep["gain_means"] = list(cfg.sweep.gain_means)
        out["sweep"] = sweep
    return yaml.safe_dump(out, sort_keys=True, default_flow_style=False)
