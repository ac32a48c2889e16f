"""Deterministic physics of the offloading problem.

Task/edge/radio parameter bundles, the CPU and transmit energy formulas,
and the fading-block geometry (block count, last-block duration, and the
interval partition on which the offload objective is piecewise convex).
All quantities are SI: seconds, hertz, joules, nats.
"""
import math
from dataclasses import dataclass

from .errors import InfeasibleError

# Absolute slack (nats) for comparisons at interval boundaries; the ceiling in
# the block-count formula amplifies rounding at exact block edges.
EDGE_SLACK_NATS = 1e-9


def _require_positive(obj, **fields):
    for name, value in fields.items():
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
            raise ValueError(f"{type(obj).__name__}.{name} must be a positive finite number, got {value!r}")


@dataclass(frozen=True)
class TaskProfile:
    """A computation task plus the device CPU constants.

    deadline: maximal allowable latency T (s)
    data: input size D (nats)
    cycles_per_nat: CPU cycles per input nat (c0)
    local_cpu_cap: device CPU frequency ceiling (cycles/s)
    cpu_coeff: CPU energy coefficient (J*s^2/cycle^3)
    """

    deadline: float
    data: float
    cycles_per_nat: float
    local_cpu_cap: float
    cpu_coeff: float

    def __post_init__(self):
        _require_positive(self, deadline=self.deadline, data=self.data,
                          cycles_per_nat=self.cycles_per_nat,
                          local_cpu_cap=self.local_cpu_cap, cpu_coeff=self.cpu_coeff)

    @property
    def local_data_cap(self) -> float:
        """Most nats the device itself can compute by the deadline."""
        return self.local_cpu_cap * self.deadline / self.cycles_per_nat


@dataclass(frozen=True)
class EdgeProfile:
    """Edge-server CPU frequency reserved for this device (cycles/s)."""

    cpu: float

    def __post_init__(self):
        _require_positive(self, cpu=self.cpu)


@dataclass(frozen=True)
class RadioProfile:
    """Uplink bandwidth (Hz) and fading-block duration (s)."""

    bandwidth: float
    block: float

    def __post_init__(self):
        _require_positive(self, bandwidth=self.bandwidth, block=self.block)


@dataclass(frozen=True)
class TaskSplit:
    """A feasible partition of the task data into offloaded and local nats."""

    offload: float
    local: float

    @classmethod
    def from_offload(cls, task: TaskProfile, offload: float) -> "TaskSplit":
        if offload < -EDGE_SLACK_NATS or offload > task.data + EDGE_SLACK_NATS:
            raise InfeasibleError(f"offload amount {offload} outside [0, {task.data}]")
        offload = min(max(offload, 0.0), task.data)
        local = task.data - offload
        if local > task.local_data_cap + EDGE_SLACK_NATS:
            raise InfeasibleError(
                f"local share {local} nats exceeds device cap {task.local_data_cap}")
        return cls(offload=offload, local=local)


@dataclass(frozen=True)
class Interval:
    """One member of the partition: offload amounts in (lower, upper] nats."""

    index: int
    lower: float
    upper: float


@dataclass(frozen=True)
class IntervalPartition:
    """Partition of feasible offload amounts induced by the block-count steps.

    Interval i holds the offload amounts served in i+1 fading blocks; i_star
    indexes the last (lowest) interval. Membership at exact boundaries is
    decided by ``interval_of``, which defers to ``block_count``.
    """

    intervals: tuple
    i_star: int
    task: TaskProfile
    edge: EdgeProfile
    radio: RadioProfile


def local_energy(local_nats: float, task: TaskProfile) -> float:
    """CPU energy (J) to compute the given nats on-device by the deadline."""
    if local_nats < -EDGE_SLACK_NATS:
        raise ValueError(f"negative local data {local_nats}")
    if local_nats > task.local_data_cap + EDGE_SLACK_NATS:
        raise InfeasibleError(
            f"local share {local_nats} nats exceeds device cap {task.local_data_cap}")
    local_nats = max(local_nats, 0.0)
    return task.cpu_coeff * task.cycles_per_nat ** 3 * local_nats ** 3 / task.deadline ** 2


def edge_time(offload_nats: float, task: TaskProfile, edge: EdgeProfile) -> float:
    """Edge compute time (s) for the offloaded nats; must stay below the deadline."""
    if offload_nats < 0:
        raise ValueError(f"negative offload data {offload_nats}")
    t = task.cycles_per_nat * offload_nats / edge.cpu
    if t >= task.deadline:
        raise InfeasibleError(
            f"edge compute time {t} s leaves no transmission time before deadline {task.deadline} s")
    return t


def _block_ratio_slack(task: TaskProfile, edge: EdgeProfile, radio: RadioProfile) -> float:
    # EDGE_SLACK_NATS translated into (T - T_e)/T_f units, plus a floor for
    # float noise in the ratio itself.
    return EDGE_SLACK_NATS * task.cycles_per_nat / (edge.cpu * radio.block) + 1e-12


def block_count(offload_nats: float, task: TaskProfile, edge: EdgeProfile,
                radio: RadioProfile) -> int:
    """Number of fading blocks available to transmit the offloaded nats."""
    remaining = task.deadline - edge_time(offload_nats, task, edge)
    ratio = remaining / radio.block
    nearest = round(ratio)
    if nearest >= 1 and abs(ratio - nearest) <= _block_ratio_slack(task, edge, radio):
        return int(nearest)
    return int(math.ceil(ratio))


def last_block_time(offload_nats: float, task: TaskProfile, edge: EdgeProfile,
                    radio: RadioProfile) -> float:
    """Transmit duration (s) of the final, possibly partial, fading block."""
    n = block_count(offload_nats, task, edge, radio)
    t1 = (task.deadline - edge_time(offload_nats, task, edge)) - (n - 1) * radio.block
    return min(t1, radio.block)


def tx_power(d: float, h: float, t: float, bandwidth: float) -> float:
    """Transmit power (W) to push d nats through gain h in time t (Shannon rate)."""
    if h <= 0 or t <= 0 or bandwidth <= 0:
        raise ValueError(f"tx_power needs h, t, W > 0, got h={h}, t={t}, W={bandwidth}")
    if d < 0:
        raise ValueError(f"negative data {d}")
    if d == 0:
        return 0.0
    x = d / (t * bandwidth)
    if x > 709.0:  # expm1 overflows; the energy is effectively unpayable
        return math.inf
    return math.expm1(x) / h


def tx_energy(d: float, h: float, t: float, bandwidth: float) -> float:
    """Transmit energy (J) for d nats at gain h over duration t."""
    return tx_power(d, h, t, bandwidth) * t


def interval_partition(task: TaskProfile, edge: EdgeProfile,
                       radio: RadioProfile) -> IntervalPartition:
    """Split the feasible offload range by the number of blocks it leaves."""
    if radio.block > task.deadline:
        raise ValueError(
            f"fading block {radio.block} s longer than deadline {task.deadline} s")
    ratio = task.deadline / radio.block
    nearest = round(ratio)
    if nearest >= 1 and abs(ratio - nearest) <= 1e-12 * ratio:
        ratio = float(nearest)
    i_star = int(math.ceil(ratio)) - 1
    scale = edge.cpu / task.cycles_per_nat
    intervals = []
    for i in range(i_star + 1):
        upper = (task.deadline - i * radio.block) * scale
        lower = 0.0 if i == i_star else (task.deadline - (i + 1) * radio.block) * scale
        intervals.append(Interval(index=i, lower=lower, upper=upper))
    return IntervalPartition(intervals=tuple(intervals), i_star=i_star,
                             task=task, edge=edge, radio=radio)


def interval_of(offload_nats: float, partition: IntervalPartition) -> int:
    """Index of the interval serving this offload amount.

    The block-count formula is authoritative at exact boundaries, where the
    closed-right interval labels would disagree by one.
    """
    top = partition.intervals[0].upper
    if not (0 < offload_nats < top):
        raise ValueError(f"offload amount {offload_nats} outside (0, {top})")
    n = block_count(offload_nats, partition.task, partition.edge, partition.radio)
    return n - 1
