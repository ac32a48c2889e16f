"""Online policy execution over random fading realizations.

Each episode walks the blocks in reverse index order: observe the block's
gain, ask the value tables how much to send, pay the transmit energy, and
force the remainder in the final block. Episodes draw from counter-based
Philox streams keyed by (seed, episode index), so runs are reproducible and
streams are independent; policy comparisons reuse the same gain draws.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import dp, model
from .channel import Channel, sample
from .model import EdgeProfile, RadioProfile, TaskProfile

MIN_EPISODES = 100


@dataclass(frozen=True)
class BlockRecord:
    """One transmitted block inside an episode."""

    stage: int      # blocks remaining including this one (counts down to 1)
    gain: float
    sent: float     # nats
    duration: float  # s
    energy: float   # J


@dataclass(frozen=True)
class EpisodeTrace:
    """One simulated offloading run."""

    offload: float
    blocks: tuple
    total_energy: float


@dataclass(frozen=True)
class MCResult:
    """Monte Carlo estimate of the expected offload energy."""

    episodes: int
    mean_energy: float
    std_error: float
    seed: int


def episode_rng(seed: int, index: int) -> np.random.Generator:
    """Independent counter-based stream for one episode."""
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(index)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _check_table(De: float, table: dp.ValueTable | None) -> None:
    if table is None:
        raise ValueError("value tables are required for a positive offload amount")
    if abs(table.d_max - De) > 1e-9 + 1e-12 * De:
        raise ValueError(f"tables built for d_max={table.d_max}, not for De={De}")


def run_episode(De: float, table: dp.ValueTable | None, chan: Channel,
                rng: np.random.Generator | None = None,
                gains: np.ndarray | None = None) -> EpisodeTrace:
    """Simulate one offloading run; gains may be supplied instead of drawn."""
    if De == 0:
        return EpisodeTrace(offload=0.0, blocks=(), total_energy=0.0)
    _check_table(De, table)
    n_blocks = table.n_max
    if gains is None:
        if rng is None:
            raise ValueError("provide either an rng or explicit gains")
        gains = sample(chan.dist, rng, n_blocks)
    gains = np.asarray(gains, dtype=float)
    if gains.shape != (n_blocks,):
        raise ValueError(f"expected {n_blocks} gains, got shape {gains.shape}")
    blocks = []
    remaining = float(De)
    total = 0.0
    for n in range(n_blocks, 0, -1):
        h = float(gains[n_blocks - n])
        if n == 1:
            send = remaining
        else:
            send = float(dp.decide_batch(table, n, [remaining], [h])[0][0])
        t_n = table.t1 if n == 1 else table.radio.block
        energy = model.tx_energy(send, h, t_n, table.radio.bandwidth)
        blocks.append(BlockRecord(stage=n, gain=h, sent=send, duration=t_n, energy=energy))
        remaining = max(remaining - send, 0.0)
        total += energy
    return EpisodeTrace(offload=float(De), blocks=tuple(blocks), total_energy=total)


def policy_energies(De: float, table: dp.ValueTable, gains: np.ndarray) -> np.ndarray:
    """Vectorized episode energies for a (episodes, n_blocks) gain matrix."""
    gains = np.asarray(gains, dtype=float)
    episodes, n_blocks = gains.shape
    if n_blocks != table.n_max:
        raise ValueError(f"gain matrix has {n_blocks} blocks, tables have {table.n_max}")
    remaining = np.full(episodes, float(De))
    total = np.zeros(episodes)
    w = table.radio.bandwidth
    for n in range(n_blocks, 0, -1):
        h = gains[:, n_blocks - n]
        if n == 1:
            send = remaining
            t_n = table.t1
        else:
            send, _ = dp.decide_batch(table, n, remaining, h)
            t_n = table.radio.block
        with np.errstate(over="ignore"):
            total += np.where(send <= 0, 0.0, t_n * np.expm1(send / (t_n * w)) / h)
        remaining = np.maximum(remaining - send, 0.0)
    return total


def equal_split_energies(De: float, table: dp.ValueTable, gains: np.ndarray) -> np.ndarray:
    """Reference heuristic: the same nats in every block, ignoring the gains."""
    gains = np.asarray(gains, dtype=float)
    n_blocks = gains.shape[1]
    share = De / n_blocks
    total = np.zeros(gains.shape[0])
    w = table.radio.bandwidth
    for n in range(n_blocks, 0, -1):
        t_n = table.t1 if n == 1 else table.radio.block
        h = gains[:, n_blocks - n]
        with np.errstate(over="ignore"):
            total += np.where(share <= 0, 0.0, t_n * np.expm1(share / (t_n * w)) / h)
    return total


def draw_gain_matrix(chan: Channel, episodes: int, n_blocks: int, seed: int) -> np.ndarray:
    """Per-episode Philox streams, one row of block gains per episode."""
    out = np.empty((episodes, n_blocks))
    for ep in range(episodes):
        out[ep] = sample(chan.dist, episode_rng(seed, ep), n_blocks)
    return out


def monte_carlo(De: float, episodes: int, task: TaskProfile, edge: EdgeProfile,
                radio: RadioProfile, chan: Channel, seed: int,
                grid_size: int = dp.DEFAULT_GRID_SIZE,
                cache: dp.TableCache | None = None) -> MCResult:
    """Estimate the expected offload energy by running the online policy."""
    if episodes < MIN_EPISODES:
        raise ValueError(f"episodes must be >= {MIN_EPISODES}, got {episodes}")
    if De == 0:
        return MCResult(episodes=episodes, mean_energy=0.0, std_error=0.0, seed=seed)
    t1 = model.last_block_time(De, task, edge, radio)
    n_blocks = model.block_count(De, task, edge, radio)
    if cache is not None:
        table = cache.table(De, t1, n_blocks)
    else:
        table = dp.build_value_tables(De, t1, n_blocks, grid_size, chan.rule, radio)
    gains = draw_gain_matrix(chan, episodes, n_blocks, seed)
    energies = policy_energies(De, table, gains)
    mean = float(energies.mean())
    std_error = float(energies.std(ddof=1) / math.sqrt(episodes))
    return MCResult(episodes=episodes, mean_energy=mean, std_error=std_error, seed=seed)
