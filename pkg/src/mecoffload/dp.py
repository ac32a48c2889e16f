"""Backward value recursion over fading blocks.

Stage n holds the minimum expected transmit energy to deliver d nats when n
blocks remain; block 1 is the final (possibly partial) block of duration t1
and has the closed form J_1(d) = t1 * (e^{d/(t1 W)} - 1) * E[1/h]. Later
stages are built on a uniform data grid by golden-section minimization of
the current block's energy plus the interpolated cost-to-go.

The stage-2 sweep evaluates the stage-1 closed form exactly rather than its
interpolant: near interval boundaries t1 is tiny and the stage-1 table is so
steep that the piecewise-linear read would price the last block out of use.
A value of +inf marks an unpayable state (the remaining time cannot carry
the load at representable cost); the minimizations treat it as such, so a
feasible corner always wins over an infinite interior.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels, model
from ._kernels import pykernels
from .channel import Channel, QuadratureRule, inverse_gain_mean
from .errors import InfeasibleError
from .model import EdgeProfile, RadioProfile, TaskProfile

DEFAULT_GRID_SIZE = 513
MIN_GRID_SIZE = 32
INNER_TOL_FACTOR = 1e-6  # golden-section data tolerance as a fraction of d_max


@dataclass(frozen=True)
class ValueTable:
    """Discretized value functions J_1..J_n for one last-block duration."""

    d_grid: np.ndarray
    stage_values: np.ndarray  # shape (n_max, grid_size); row n-1 holds J_n
    t1: float
    radio: RadioProfile
    rule: QuadratureRule
    inv_gain_mean: float
    tol_d: float

    @property
    def n_max(self) -> int:
        return self.stage_values.shape[0]

    @property
    def d_max(self) -> float:
        return float(self.d_grid[-1])

    @property
    def dx(self) -> float:
        return float(self.d_grid[1] - self.d_grid[0])


@dataclass(frozen=True)
class StageDecision:
    """One online decision: how much to send in the current block."""

    stage: int
    remaining: float
    gain: float
    send: float
    block_energy: float
    objective: float  # block energy plus expected cost-to-go, J_n(d, h)


def _closed_form_coeffs(table: ValueTable) -> tuple:
    return table.t1 * table.inv_gain_mean, 1.0 / (table.t1 * table.radio.bandwidth)


def build_value_tables(d_max: float, t1: float, n_max: int, grid_size: int,
                       rule: QuadratureRule, radio: RadioProfile) -> ValueTable:
    """Fill stages 1..n_max on a uniform grid over [0, d_max]."""
    if not (0 < t1 <= radio.block + 1e-15):
        raise ValueError(f"t1 must lie in (0, {radio.block}], got {t1}")
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    if grid_size < MIN_GRID_SIZE:
        raise ValueError(f"grid_size must be >= {MIN_GRID_SIZE}, got {grid_size}")
    if not (d_max > 0 and math.isfinite(d_max)):
        raise ValueError(f"d_max must be positive finite, got {d_max}")
    d_grid = np.linspace(0.0, d_max, grid_size)
    dx = d_grid[1] - d_grid[0]
    tol_d = d_max * INNER_TOL_FACTOR
    e_inv_h = inverse_gain_mean(rule)
    c1 = t1 * e_inv_h
    c2 = 1.0 / (t1 * radio.bandwidth)
    with np.errstate(over="ignore"):
        rows = [c1 * np.expm1(d_grid * c2)]
    dummy = np.zeros(1)
    for n in range(2, n_max + 1):
        if n == 2:
            row = _kernels.stage_update(dummy, 0.0, 1, c1, c2, d_grid, rule.nodes,
                                        rule.weights, radio.block, radio.bandwidth, tol_d)
        else:
            row = _kernels.stage_update(rows[-1], dx, 0, 0.0, 0.0, d_grid, rule.nodes,
                                        rule.weights, radio.block, radio.bandwidth, tol_d)
        if np.isnan(row).any():
            raise FloatingPointError(f"NaN in stage-{n} values; check the gain support")
        rows.append(row)
    if np.isnan(rows[0]).any():
        raise FloatingPointError("NaN in stage-1 values")
    values = np.vstack(rows)
    values.flags.writeable = False
    d_grid.flags.writeable = False
    return ValueTable(d_grid=d_grid, stage_values=values, t1=float(t1), radio=radio,
                      rule=rule, inv_gain_mean=e_inv_h, tol_d=tol_d)


def _check_stage(table: ValueTable, n: int) -> None:
    if not (isinstance(n, (int, np.integer)) and 1 <= n <= table.n_max):
        raise ValueError(f"stage {n} outside 1..{table.n_max}")


def eval_J(table: ValueTable, n: int, d) -> float | np.ndarray:
    """Piecewise-linear read of J_n; exact at grid points."""
    _check_stage(table, n)
    d_arr = np.asarray(d, dtype=float)
    if (d_arr < -table.tol_d).any() or (d_arr > table.d_max + table.tol_d).any():
        raise ValueError(f"d outside [0, {table.d_max}]")
    out = pykernels._interp(table.stage_values[n - 1], 1.0 / table.dx, d_arr)
    return float(out) if np.isscalar(d) or d_arr.ndim == 0 else out


def decide_batch(table: ValueTable, n: int, d, h) -> tuple:
    """Vectorized stage decision: (send, objective) for paired (d, h) arrays."""
    _check_stage(table, n)
    d = np.ascontiguousarray(np.atleast_1d(d), dtype=float)
    h = np.ascontiguousarray(np.atleast_1d(h), dtype=float)
    if (h <= 0).any():
        raise ValueError("gains must be positive")
    if (d < 0).any() or (d > table.d_max + table.tol_d).any():
        raise ValueError(f"remaining data outside [0, {table.d_max}]")
    if n == 1:
        with np.errstate(over="ignore"):
            energy = np.where(d <= 0, 0.0,
                              table.t1 * np.expm1(d / (table.t1 * table.radio.bandwidth)) / h)
        return d.copy(), energy
    c1, c2 = _closed_form_coeffs(table)
    if n == 2:
        return _kernels.golden_batch(np.zeros(1), 0.0, 1, c1, c2, d, h,
                                     table.radio.block, table.radio.bandwidth, table.tol_d)
    return _kernels.golden_batch(table.stage_values[n - 2], table.dx, 0, 0.0, 0.0, d, h,
                                 table.radio.block, table.radio.bandwidth, table.tol_d)


def stage_decision(table: ValueTable, n: int, d: float, h: float) -> StageDecision:
    """Optimal nats to send in block n with d remaining and observed gain h."""
    send, objective = decide_batch(table, n, [d], [h])
    send_v = float(send[0])
    t_n = table.t1 if n == 1 else table.radio.block
    return StageDecision(stage=n, remaining=float(d), gain=float(h), send=send_v,
                         block_energy=model.tx_energy(send_v, h, t_n, table.radio.bandwidth),
                         objective=float(objective[0]))


class TableCache:
    """Value tables memoized by (t1 rounded to 1 ns, d_max, n_max).

    One cache serves one (rule, radio, grid_size) context. Tables are
    immutable after construction, so sharing a finished cache across threads
    is safe; concurrent builders may redundantly compute the same table.
    """

    def __init__(self, rule: QuadratureRule, radio: RadioProfile,
                 grid_size: int = DEFAULT_GRID_SIZE):
        self.rule = rule
        self.radio = radio
        self.grid_size = int(grid_size)
        self._store: dict = {}

    def table(self, d_max: float, t1: float, n_max: int) -> ValueTable:
        key = (round(t1 * 1e9), float(d_max), int(n_max))
        hit = self._store.get(key)
        if hit is None:
            hit = build_value_tables(d_max, t1, n_max, self.grid_size, self.rule, self.radio)
            self._store[key] = hit
        return hit

    def __len__(self) -> int:
        return len(self._store)


def expected_offload_energy(De: float, task: TaskProfile, edge: EdgeProfile,
                            radio: RadioProfile, chan: Channel,
                            grid_size: int = DEFAULT_GRID_SIZE,
                            cache: TableCache | None = None) -> float:
    """Minimum expected transmit energy J_{N(De)}(De) for offloading De nats."""
    top = task.deadline * edge.cpu / task.cycles_per_nat
    if not (0 < De < top):
        raise InfeasibleError(f"offload amount {De} outside (0, {top})")
    t1 = model.last_block_time(De, task, edge, radio)
    n = model.block_count(De, task, edge, radio)
    if cache is not None:
        table = cache.table(De, t1, n)
    else:
        table = build_value_tables(De, t1, n, grid_size, chan.rule, radio)
    return float(table.stage_values[n - 1, -1])


# --- exact oracle on finite instances ---------------------------------------

MAX_ORACLE_GRID = 64
MAX_ORACLE_ATOMS = 8
MAX_ORACLE_STAGES = 4


@dataclass(frozen=True)
class DiscreteInstance:
    """A small instance with finite data grid and finite gain support."""

    d_grid: np.ndarray
    gains: np.ndarray
    probs: np.ndarray
    t1: float
    stages: int
    radio: RadioProfile

    def __post_init__(self):
        d = np.ascontiguousarray(self.d_grid, dtype=float)
        g = np.ascontiguousarray(self.gains, dtype=float)
        p = np.ascontiguousarray(self.probs, dtype=float)
        if d.size > MAX_ORACLE_GRID:
            raise ValueError(f"instance grid too large: {d.size} > {MAX_ORACLE_GRID}")
        if g.size > MAX_ORACLE_ATOMS:
            raise ValueError(f"too many gain atoms: {g.size} > {MAX_ORACLE_ATOMS}")
        if self.stages > MAX_ORACLE_STAGES or self.stages < 1:
            raise ValueError(f"stages must be 1..{MAX_ORACLE_STAGES}, got {self.stages}")
        if d[0] != 0.0 or (np.diff(d) <= 0).any():
            raise ValueError("d_grid must be strictly increasing and start at 0")
        if g.shape != p.shape or abs(p.sum() - 1.0) > 1e-9 or (p < 0).any() or (g <= 0).any():
            raise ValueError("gains/probs must be a probability law on positive gains")
        for name, arr in (("d_grid", d), ("gains", g), ("probs", p)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


def brute_force_table(inst: DiscreteInstance) -> list:
    """Exact expectation-of-minimum recursion by full enumeration.

    Deliberately plain (scalar loops over grid points, atoms, and choices) so
    it is an independent check on the kernel-backed recursion.
    """
    w, t1 = inst.radio.bandwidth, inst.t1
    grid = [float(x) for x in inst.d_grid]
    atoms = list(zip(inst.gains.tolist(), inst.probs.tolist()))
    stage1 = [sum(p * model.tx_energy(d, h, t1, w) for h, p in atoms) for d in grid]
    values = [stage1]
    for _ in range(2, inst.stages + 1):
        prev = values[-1]
        row = []
        for i, d in enumerate(grid):
            acc = 0.0
            for h, p in atoms:
                best = math.inf
                for k in range(i + 1):
                    cand = model.tx_energy(d - grid[k], h, inst.radio.block, w) + prev[k]
                    if cand < best:
                        best = cand
                acc += p * best
            row.append(acc)
        values.append(row)
    return values


def brute_force_value(inst: DiscreteInstance) -> float:
    """Exact J_{stages} at the instance's largest grid point."""
    return brute_force_table(inst)[-1][-1]


def discrete_value_tables(inst: DiscreteInstance) -> np.ndarray:
    """Main recursion restricted to the instance's finite sets (no interpolation)."""
    e_inv_h = float(inst.probs @ (1.0 / inst.gains))
    with np.errstate(over="ignore"):
        rows = [inst.t1 * e_inv_h * np.expm1(inst.d_grid / (inst.t1 * inst.radio.bandwidth))]
    for _ in range(2, inst.stages + 1):
        rows.append(_kernels.stage_update_discrete(rows[-1], inst.d_grid, inst.gains,
                                                   inst.probs, inst.radio.block,
                                                   inst.radio.bandwidth))
    return np.vstack(rows)


def dump_value_table(table: ValueTable, path) -> None:
    """CSV dump with columns n, d_nats, J_J (one row per stage and grid point)."""
    with open(path, "w", newline="") as fh:
        fh.write("n,d_nats,J_J\n")
        for n in range(1, table.n_max + 1):
            row = table.stage_values[n - 1]
            for d, v in zip(table.d_grid, row):
                fh.write(f"{n},{float(d)!r},{float(v)!r}\n")
