"""Numerical verification suite.

Checks the planner's structural claims on a given configuration: stagewise
convexity of the value functions, piecewise convexity of the assembled
offload-energy curve with breakpoints at the block-count edges, agreement
with the exact small-instance oracle, the closed-form last-block anchor,
and the Monte Carlo cross-validation of the dynamic program.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import dp, model, sim
from .channel import Channel, FixedGain
from .config import ExperimentConfig

CONVEXITY_TOL = 1e-9        # second differences >= -tol * max|J|
MONOTONE_SLACK = 1e-12      # J_{n+1} <= J_n + slack
CLOSED_FORM_RTOL = 1e-10
ORACLE_RTOL = 1e-12
POLICY_RTOL = 1e-6
CURVE_SAMPLES = 400
T1_FRACTIONS = (0.2, 0.5, 1.0)  # of the block length


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    margin: float   # >= 0 passes; how much head-room is left (1 = full slack unused)
    detail: str


@dataclass(frozen=True)
class CurveData:
    """Assembled J_{N(De)}(De) samples plus fixed-stage reference curves."""

    de: np.ndarray
    j_total: np.ndarray        # J_{N(De)}(De)
    j_total_h: np.ndarray      # J_{N(De)}(De, h_ref)
    block_counts: np.ndarray
    h_ref: float
    ref_stages: tuple          # stage indices of the reference curves
    j_ref: dict                # n -> J_n(d) on the same abscissa
    j_ref_h: dict              # n -> J_n(d, h_ref)


def _second_differences(row: np.ndarray) -> np.ndarray:
    return row[2:] - 2.0 * row[1:-1] + row[:-2]


def _convexity_margin(row: np.ndarray) -> float:
    """Most negative second difference relative to the allowed slack."""
    finite = np.isfinite(row)
    if not finite.all():
        # an infinite tail is fine for an extended-value convex function,
        # but the infinite cells must be contiguous at the top
        first_inf = int(np.argmin(finite))
        if finite[first_inf:].any():
            return -math.inf
        row = row[:first_inf]
        if row.size < 3:
            return 1.0
    scale = float(np.abs(row).max())
    if scale == 0.0:
        return 1.0
    worst = float(_second_differences(row).min())
    return 1.0 + worst / (CONVEXITY_TOL * scale)


def _shared_tables(cfg: ExperimentConfig):
    task, radio, chan = cfg.task(), cfg.radio(), cfg.channel()
    n_max = model.block_count(0.0, task, cfg.edge(), radio)
    tables = [dp.build_value_tables(task.data, frac * radio.block, n_max,
                                    cfg.grid_size, chan.rule, radio)
              for frac in T1_FRACTIONS]
    return tables


def check_stage_convexity(cfg: ExperimentConfig, tables=None) -> CheckResult:
    """Each stage's values are convex along the data grid, for several t1."""
    if tables is None:
        tables = _shared_tables(cfg)
    worst = math.inf
    where = ""
    for table in tables:
        for n in range(1, table.n_max + 1):
            m = _convexity_margin(table.stage_values[n - 1])
            if m < worst:
                worst = m
                where = f"t1={table.t1:g}s, stage {n}"
    return CheckResult("stage_convexity", worst >= 0.0, worst,
                       f"tightest at {where}")


def check_monotonicity(cfg: ExperimentConfig, tables=None) -> CheckResult:
    """J_n nondecreasing in d; an extra block never hurts."""
    if tables is None:
        tables = _shared_tables(cfg)
    worst = math.inf
    where = ""
    for table in tables:
        vals = table.stage_values
        finite = np.isfinite(vals)
        scale = float(np.abs(vals[finite]).max())
        for n in range(table.n_max):
            row = vals[n]
            ok = np.isfinite(row)
            steps = np.diff(row[ok])
            m = 1.0 + (float(steps.min()) / (MONOTONE_SLACK * scale) if steps.size else 0.0)
            if m < worst:
                worst, where = m, f"t1={table.t1:g}s stage {n + 1} in d"
            if n + 1 < table.n_max:
                both = np.isfinite(vals[n + 1]) & ok
                gap = float((vals[n][both] - vals[n + 1][both]).min())
                m = 1.0 + gap / (MONOTONE_SLACK * scale)
                if m < worst:
                    worst, where = m, f"t1={table.t1:g}s stages {n + 1}->{n + 2}"
    return CheckResult("value_monotonicity", worst >= 0.0, worst, f"tightest at {where}")


def check_zero_law(cfg: ExperimentConfig, tables=None) -> CheckResult:
    """Sending nothing costs nothing, exactly."""
    if tables is None:
        tables = _shared_tables(cfg)
    worst = 0.0
    for table in tables:
        worst = max(worst, float(np.abs(table.stage_values[:, 0]).max()))
    return CheckResult("zero_law", worst == 0.0, 1.0 if worst == 0.0 else -worst,
                       f"max |J_n(0)| = {worst:g}")


def check_closed_form(cfg: ExperimentConfig, tables=None) -> CheckResult:
    """Stage 1 equals t1 (e^{d/(t1 W)} - 1) E[1/h] at every grid point."""
    if tables is None:
        tables = _shared_tables(cfg)
    worst = 0.0
    for table in tables:
        c1 = table.t1 * table.inv_gain_mean
        c2 = 1.0 / (table.t1 * table.radio.bandwidth)
        with np.errstate(over="ignore"):
            ref = c1 * np.expm1(table.d_grid * c2)
        got = table.stage_values[0]
        both = np.isfinite(ref) & np.isfinite(got)
        if not (np.isinf(ref) == np.isinf(got)).all():
            return CheckResult("stage1_closed_form", False, -math.inf, "inf mismatch")
        rel = np.abs(got[both] - ref[both]) / np.maximum(np.abs(ref[both]), 1e-300)
        rel[ref[both] == 0.0] = np.abs(got[both][ref[both] == 0.0])
        worst = max(worst, float(rel.max()))
    return CheckResult("stage1_closed_form", worst <= CLOSED_FORM_RTOL,
                       1.0 - worst / CLOSED_FORM_RTOL, f"max rel dev {worst:.3e}")


def check_policy_consistency(cfg: ExperimentConfig, tables=None) -> CheckResult:
    """Expected (block energy + interpolated cost-to-go) reproduces J_n."""
    if tables is None:
        tables = _shared_tables(cfg)
    table = tables[-1]
    worst = 0.0
    grid_idx = [len(table.d_grid) // 4, len(table.d_grid) // 2, len(table.d_grid) - 1]
    stages = sorted({2, min(3, table.n_max), table.n_max} - {1})
    for n in stages:
        for k in grid_idx:
            d = float(table.d_grid[k])
            h = table.rule.nodes
            _, objective = dp.decide_batch(table, n, np.full(h.size, d), h)
            lhs = float(table.rule.weights @ objective)
            rhs = float(table.stage_values[n - 1, k])
            if rhs != 0.0:
                worst = max(worst, abs(lhs - rhs) / abs(rhs))
    return CheckResult("policy_consistency", worst <= POLICY_RTOL,
                       1.0 - worst / POLICY_RTOL, f"max rel dev {worst:.3e}")


def build_curve(cfg: ExperimentConfig, samples: int = CURVE_SAMPLES,
                upper_factor: float = 2.5) -> CurveData:
    """Sample J_{N(De)}(De) and fixed-stage reference curves for export/checks."""
    task, edge, radio, chan = cfg.task(), cfg.edge(), cfg.radio(), cfg.channel()
    top = task.deadline * edge.cpu / task.cycles_per_nat
    upper = min(upper_factor * task.data, 0.999 * top)
    de = np.linspace(0.0, upper, samples + 1)[1:]
    dist = chan.dist
    h_ref = dist.value if isinstance(dist, FixedGain) else dist.mean
    j_total = np.empty(samples)
    j_total_h = np.empty(samples)
    counts = np.empty(samples, dtype=int)
    cache = dp.TableCache(chan.rule, radio, cfg.grid_size)
    for i, x in enumerate(de):
        n = model.block_count(x, task, edge, radio)
        t1 = model.last_block_time(x, task, edge, radio)
        table = cache.table(x, t1, n)
        counts[i] = n
        j_total[i] = table.stage_values[n - 1, -1]
        j_total_h[i] = dp.stage_decision(table, n, x, h_ref).objective
    n_ref = model.block_count(upper, task, edge, radio)
    t1_ref = model.last_block_time(upper, task, edge, radio)
    ref_table = dp.build_value_tables(upper, t1_ref, n_ref, cfg.grid_size, chan.rule, radio)
    ref_stages = tuple(sorted({min(4, n_ref), min(5, n_ref)}))
    j_ref, j_ref_h = {}, {}
    for n in ref_stages:
        j_ref[n] = np.array([dp.eval_J(ref_table, n, x) for x in de])
        _, objs = dp.decide_batch(ref_table, n, de, np.full(samples, h_ref))
        j_ref_h[n] = objs
    return CurveData(de=de, j_total=j_total, j_total_h=j_total_h, block_counts=counts,
                     h_ref=h_ref, ref_stages=ref_stages, j_ref=j_ref, j_ref_h=j_ref_h)


def check_curve_convexity(cfg: ExperimentConfig, curve: CurveData | None = None) -> CheckResult:
    """Within-interval convexity of the assembled curve."""
    if curve is None:
        curve = build_curve(cfg)
    sd = _second_differences(curve.j_total)
    ns = curve.block_counts
    interior = (ns[:-2] == ns[1:-1]) & (ns[1:-1] == ns[2:])
    scale = float(np.abs(curve.j_total).max())
    worst = float(sd[interior].min()) if interior.any() else 0.0
    margin = 1.0 + worst / (CONVEXITY_TOL * scale)
    return CheckResult("piecewise_convexity", margin >= 0.0, margin,
                       f"worst interior second difference {worst:.3e} (scale {scale:.3e})")


def detected_breakpoints(curve: CurveData) -> np.ndarray:
    """Sample locations where the assembled curve is not locally convex."""
    sd = _second_differences(curve.j_total)
    scale = float(np.abs(curve.j_total).max())
    return curve.de[1:-1][sd < -CONVEXITY_TOL * scale]


def check_breakpoints(cfg: ExperimentConfig, curve: CurveData | None = None) -> CheckResult:
    """Convexity violations happen only where a block-count edge is crossed."""
    if curve is None:
        curve = build_curve(cfg)
    task, edge, radio = cfg.task(), cfg.edge(), cfg.radio()
    part = model.interval_partition(task, edge, radio)
    step = float(curve.de[1] - curve.de[0])
    lo, hi = float(curve.de[0]), float(curve.de[-1])
    boundaries = [iv.upper for iv in part.intervals
                  if lo - step < iv.upper <= hi + step]
    violations = detected_breakpoints(curve)
    stray = [float(v) for v in violations
             if not any(abs(v - b) <= step + 1e-9 for b in boundaries)]
    passed = not stray
    return CheckResult("curve_breakpoints", passed, 1.0 if passed else -1.0,
                       f"block-count edges {boundaries}; detected breakpoints "
                       f"{[float(v) for v in violations]}; away from any edge {stray}")


def check_reference_convexity(cfg: ExperimentConfig, curve: CurveData | None = None) -> CheckResult:
    """Fixed-stage curves J_n(d) and J_n(d, h_ref) are convex end to end."""
    if curve is None:
        curve = build_curve(cfg)
    worst = math.inf
    where = ""
    for label, series in (("J_n", curve.j_ref), ("J_n_h", curve.j_ref_h)):
        for n, row in series.items():
            m = _convexity_margin(np.asarray(row))
            if m < worst:
                worst, where = m, f"{label}, n={n}"
    return CheckResult("reference_curve_convexity", worst >= 0.0, worst,
                       f"tightest at {where}")


def random_instance(rng: np.random.Generator, radio: model.RadioProfile) -> dp.DiscreteInstance:
    """A random small instance for the oracle-equivalence check."""
    g = int(rng.integers(8, dp.MAX_ORACLE_GRID + 1))
    stages = int(rng.integers(1, dp.MAX_ORACLE_STAGES + 1))
    atoms = int(rng.integers(1, dp.MAX_ORACLE_ATOMS + 1))
    d_max = float(rng.uniform(0.2, 3.0)) * radio.block * radio.bandwidth
    if rng.random() < 0.5:
        grid = np.linspace(0.0, d_max, g)
    else:
        steps = rng.uniform(0.1, 1.0, g - 1)
        grid = np.concatenate([[0.0], np.cumsum(steps)])
        grid *= d_max / grid[-1]
    gains = np.sort(rng.uniform(0.5, 500.0, atoms))
    probs = rng.dirichlet(np.ones(atoms))
    probs = probs / probs.sum()
    t1 = float(rng.uniform(0.05, 1.0)) * radio.block
    return dp.DiscreteInstance(d_grid=grid, gains=gains, probs=probs, t1=t1,
                               stages=stages, radio=radio)


def check_oracle(cfg: ExperimentConfig, instances: int = 20) -> CheckResult:
    """Kernel-backed recursion equals full enumeration on finite instances."""
    rng = np.random.Generator(np.random.Philox(
        key=np.array([cfg.seed & 0xFFFFFFFFFFFFFFFF, 2**32], dtype=np.uint64)))
    radio = cfg.radio()
    worst = 0.0
    for _ in range(instances):
        inst = random_instance(rng, radio)
        fast = dp.discrete_value_tables(inst)
        slow = np.array(dp.brute_force_table(inst))
        rel = np.abs(fast - slow) / np.maximum(np.abs(slow), 1e-300)
        rel[slow == 0.0] = np.abs(fast[slow == 0.0])
        worst = max(worst, float(rel.max()))
    return CheckResult("oracle_equivalence", worst <= ORACLE_RTOL,
                       1.0 - worst / ORACLE_RTOL,
                       f"max rel dev {worst:.3e} over {instances} instances")


def check_dp_mc(cfg: ExperimentConfig) -> CheckResult:
    """Monte Carlo execution of the policy reproduces the planned value."""
    task, edge, radio, chan = cfg.task(), cfg.edge(), cfg.radio(), cfg.channel()
    cache = dp.TableCache(chan.rule, radio, cfg.grid_size)
    worst = math.inf
    detail = []
    for frac in (0.25, 0.5, 1.0):
        de = frac * task.data
        res = sim.monte_carlo(de, cfg.episodes, task, edge, radio, chan, cfg.seed, cache=cache)
        planned = dp.expected_offload_energy(de, task, edge, radio, chan, cache=cache)
        allowed = 3.0 * res.std_error + 1e-6 * planned
        gap = abs(res.mean_energy - planned)
        detail.append(f"De={de:g}: gap={gap:.3g} allowed={allowed:.3g}")
        worst = min(worst, 1.0 - gap / allowed if allowed > 0 else (1.0 if gap == 0 else -math.inf))
    return CheckResult("dp_mc_agreement", worst >= 0.0, worst, "; ".join(detail))


def run_verification(cfg: ExperimentConfig) -> tuple:
    """All checks plus the curve data for the figure-reproduction CSV."""
    tables = _shared_tables(cfg)
    curve = build_curve(cfg)
    results = [
        check_stage_convexity(cfg, tables),
        check_curve_convexity(cfg, curve),
        check_breakpoints(cfg, curve),
        check_reference_convexity(cfg, curve),
        check_monotonicity(cfg, tables),
        check_zero_law(cfg, tables),
        check_closed_form(cfg, tables),
        check_policy_consistency(cfg, tables),
        check_oracle(cfg),
        check_dp_mc(cfg),
    ]
    return results, curve
