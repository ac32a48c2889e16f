"""Outer search over the offload amount.

The expected offload energy is piecewise convex in De: convex on each member
of the block-count interval partition. One golden-section search per
interval (the objective has no usable derivative), then the best interval
winner is compared against the explicit all-local and all-offload corners.
"""
import math
from dataclasses import dataclass

from . import dp, model
from .channel import Channel
from .errors import InfeasibleError
from .model import EdgeProfile, RadioProfile, TaskProfile

INVPHI = 0.6180339887498949
INVPHI2 = 0.3819660112501051

OUTER_TOL_FACTOR = 1e-5  # termination width as a fraction of the task data

BASELINE_KINDS = ("full-offload", "full-local", "binary")


@dataclass(frozen=True)
class IntervalResult:
    """Outcome of the convex subproblem on one partition interval."""

    index: int
    lower: float
    upper: float
    feasible: bool
    best_De: float | None
    best_energy: float | None


@dataclass(frozen=True)
class OffloadSolution:
    """Global optimum plus the per-interval and corner-candidate evidence."""

    best_De: float
    best_Dl: float
    best_energy: float
    per_interval: tuple
    candidates: tuple  # (label, De, energy) corners that were explicitly evaluated


def objective(De: float, task: TaskProfile, edge: EdgeProfile, radio: RadioProfile,
              chan: Channel, grid_size: int = dp.DEFAULT_GRID_SIZE,
              cache: dp.TableCache | None = None) -> float:
    """Total expected energy of the split (De offloaded, rest local)."""
    if De < -model.EDGE_SLACK_NATS or De > task.data + model.EDGE_SLACK_NATS:
        raise InfeasibleError(f"offload amount {De} outside [0, {task.data}]")
    De = min(max(De, 0.0), task.data)
    local = model.local_energy(task.data - De, task)
    if De == 0.0:
        return local
    return dp.expected_offload_energy(De, task, edge, radio, chan, grid_size, cache) + local


def golden_section(f, a: float, b: float, tol: float) -> tuple:
    """Minimize a unimodal f on [a, b] to bracket width tol.

    Returns (x, f(x)); the original endpoints are kept as candidates so
    corner optima are never lost to the interior search.
    """
    fa, fb = f(a), f(b)
    x1 = a + INVPHI2 * (b - a)
    x2 = a + INVPHI * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 < f2:
            b, x2, f2 = x2, x1, f1
            x1 = a + INVPHI2 * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INVPHI * (b - a)
            f2 = f(x2)
    xm = 0.5 * (a + b)
    best_x, best_f = xm, f(xm)
    if fa < best_f:
        best_x, best_f = a, fa
    if fb < best_f:
        best_x, best_f = b, fb
    return best_x, best_f


def _feasible_De_range(task: TaskProfile) -> tuple:
    lo = max(0.0, task.data - task.local_data_cap)
    return lo, task.data


def solve_interval(index: int, task: TaskProfile, edge: EdgeProfile, radio: RadioProfile,
                   chan: Channel, tol: float | None = None,
                   grid_size: int = dp.DEFAULT_GRID_SIZE,
                   cache: dp.TableCache | None = None,
                   partition: model.IntervalPartition | None = None) -> IntervalResult:
    """Golden-section search of the objective on one partition interval."""
    if partition is None:
        partition = model.interval_partition(task, edge, radio)
    iv = partition.intervals[index]
    if tol is None:
        tol = task.data * OUTER_TOL_FACTOR
    de_lo, de_hi = _feasible_De_range(task)
    a = max(iv.lower, de_lo)
    b = min(iv.upper, de_hi)
    if index == 0:
        b = min(b, iv.upper - tol)  # at the very top no transmission time remains
    open_low = a <= iv.lower  # the interval excludes its own lower boundary
    if b < a or (open_low and b <= iv.lower):
        return IntervalResult(index=index, lower=iv.lower, upper=iv.upper,
                              feasible=False, best_De=None, best_energy=None)
    if open_low:
        a = min(iv.lower + tol, b)  # approach the open endpoint to within tol

    def f(de):
        return objective(de, task, edge, radio, chan, grid_size, cache)

    if b <= a:
        return IntervalResult(index=index, lower=iv.lower, upper=iv.upper, feasible=True,
                              best_De=float(b), best_energy=f(b))
    best_de, best_e = golden_section(f, a, b, tol)
    return IntervalResult(index=index, lower=iv.lower, upper=iv.upper, feasible=True,
                          best_De=float(best_de), best_energy=float(best_e))


def solve(task: TaskProfile, edge: EdgeProfile, radio: RadioProfile, chan: Channel,
          tol: float | None = None, grid_size: int = dp.DEFAULT_GRID_SIZE,
          cache: dp.TableCache | None = None) -> OffloadSolution:
    """Optimal task split: best interval winner vs the explicit corners."""
    if cache is None:
        cache = dp.TableCache(chan.rule, radio, grid_size)
    partition = model.interval_partition(task, edge, radio)
    results = [solve_interval(i, task, edge, radio, chan, tol, grid_size, cache, partition)
               for i in range(partition.i_star + 1)]
    candidates = []
    if task.data <= task.local_data_cap + model.EDGE_SLACK_NATS:
        candidates.append(("all-local", 0.0, model.local_energy(task.data, task)))
    if task.data < partition.intervals[0].upper:
        candidates.append(("all-offload", task.data,
                           objective(task.data, task, edge, radio, chan, grid_size, cache)))
    best_de = best_e = None
    for r in results:
        if r.feasible and (best_e is None or r.best_energy < best_e):
            best_de, best_e = r.best_De, r.best_energy
    for _, de, e in candidates:
        if best_e is None or e < best_e:
            best_de, best_e = de, e
    if best_e is None or not math.isfinite(best_e):
        raise InfeasibleError(
            "no feasible split: task exceeds both the local cap and the edge window")
    return OffloadSolution(best_De=float(best_de), best_Dl=float(task.data - best_de),
                           best_energy=float(best_e), per_interval=tuple(results),
                           candidates=tuple(candidates))


def baseline_energy(kind: str, task: TaskProfile, edge: EdgeProfile, radio: RadioProfile,
                    chan: Channel, grid_size: int = dp.DEFAULT_GRID_SIZE,
                    cache: dp.TableCache | None = None) -> float:
    """Energy of a reference strategy; raises InfeasibleError when it cannot run."""
    if kind not in BASELINE_KINDS:
        raise ValueError(f"unknown baseline {kind!r}, expected one of {BASELINE_KINDS}")
    if kind == "full-local":
        return model.local_energy(task.data, task)
    if kind == "full-offload":
        return objective(task.data, task, edge, radio, chan, grid_size, cache)
    vals = []
    for sub in ("full-local", "full-offload"):
        try:
            vals.append(baseline_energy(sub, task, edge, radio, chan, grid_size, cache))
        except InfeasibleError:
            pass
    if not vals:
        raise InfeasibleError("neither all-local nor all-offload is feasible")
    return min(vals)
