"""Experiment harness: solve, sweep, simulate, verify.

Exit codes: 0 success, 2 configuration error, 3 infeasible problem,
4 verification failure. Every run with --out gets its own directory
holding a normalized config snapshot and the CSV/JSON artifacts; floats
are written with full round-trip precision so reruns are byte-identical.
"""
import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

from . import __version__, dp, model, optimizer, sim, verify
from ._kernels import BACKEND
from .config import (ExperimentConfig, default_config, parse_config, parse_quantity,
                     serialize_config)
from .errors import ConfigError, InfeasibleError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_VERIFY = 4

SWEEP_COLUMNS = ("parameter", "value", "status", "proposed_energy_J",
                 "full_offload_energy_J", "binary_energy_J", "best_De_nats")
FE_MU_COLUMNS = ("edge_cpu_Hz", "gain_mean", "status", "best_De_nats", "proposed_energy_J")
TRACE_COLUMNS = ("episode", "n", "h", "d_n", "t_n", "energy")
FIG_COLUMNS_BASE = ("De_nats", "J_total_J", "J_total_h_J", "blocks")


def _fmt(x) -> str:
    """Full round-trip float formatting; empty for missing values."""
    if x is None:
        return ""
    return repr(float(x))


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(c) if isinstance(c, (str, int)) else _fmt(c)
                              for c in row) + "\n")


def _ensure_out(out_dir) -> str | None:
    if out_dir is None:
        return None
    os.makedirs(out_dir, exist_ok=True)
    return out_dir


def _snapshot(cfg: ExperimentConfig, out_dir) -> None:
    if out_dir is not None:
        with open(os.path.join(out_dir, "config.yaml"), "w") as fh:
            fh.write(serialize_config(cfg))


def _load_config(args) -> ExperimentConfig:
    cfg = parse_config(args.config) if args.config else default_config()
    return cfg.with_overrides(seed=args.seed, grid=args.grid, nodes=args.nodes,
                              episodes=args.episodes, tol=args.tol)


def _solution_rows(sol: optimizer.OffloadSolution):
    for r in sol.per_interval:
        is_best = r.feasible and r.best_energy == sol.best_energy and r.best_De == sol.best_De
        yield (r.index, _fmt(r.lower), _fmt(r.upper), "yes" if r.feasible else "no",
               _fmt(r.best_De), _fmt(r.best_energy), "yes" if is_best else "no")


def cmd_solve(args) -> int:
    cfg = _load_config(args)
    out_dir = _ensure_out(args.out)
    _snapshot(cfg, out_dir)
    task, edge, radio, chan = cfg.task(), cfg.edge(), cfg.radio(), cfg.channel()
    cache = dp.TableCache(chan.rule, radio, cfg.grid_size)
    sol = optimizer.solve(task, edge, radio, chan, tol=cfg.outer_tol(),
                          grid_size=cfg.grid_size, cache=cache)
    baselines = {}
    for kind in optimizer.BASELINE_KINDS:
        try:
            baselines[kind] = optimizer.baseline_energy(kind, task, edge, radio, chan,
                                                        cfg.grid_size, cache)
        except InfeasibleError:
            baselines[kind] = None
    print(f"kernel backend: {BACKEND}")
    print(f"best_De: {sol.best_De!r} nats")
    print(f"best_Dl: {sol.best_Dl!r} nats")
    print(f"best_energy: {sol.best_energy!r} J")
    for kind in optimizer.BASELINE_KINDS:
        value = baselines[kind]
        print(f"baseline {kind}: " + ("infeasible" if value is None else f"{value!r} J"))
    for row in _solution_rows(sol):
        print("interval " + " ".join(str(c) for c in row))
    if out_dir is not None:
        _write_csv(os.path.join(out_dir, "solution.csv"),
                   ("i", "lower_nats", "upper_nats", "feasible", "De_nats", "energy_J", "best"),
                   _solution_rows(sol))
        report = {
            "best_De_nats": sol.best_De,
            "best_Dl_nats": sol.best_Dl,
            "best_energy_J": sol.best_energy,
            "baselines_J": baselines,
            "candidates": [{"label": c[0], "De_nats": c[1], "energy_J": c[2]}
                           for c in sol.candidates],
        }
        with open(os.path.join(out_dir, "solution.json"), "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return EXIT_OK


@dataclass(frozen=True)
class SweepPoint:
    """One solved sweep point (energies are None when that strategy is infeasible)."""

    label: tuple
    status: str
    proposed: float | None
    full_offload: float | None
    binary: float | None
    best_De: float | None


def _solve_point(cfg: ExperimentConfig, label: tuple) -> SweepPoint:
    task, edge, radio, chan = cfg.task(), cfg.edge(), cfg.radio(), cfg.channel()
    cache = dp.TableCache(chan.rule, radio, cfg.grid_size)
    try:
        sol = optimizer.solve(task, edge, radio, chan, tol=cfg.outer_tol(),
                              grid_size=cfg.grid_size, cache=cache)
    except InfeasibleError:
        return SweepPoint(label, "infeasible", None, None, None, None)
    energies = {}
    for kind in ("full-offload", "binary"):
        try:
            energies[kind] = optimizer.baseline_energy(kind, task, edge, radio, chan,
                                                       cfg.grid_size, cache)
        except InfeasibleError:
            energies[kind] = None
    return SweepPoint(label, "ok", sol.best_energy, energies["full-offload"],
                      energies["binary"], sol.best_De)


def sweep_points(cfg: ExperimentConfig):
    """All (config, label) pairs of the sweep grid, in CSV order."""
    spec = cfg.sweep
    if spec is None:
        raise ConfigError("config has no sweep section")
    points = []
    if spec.parameter == "edge_cpu":
        for fe in spec.values:
            for mu in spec.gain_means:
                points.append((replace(cfg, edge_cpu=fe, gain_mean=mu,
                                       h_min=None, h_max=None), (fe, mu)))
    else:
        field = {"data": "data", "deadline": "deadline", "block": "block"}[spec.parameter]
        for v in spec.values:
            points.append((replace(cfg, **{field: v}), (v,)))
    return points


def run_sweep(cfg: ExperimentConfig, jobs: int = 1):
    """Solve every sweep point; concurrent execution, deterministic order."""
    points = sweep_points(cfg)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(lambda p: _solve_point(*p), points))
    return [_solve_point(*p) for p in points]


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    if cfg.sweep is None:
        raise ConfigError("sweep command needs a sweep section in the config")
    out_dir = _ensure_out(args.out)
    _snapshot(cfg, out_dir)
    results = run_sweep(cfg, jobs=args.jobs)
    if cfg.sweep.parameter == "edge_cpu":
        header = FE_MU_COLUMNS
        rows = [(_fmt(p.label[0]), _fmt(p.label[1]), p.status, _fmt(p.best_De),
                 _fmt(p.proposed)) for p in results]
    else:
        header = SWEEP_COLUMNS
        rows = [(cfg.sweep.parameter, _fmt(p.label[0]), p.status, _fmt(p.proposed),
                 _fmt(p.full_offload), _fmt(p.binary), _fmt(p.best_De)) for p in results]
    lines = [",".join(header)] + [",".join(str(c) for c in row) for row in rows]
    for line in lines:
        print(line)
    if out_dir is not None:
        with open(os.path.join(out_dir, "sweep.csv"), "w", newline="") as fh:
            fh.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    out_dir = _ensure_out(args.out)
    _snapshot(cfg, out_dir)
    de = parse_quantity(args.de, "data", "De")
    task, edge, radio, chan = cfg.task(), cfg.edge(), cfg.radio(), cfg.channel()
    if de < 0 or de > task.data:
        raise InfeasibleError(f"De must lie in [0, {task.data}] nats")
    result = sim.monte_carlo(de, cfg.episodes, task, edge, radio, chan, cfg.seed,
                             grid_size=cfg.grid_size)
    if de > 0:
        planned = dp.expected_offload_energy(de, task, edge, radio, chan, cfg.grid_size)
    else:
        planned = 0.0
    allowed = 3.0 * result.std_error + 1e-6 * planned
    verdict = "pass" if abs(result.mean_energy - planned) <= allowed else "fail"
    report = {
        "De_nats": de,
        "episodes": result.episodes,
        "seed": result.seed,
        "dp_value_J": planned,
        "mc_mean_J": result.mean_energy,
        "mc_std_error_J": result.std_error,
        "agreement": verdict,
    }
    for key, value in report.items():
        print(f"{key}: {value!r}")
    if out_dir is not None:
        with open(os.path.join(out_dir, "simulate.json"), "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
        if args.traces:
            _write_traces(os.path.join(out_dir, "traces.csv"), de, cfg, task, edge,
                          radio, chan)
    return EXIT_OK if verdict == "pass" else EXIT_VERIFY


def _write_traces(path, de, cfg, task, edge, radio, chan) -> None:
    rows = []
    if de > 0:
        t1 = model.last_block_time(de, task, edge, radio)
        blocks = model.block_count(de, task, edge, radio)
        table = dp.build_value_tables(de, t1, blocks, cfg.grid_size, chan.rule, radio)
        episodes = min(cfg.episodes, 100)
        for ep in range(episodes):
            trace = sim.run_episode(de, table, chan, sim.episode_rng(cfg.seed, ep))
            for b in trace.blocks:
                rows.append((ep, b.stage, _fmt(b.gain), _fmt(b.sent), _fmt(b.duration),
                             _fmt(b.energy)))
    _write_csv(path, TRACE_COLUMNS, rows)


def _write_fig_curves(path, curve: verify.CurveData) -> None:
    header = list(FIG_COLUMNS_BASE)
    for n in curve.ref_stages:
        header += [f"J_{n}_J", f"J_{n}_h_J"]
    rows = []
    for i, de in enumerate(curve.de):
        row = [_fmt(de), _fmt(curve.j_total[i]), _fmt(curve.j_total_h[i]),
               int(curve.block_counts[i])]
        for n in curve.ref_stages:
            row += [_fmt(curve.j_ref[n][i]), _fmt(curve.j_ref_h[n][i])]
        rows.append(row)
    _write_csv(path, header, rows)


def cmd_verify(args) -> int:
    cfg = _load_config(args)
    out_dir = _ensure_out(args.out)
    _snapshot(cfg, out_dir)
    results, curve = verify.run_verification(cfg)
    failures = [r for r in results if not r.passed]
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name} (margin={r.margin:.3g}) {r.detail}")
    if out_dir is not None:
        report = {
            "all_passed": not failures,
            "checks": [{"name": r.name, "passed": r.passed, "margin": r.margin,
                        "detail": r.detail} for r in results],
        }
        with open(os.path.join(out_dir, "verify.json"), "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
        _write_fig_curves(os.path.join(out_dir, "fig1_curves.csv"), curve)
    if failures:
        print(f"{len(failures)} verification check(s) failed: "
              + ", ".join(r.name for r in failures))
        return EXIT_VERIFY
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mecoffload",
        description="Energy-optimal computation offloading over block-fading channels")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="experiment config YAML (default: built-in reference)")
        p.add_argument("--out", help="output directory for artifacts")
        p.add_argument("--seed", type=int, help="override numerics.seed")
        p.add_argument("--grid", type=int, help="override numerics.grid_size")
        p.add_argument("--nodes", type=int, help="override numerics.node_count")
        p.add_argument("--episodes", type=int, help="override numerics.episodes")
        p.add_argument("--tol", type=float, help="override outer search tolerance (nats)")

    p = sub.add_parser("solve", help="optimal split plus baseline energies")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="solve across the configured parameter sweep")
    common(p)
    p.add_argument("--jobs", type=int, default=1, help="concurrent sweep points")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="Monte Carlo run of the online policy")
    common(p)
    p.add_argument("de", help="offload amount, e.g. '2e4' or '2e4 nats'")
    p.add_argument("--traces", action="store_true",
                   help="also write per-episode traces (with --out)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run the numerical verification suite")
    common(p)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
