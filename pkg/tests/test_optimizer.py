import numpy as np
import pytest

from mecoffload import dp, model, optimizer
from mecoffload.channel import make_channel
from mecoffload.errors import InfeasibleError

# cheaper numerics for dense-scan oracles; physics stays the reference set
SCAN_GRID = 129
SCAN_NODES = 32


@pytest.fixture(scope="module")
def ref_solution(ref_task, ref_edge, ref_radio, ref_channel, ref_cache):
    return optimizer.solve(ref_task, ref_edge, ref_radio, ref_channel, cache=ref_cache)


class TestObjective:
    def test_all_local_corner(self, ref_task, ref_edge, ref_radio, ref_channel):
        assert optimizer.objective(0.0, ref_task, ref_edge, ref_radio, ref_channel) == \
            pytest.approx(0.1024, rel=1e-12)

    def test_all_offload_corner(self, ref_task, ref_edge, ref_radio, ref_channel, ref_cache):
        val = optimizer.objective(ref_task.data, ref_task, ref_edge, ref_radio,
                                  ref_channel, cache=ref_cache)
        ref = dp.expected_offload_energy(ref_task.data, ref_task, ref_edge, ref_radio,
                                         ref_channel, cache=ref_cache)
        assert val == ref  # zero local share adds exactly nothing

    def test_out_of_range(self, ref_task, ref_edge, ref_radio, ref_channel):
        with pytest.raises(InfeasibleError):
            optimizer.objective(-5.0, ref_task, ref_edge, ref_radio, ref_channel)
        with pytest.raises(InfeasibleError):
            optimizer.objective(ref_task.data + 5.0, ref_task, ref_edge, ref_radio,
                                ref_channel)

    def test_midpoint_convexity_inside_interval(self, ref_task, ref_edge, ref_radio,
                                                ref_channel, ref_cache):
        # interval 9 covers (0, 5e4]; probe strictly inside
        f = lambda de: optimizer.objective(de, ref_task, ref_edge, ref_radio,
                                           ref_channel, cache=ref_cache)
        left, right = 1.0e4, 3.0e4
        mid = 0.5 * (left + right)
        vals = f(left), f(mid), f(right)
        assert vals[1] <= 0.5 * (vals[0] + vals[2]) + 1e-9 * max(vals)


class TestGoldenSection:
    def test_quadratic(self):
        x, fx = optimizer.golden_section(lambda x: (x - 2.0) ** 2, 0.0, 5.0, 1e-8)
        assert x == pytest.approx(2.0, abs=1e-7)
        assert fx == pytest.approx(0.0, abs=1e-13)

    def test_corner_minimum_is_kept(self):
        x, fx = optimizer.golden_section(lambda x: x, 1.0, 4.0, 1e-6)
        assert x == 1.0 and fx == 1.0


class TestSolveInterval:
    def test_interval_above_data_is_infeasible(self, ref_task, ref_edge, ref_radio,
                                               ref_channel, ref_cache):
        res = optimizer.solve_interval(8, ref_task, ref_edge, ref_radio, ref_channel,
                                       cache=ref_cache)  # (5e4, 1e5] but D = 4e4
        assert not res.feasible and res.best_De is None and res.best_energy is None

    def test_sliver_evaluates_closed_end(self, ref_task, ref_edge, ref_radio,
                                         ref_channel, ref_cache):
        # tolerance wider than the usable range collapses the search to one point
        res = optimizer.solve_interval(9, ref_task, ref_edge, ref_radio, ref_channel,
                                       tol=1e5, cache=ref_cache)
        assert res.feasible and res.best_De == ref_task.data
        assert res.best_energy == pytest.approx(
            optimizer.objective(ref_task.data, ref_task, ref_edge, ref_radio,
                                ref_channel, cache=ref_cache), rel=1e-12)

    def test_reference_interval_against_dense_scan(self, ref_task, ref_edge, ref_radio):
        chan = make_channel(100.0, node_count=SCAN_NODES)
        cache = dp.TableCache(chan.rule, ref_radio, grid_size=SCAN_GRID)
        res = optimizer.solve_interval(9, ref_task, ref_edge, ref_radio, chan,
                                       grid_size=SCAN_GRID, cache=cache)
        des = np.linspace(0.0, ref_task.data, 2001)[1:]
        scan = np.array([optimizer.objective(de, ref_task, ref_edge, ref_radio, chan,
                                             grid_size=SCAN_GRID, cache=cache)
                         for de in des])
        i = int(np.argmin(scan))
        curvature = float(max(scan[i - 1] + scan[i + 1] - 2 * scan[i], 0.0)) \
            if 0 < i < scan.size - 1 else 0.0
        assert res.best_energy <= scan[i] + 1e-12 * scan[i]
        assert scan[i] - res.best_energy <= curvature + 1e-12 * scan[i]
        assert abs(res.best_De - des[i]) <= (des[1] - des[0]) + ref_task.data * 1e-5


class TestSolve:
    def test_reference_solution(self, ref_solution, ref_task):
        sol = ref_solution
        assert sol.best_De + sol.best_Dl == pytest.approx(ref_task.data, abs=1e-9)
        assert 0 < sol.best_De < ref_task.data
        assert sol.best_energy <= 0.1024 + 1e-12
        feas = [r.best_energy for r in sol.per_interval if r.feasible]
        cand = [e for (_, _, e) in sol.candidates]
        assert sol.best_energy == min(feas + cand)
        # only the bottom interval can host D = 4e4
        assert [r.feasible for r in sol.per_interval] == [False] * 9 + [True]

    def test_dominates_every_baseline(self, ref_solution, ref_task, ref_edge, ref_radio,
                                      ref_channel, ref_cache):
        for kind in optimizer.BASELINE_KINDS:
            base = optimizer.baseline_energy(kind, ref_task, ref_edge, ref_radio,
                                             ref_channel, cache=ref_cache)
            assert ref_solution.best_energy <= base + 1e-9

    def test_tiny_bandwidth_goes_all_local(self, ref_task, ref_edge):
        radio = model.RadioProfile(bandwidth=1.0, block=0.002)
        chan = make_channel(100.0, node_count=SCAN_NODES)
        sol = optimizer.solve(ref_task, ref_edge, radio, chan, grid_size=SCAN_GRID)
        assert sol.best_De == 0.0
        assert sol.best_energy == pytest.approx(0.1024, rel=1e-12)

    def test_fast_edge_good_channel_offloads_almost_everything(self, ref_task, ref_radio):
        edge = model.EdgeProfile(cpu=100e9)
        chan = make_channel(1e4, node_count=SCAN_NODES)
        cache = dp.TableCache(chan.rule, ref_radio, grid_size=SCAN_GRID)
        sol = optimizer.solve(ref_task, edge, ref_radio, chan, grid_size=SCAN_GRID,
                              cache=cache)
        assert sol.best_De >= 0.97 * ref_task.data
        des = np.linspace(0.95 * ref_task.data, ref_task.data, 1001)
        scan = [optimizer.objective(de, ref_task, edge, ref_radio, chan,
                                    grid_size=SCAN_GRID, cache=cache) for de in des]
        i = int(np.argmin(scan))
        assert sol.best_energy <= scan[i] + 1e-12 * scan[i]
        assert abs(sol.best_De - des[i]) <= 2 * (des[1] - des[0]) + ref_task.data * 1e-5

    def test_global_dense_scan_optimality(self):
        # small instance so the 5001-point scan stays affordable
        task = model.TaskProfile(deadline=8e-3, data=1.2e4, cycles_per_nat=40.0,
                                 local_cpu_cap=0.5e9, cpu_coeff=1e-23)
        edge = model.EdgeProfile(cpu=1e9)
        radio = model.RadioProfile(bandwidth=1e6, block=2e-3)
        chan = make_channel(100.0, node_count=SCAN_NODES)
        cache = dp.TableCache(chan.rule, radio, grid_size=SCAN_GRID)
        sol = optimizer.solve(task, edge, radio, chan, grid_size=SCAN_GRID, cache=cache)
        des = np.linspace(0.0, task.data, 5001)
        scan = np.array([optimizer.objective(de, task, edge, radio, chan,
                                             grid_size=SCAN_GRID, cache=cache)
                         for de in des])
        i = int(np.argmin(scan))
        step_bound = float(max(np.abs(np.diff(scan[max(i - 2, 0):i + 3])).max(), 0.0))
        assert sol.best_energy <= scan[i] + step_bound + 1e-12 * scan[i]

    def test_totally_infeasible_task(self, ref_edge, ref_radio, ref_channel):
        # exceeds both the local cap (2.5e5) and the edge window (5e5)
        task = model.TaskProfile(deadline=0.02, data=9e5, cycles_per_nat=40.0,
                                 local_cpu_cap=0.5e9, cpu_coeff=1e-23)
        with pytest.raises(InfeasibleError):
            optimizer.solve(task, ref_edge, ref_radio, ref_channel, grid_size=SCAN_GRID)


class TestBaselines:
    def test_full_local(self, ref_task, ref_edge, ref_radio, ref_channel):
        assert optimizer.baseline_energy("full-local", ref_task, ref_edge, ref_radio,
                                         ref_channel) == pytest.approx(0.1024, rel=1e-12)

    def test_binary_is_min_of_feasible(self, ref_task, ref_edge, ref_radio, ref_channel,
                                       ref_cache):
        kinds = ("full-local", "full-offload", "binary")
        full_local, full_offload, binary = (
            optimizer.baseline_energy(k, ref_task, ref_edge, ref_radio, ref_channel,
                                      cache=ref_cache) for k in kinds)
        assert binary == min(full_local, full_offload)

    def test_full_local_infeasible_beyond_cap(self, ref_edge, ref_radio, ref_channel):
        task = model.TaskProfile(deadline=0.02, data=3e5, cycles_per_nat=40.0,
                                 local_cpu_cap=0.5e9, cpu_coeff=1e-23)
        with pytest.raises(InfeasibleError):
            optimizer.baseline_energy("full-local", task, ref_edge, ref_radio, ref_channel)

    def test_full_offload_infeasible_beyond_edge_window(self, ref_edge, ref_radio,
                                                        ref_channel):
        task = model.TaskProfile(deadline=0.02, data=6e5, cycles_per_nat=40.0,
                                 local_cpu_cap=20e9, cpu_coeff=1e-23)
        with pytest.raises(InfeasibleError):
            optimizer.baseline_energy("full-offload", task, ref_edge, ref_radio,
                                      ref_channel, grid_size=SCAN_GRID)
        # binary falls back to the feasible side
        assert optimizer.baseline_energy("binary", task, ref_edge, ref_radio, ref_channel,
                                         grid_size=SCAN_GRID) == pytest.approx(
            model.local_energy(task.data, task), rel=1e-12)

    def test_unknown_kind(self, ref_task, ref_edge, ref_radio, ref_channel):
        with pytest.raises(ValueError):
            optimizer.baseline_energy("bogus", ref_task, ref_edge, ref_radio, ref_channel)
