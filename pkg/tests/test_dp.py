import math

import numpy as np
import pytest

from mecoffload import dp, model
from mecoffload.channel import build_quadrature, FixedGain, inverse_gain_mean, make_channel
from mecoffload.errors import InfeasibleError

LN2 = math.log(2.0)


@pytest.fixture(scope="module")
def ref_table(ref_channel, ref_radio):
    # reference-case table for De = 4e4: t1 = 0.4 ms, 10 stages
    return dp.build_value_tables(4e4, 0.4e-3, 10, 513, ref_channel.rule, ref_radio)


class TestBuildValidation:
    def test_t1_domain(self, ref_channel, ref_radio):
        for bad in (0.0, -1e-3, 2.5e-3):
            with pytest.raises(ValueError):
                dp.build_value_tables(1e4, bad, 3, 64, ref_channel.rule, ref_radio)

    def test_sizes(self, ref_channel, ref_radio):
        with pytest.raises(ValueError):
            dp.build_value_tables(1e4, 1e-3, 0, 64, ref_channel.rule, ref_radio)
        with pytest.raises(ValueError):
            dp.build_value_tables(1e4, 1e-3, 3, 8, ref_channel.rule, ref_radio)
        with pytest.raises(ValueError):
            dp.build_value_tables(0.0, 1e-3, 3, 64, ref_channel.rule, ref_radio)


class TestStageOne:
    def test_zero_law(self, ref_table):
        assert (ref_table.stage_values[:, 0] == 0.0).all()

    def test_closed_form_anchor(self, ref_radio, ref_channel):
        # grid chosen so d = t1 W ln2 is the 8th grid point exactly
        t1 = 1e-3
        d_star = t1 * ref_radio.bandwidth * LN2
        table = dp.build_value_tables(4 * d_star, t1, 1, 33, ref_channel.rule, ref_radio)
        e_inv_h = inverse_gain_mean(ref_channel.rule)
        assert table.d_grid[8] == pytest.approx(d_star, rel=1e-15)
        assert table.stage_values[0, 8] == pytest.approx(t1 * e_inv_h, rel=1e-12)

    def test_full_grid_matches_formula(self, ref_table):
        c1 = ref_table.t1 * ref_table.inv_gain_mean
        c2 = 1.0 / (ref_table.t1 * ref_table.radio.bandwidth)
        ref = c1 * np.expm1(ref_table.d_grid * c2)
        np.testing.assert_allclose(ref_table.stage_values[0], ref, rtol=1e-10)


class TestEvalJ:
    def test_exact_at_grid_points(self, ref_table):
        for k in (0, 1, 100, 512):
            assert dp.eval_J(ref_table, 3, float(ref_table.d_grid[k])) == \
                ref_table.stage_values[2, k]

    def test_midpoint_is_mean_of_neighbours(self, ref_table):
        k = 200
        mid = 0.5 * (ref_table.d_grid[k] + ref_table.d_grid[k + 1])
        expect = 0.5 * (ref_table.stage_values[4, k] + ref_table.stage_values[4, k + 1])
        assert dp.eval_J(ref_table, 5, float(mid)) == pytest.approx(expect, rel=1e-14)

    def test_out_of_range(self, ref_table):
        with pytest.raises(ValueError):
            dp.eval_J(ref_table, 0, 1.0)
        with pytest.raises(ValueError):
            dp.eval_J(ref_table, 11, 1.0)
        with pytest.raises(ValueError):
            dp.eval_J(ref_table, 1, 4e4 + 1.0)

    def test_interpolation_error_vs_refined_table(self, ref_channel, ref_radio):
        # stage 2 is built from the exact stage-1 form, so coarse and refined
        # agree at shared points and the gap is pure interpolation error
        coarse = dp.build_value_tables(8e3, 1e-3, 2, 65, ref_channel.rule, ref_radio)
        fine = dp.build_value_tables(8e3, 1e-3, 2, 257, ref_channel.rule, ref_radio)
        read = np.array([dp.eval_J(coarse, 2, float(x)) for x in fine.d_grid])
        gap = read - fine.stage_values[1]
        bound = 3.0 * float(np.diff(fine.stage_values[1], 2).max())
        assert gap.max() <= bound
        assert gap.min() >= -1e-9 * np.abs(fine.stage_values[1]).max()


class TestStageDecision:
    def test_zero_remaining(self, ref_table):
        dec = dp.stage_decision(ref_table, 4, 0.0, 100.0)
        assert dec.send == 0.0 and dec.block_energy == 0.0 and dec.objective == 0.0

    def test_stage_one_sends_remainder(self, ref_table):
        dec = dp.stage_decision(ref_table, 1, 1234.5, 80.0)
        assert dec.send == 1234.5
        assert dec.block_energy == pytest.approx(
            model.tx_energy(1234.5, 80.0, ref_table.t1, 1e6), rel=1e-12)

    def test_better_channel_sends_no_less(self, ref_table):
        for n in (2, 5, 9):
            d = 2.5e4
            lo = dp.stage_decision(ref_table, n, d, 10.0)
            hi = dp.stage_decision(ref_table, n, d, 1000.0)
            assert hi.send >= lo.send - 2 * ref_table.tol_d

    def test_minimizer_matches_dense_scan(self, ref_table):
        d = 2e4
        for n, h in ((2, 10.0), (2, 1000.0), (5, 100.0)):
            dec = dp.stage_decision(ref_table, n, d, h)
            xs = np.linspace(0.0, d, 40001)
            e = np.where(xs <= 0, 0.0,
                         ref_table.radio.block * np.expm1(xs / (2e-3 * 1e6)) / h)
            if n == 2:
                c1 = ref_table.t1 * ref_table.inv_gain_mean
                c2 = 1.0 / (ref_table.t1 * 1e6)
                tail = np.where(d - xs <= 0, 0.0, c1 * np.expm1((d - xs) * c2))
            else:
                tail = np.interp(d - xs, ref_table.d_grid, ref_table.stage_values[n - 2])
            scan = e + tail
            i = int(np.argmin(scan))
            assert dec.objective <= scan[i] + 1e-12 * max(scan[i], 1e-300) + float(
                max(np.diff(scan, 2).max(), 0.0))
            assert abs(dec.send - xs[i]) <= max(ref_table.tol_d, 2 * d / 40000)

    def test_gain_must_be_positive(self, ref_table):
        with pytest.raises(ValueError):
            dp.stage_decision(ref_table, 2, 1e3, 0.0)


class TestTwoStageDegenerate:
    def test_matches_hand_minimization(self, ref_radio):
        h0 = 100.0
        rule = build_quadrature(FixedGain(h0))
        t1 = 1e-3
        table = dp.build_value_tables(4e3, t1, 2, 513, rule, ref_radio)
        d = 3e3  # grid point: 3000 = 384 * (4000/512)
        k = int(round(d / table.dx))
        assert table.d_grid[k] == d
        xs = np.linspace(0.0, d, 10001)
        scan = (model.tx_energy(0.0, h0, 1.0, 1.0) +  # keep formula symmetry obvious
                ref_radio.block * np.expm1(xs / (ref_radio.block * 1e6)) / h0 +
                t1 * np.expm1((d - xs) / (t1 * 1e6)) / h0)
        best = float(scan.min())
        assert table.stage_values[1, k] == pytest.approx(best, rel=1e-7)
        # the optimal split equalizes marginal energies: dn/Tf = (d-dn)/t1
        dn_expected = d * ref_radio.block / (ref_radio.block + t1)
        dec = dp.stage_decision(table, 2, d, h0)
        assert dec.send == pytest.approx(dn_expected, abs=5 * table.tol_d)


class TestBruteForce:
    def _radio(self):
        return model.RadioProfile(bandwidth=1e6, block=2e-3)

    def test_stage_one_is_atom_sum(self):
        inst = dp.DiscreteInstance(d_grid=np.linspace(0, 2e3, 9),
                                   gains=np.array([20.0, 90.0, 400.0]),
                                   probs=np.array([0.2, 0.5, 0.3]),
                                   t1=1e-3, stages=1, radio=self._radio())
        table = dp.brute_force_table(inst)
        for i, d in enumerate(inst.d_grid):
            ref = sum(p * model.tx_energy(float(d), h, 1e-3, 1e6)
                      for h, p in zip(inst.gains, inst.probs))
            assert table[0][i] == pytest.approx(ref, rel=1e-15, abs=1e-300)

    def test_two_stage_example_matches_main_dp(self):
        inst = dp.DiscreteInstance(d_grid=np.linspace(0, 3e3, 21),
                                   gains=np.array([15.0, 80.0, 350.0]),
                                   probs=np.array([0.25, 0.5, 0.25]),
                                   t1=0.7e-3, stages=2, radio=self._radio())
        fast = dp.discrete_value_tables(inst)
        slow = np.array(dp.brute_force_table(inst))
        np.testing.assert_allclose(fast, slow, rtol=1e-12, atol=0)

    def test_extra_stage_never_hurts(self):
        kwargs = dict(d_grid=np.linspace(0, 3e3, 21),
                      gains=np.array([15.0, 80.0, 350.0]),
                      probs=np.array([0.25, 0.5, 0.25]),
                      t1=0.7e-3, radio=self._radio())
        v2 = dp.brute_force_value(dp.DiscreteInstance(stages=2, **kwargs))
        v3 = dp.brute_force_value(dp.DiscreteInstance(stages=3, **kwargs))
        assert v3 <= v2 + 1e-18

    def test_size_guards(self):
        radio = self._radio()
        with pytest.raises(ValueError):
            dp.DiscreteInstance(d_grid=np.linspace(0, 1e3, 80), gains=np.array([1.0]),
                                probs=np.array([1.0]), t1=1e-3, stages=2, radio=radio)
        with pytest.raises(ValueError):
            dp.DiscreteInstance(d_grid=np.linspace(0, 1e3, 10), gains=np.ones(9) / 1.0,
                                probs=np.full(9, 1 / 9), t1=1e-3, stages=2, radio=radio)
        with pytest.raises(ValueError):
            dp.DiscreteInstance(d_grid=np.linspace(0, 1e3, 10), gains=np.array([1.0]),
                                probs=np.array([1.0]), t1=1e-3, stages=5, radio=radio)


class TestExpectedOffloadEnergy:
    def test_vanishing_data_vanishing_energy(self, ref_task, ref_edge, ref_radio, ref_channel):
        val = dp.expected_offload_energy(1.0, ref_task, ref_edge, ref_radio, ref_channel)
        e_inv_h = inverse_gain_mean(ref_channel.rule)
        assert 0.0 < val < e_inv_h / ref_radio.bandwidth  # below the linear-cost cap

    def test_single_block_closed_form(self, ref_channel):
        task = model.TaskProfile(deadline=2e-3, data=1e4, cycles_per_nat=40.0,
                                 local_cpu_cap=0.5e9, cpu_coeff=1e-23)
        edge = model.EdgeProfile(cpu=1e9)
        radio = model.RadioProfile(bandwidth=1e6, block=2e-3)
        de = 2e3
        assert model.block_count(de, task, edge, radio) == 1
        t1 = model.last_block_time(de, task, edge, radio)
        got = dp.expected_offload_energy(de, task, edge, radio, ref_channel)
        e_inv_h = inverse_gain_mean(ref_channel.rule)
        assert got == pytest.approx(t1 * math.expm1(de / (t1 * 1e6)) * e_inv_h, rel=1e-10)

    def test_reference_value_is_stable_under_refinement(self, ref_task, ref_edge,
                                                        ref_radio, ref_channel):
        base = dp.expected_offload_energy(4e4, ref_task, ref_edge, ref_radio,
                                          ref_channel, grid_size=513)
        finer_grid = dp.expected_offload_energy(4e4, ref_task, ref_edge, ref_radio,
                                                ref_channel, grid_size=1025)
        finer_nodes = dp.expected_offload_energy(
            4e4, ref_task, ref_edge, ref_radio,
            make_channel(100.0, node_count=128), grid_size=513)
        assert abs(finer_grid - base) / base < 5e-3
        assert abs(finer_nodes - base) / base < 5e-3
        # converged-run band for the reference configuration
        assert 2.5e-3 < base < 3.5e-3

    def test_domain(self, ref_task, ref_edge, ref_radio, ref_channel):
        for bad in (0.0, -1.0, 5e5, 6e5):
            with pytest.raises(InfeasibleError):
                dp.expected_offload_energy(bad, ref_task, ref_edge, ref_radio, ref_channel)


class TestTableInvariants:
    def test_stagewise_convexity(self, ref_table):
        for n in range(1, ref_table.n_max + 1):
            row = ref_table.stage_values[n - 1]
            assert np.isfinite(row).all()
            sd = row[2:] - 2 * row[1:-1] + row[:-2]
            assert sd.min() >= -1e-9 * np.abs(row).max()

    def test_monotone_in_d_and_stage(self, ref_table):
        vals = ref_table.stage_values
        scale = np.abs(vals).max()
        assert (np.diff(vals, axis=1) >= -1e-12 * scale).all()
        assert (vals[1:] <= vals[:-1] + 1e-12 * scale).all()

    def test_policy_consistency(self, ref_table):
        nodes = ref_table.rule.nodes
        weights = ref_table.rule.weights
        for n in (2, 5, 10):
            for k in (128, 384, 512):
                d = float(ref_table.d_grid[k])
                send, objective = dp.decide_batch(ref_table, n, np.full(nodes.size, d), nodes)
                if n >= 3:
                    # literal form: block energy plus interpolated read of J_{n-1}
                    rebuilt = np.array([
                        model.tx_energy(float(s), float(h), ref_table.radio.block, 1e6)
                        + dp.eval_J(ref_table, n - 1, d - float(s))
                        for s, h in zip(send, nodes)])
                    lhs = float(weights @ rebuilt)
                else:
                    lhs = float(weights @ objective)
                rhs = float(ref_table.stage_values[n - 1, k])
                assert lhs == pytest.approx(rhs, rel=1e-6)


class TestTableCache:
    def test_hit_returns_same_object(self, ref_channel, ref_radio):
        cache = dp.TableCache(ref_channel.rule, ref_radio, grid_size=65)
        a = cache.table(1e4, 1e-3, 3)
        b = cache.table(1e4, 1e-3, 3)
        assert a is b
        assert len(cache) == 1
        c = cache.table(1e4, 1e-3 + 5e-10, 3)  # inside the 1 ns rounding bucket
        assert c is a
        cache.table(1e4, 1.1e-3, 3)
        assert len(cache) == 2


class TestDump:
    def test_csv_dump(self, ref_channel, ref_radio, tmp_path):
        table = dp.build_value_tables(1e3, 1e-3, 2, 33, ref_channel.rule, ref_radio)
        path = tmp_path / "table.csv"
        dp.dump_value_table(table, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "n,d_nats,J_J"
        assert len(lines) == 1 + 2 * 33
        n, d, j = lines[1].split(",")
        assert (n, float(d), float(j)) == ("1", 0.0, 0.0)
