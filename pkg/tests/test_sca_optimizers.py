import logging
from unittest.mock import Mock, patch

import numpy as np
import pandas as pd
import pytest

from app.models.beamforming import Allocation, PhasePlan, ScaOptions
from app.models.system import SystemConfig
from app.services.allocation import build_solution, evaluate_throughput, finish_solution, slot_gains
from app.services.effective_channel import NormalizedChannels, align_phases
from app.services.scenario import generate_scenario
from app.services.sca import (
    _ScaEngine,
    _initial_ul_vectors,
    baseline_no_irs,
    baseline_random_phases,
    round_association,
    solve_general,
    solve_hybrid,
    solve_static,
    solve_ul_adaptive,
    solve_user_adaptive,
    ul_adaptive_from_static,
)


def nondecreasing(trace):
    values = np.asarray(trace)
    return bool(np.all(np.diff(values) >= -1e-9 * np.maximum(1.0, np.abs(values[:-1]))))


class TestStaticScheme:
    def setup_method(self):
        self.scenario = generate_scenario(SystemConfig(num_elements=6, num_devices=2, seed=3))
        self.opts = ScaOptions(restarts=2, max_outer_iters=20)

    def test_trace_and_plan(self):
        sol = solve_static(self.scenario, self.opts)
        assert sol.scheme == "static"
        assert sol.plan.assignment == (0, 0)
        assert nondecreasing(sol.trace)
        assert sol.iterations <= self.opts.max_outer_iters
        assert sol.restarts_used == 2
        assert sol.num_vectors == 1

    def test_not_worse_than_aligned_start(self):
        sol = solve_static(self.scenario, self.opts)
        for k in range(2):
            v, _ = align_phases(self.scenario.h_d[k], self.scenario.q[k])
            start = finish_solution(self.scenario, PhasePlan(v0=v, assignment=(0, 0)))
            if k == int(np.argmax(np.abs(self.scenario.q_bar).sum(axis=1))):
                assert sol.throughput >= start.throughput - 1e-9

    def test_throughput_is_self_consistent(self):
        sol = solve_static(self.scenario, self.opts)
        value, per_device = evaluate_throughput(self.scenario, sol.plan, sol.alloc)
        assert sol.throughput == pytest.approx(value, rel=1e-9)
        np.testing.assert_allclose(sol.device_throughputs, per_device)
        assert sol.alloc.total_time <= self.scenario.config.total_time + 1e-9

    def test_deterministic(self):
        first = solve_static(self.scenario, self.opts)
        second = solve_static(self.scenario, self.opts)
        assert first.throughput == second.throughput
        np.testing.assert_array_equal(first.plan.v0.values, second.plan.v0.values)

    def test_trace_file(self, tmp_path):
        path = tmp_path / "trace.csv"
        solve_static(self.scenario, self.opts.model_copy(update={"trace_path": path}))
        frame = pd.read_csv(path)
        assert {"scheme", "restart", "iteration", "objective"} <= set(frame.columns)
        assert set(frame["scheme"]) == {"static"}


class TestDedicatedSchemes:
    def setup_method(self):
        self.scenario = generate_scenario(SystemConfig(num_elements=6, num_devices=3, seed=5))
        self.opts = ScaOptions(restarts=2, max_outer_iters=20)
        self.static = solve_static(self.scenario, self.opts)

    def test_user_adaptive_dominates_static(self):
        sol = solve_user_adaptive(self.scenario, self.opts, warm_start=self.static)
        assert sol.throughput >= self.static.throughput - 1e-9
        assert sol.plan.assignment == (1, 2, 3)
        assert nondecreasing(sol.trace)
        assert sol.overhead_coefficients == 4 * 6

    def test_user_adaptive_uses_aligned_uplink_vectors(self):
        sol = solve_user_adaptive(self.scenario, self.opts, warm_start=self.static)
        gains = slot_gains(self.scenario, sol.plan)
        for k in range(3):
            _, gamma = align_phases(self.scenario.h_d[k], self.scenario.q[k])
            assert gains[k, k + 1] == pytest.approx(gamma, rel=1e-9)

    def test_hybrid_without_vectors_is_static(self):
        sol = solve_hybrid(self.scenario, 0, self.opts, warm_start=self.static)
        assert sol.scheme == "hybrid"
        assert sol.throughput == self.static.throughput

    def test_hybrid_dedicates_strongest_devices(self):
        sol = solve_hybrid(self.scenario, 1, self.opts, warm_start=self.static)
        strongest = int(np.argmax(np.abs(self.scenario.q_bar).sum(axis=1)))
        assert sol.plan.assignment[strongest] == 1
        assert sum(a == 0 for a in sol.plan.assignment) == 2
        assert sol.throughput >= self.static.throughput - 1e-9

    def test_hybrid_with_all_vectors_matches_user_adaptive(self):
        hybrid = solve_hybrid(self.scenario, 3, self.opts, warm_start=self.static)
        adaptive = solve_user_adaptive(self.scenario, self.opts, warm_start=self.static)
        assert hybrid.throughput == pytest.approx(adaptive.throughput, rel=1e-9)

    def test_hybrid_vector_count_checked(self):
        with pytest.raises(ValueError):
            solve_hybrid(self.scenario, 4, self.opts, warm_start=self.static)
        with pytest.raises(ValueError):
            solve_hybrid(self.scenario, -1, self.opts, warm_start=self.static)


class TestGeneralScheme:
    def setup_method(self):
        self.scenario = generate_scenario(SystemConfig(num_elements=5, num_devices=2, seed=9))
        self.opts = ScaOptions(restarts=2, max_outer_iters=15)
        self.static = solve_static(self.scenario, self.opts)

    def test_more_vectors_never_hurt(self):
        one = solve_general(self.scenario, 1, self.opts, warm_start=self.static)
        two = solve_general(self.scenario, 2, self.opts, warm_start=one)
        assert one.throughput >= self.static.throughput - 1e-9
        assert two.throughput >= one.throughput - 1e-9
        assert nondecreasing(two.trace)

    def test_added_vector_aligns_next_strongest_device(self):
        channels = NormalizedChannels.from_scenario(self.scenario)
        strongest, second = (int(k) for k in channels.strength_order())
        assignment = [0, 0]
        assignment[strongest] = 1
        plan = PhasePlan(
            v0=self.static.plan.v0,
            ul_vectors=(align_phases(self.scenario.h_d[strongest], self.scenario.q[strongest])[0],),
            assignment=tuple(assignment),
        )
        warm = finish_solution(self.scenario, plan, scheme="general")
        topped = _initial_ul_vectors(self.scenario, channels, warm, 2, decoupled=False)[0]
        expected = align_phases(self.scenario.h_d[second], self.scenario.q[second])[0]
        np.testing.assert_allclose(topped[1], expected.full)

    def test_chained_vectors_reach_user_adaptive(self):
        scenario = generate_scenario(SystemConfig(num_elements=6, num_devices=3, seed=4))
        opts = ScaOptions(restarts=2, max_outer_iters=20)
        static = solve_static(scenario, opts)
        adaptive = solve_user_adaptive(scenario, opts, warm_start=static)
        chained = static
        for j in range(1, 4):
            chained = solve_general(scenario, j, opts, warm_start=chained)
        assert chained.throughput >= adaptive.throughput * 0.99

    def test_devices_sit_on_their_best_slot(self):
        sol = solve_general(self.scenario, 2, self.opts, warm_start=self.static)
        gains = slot_gains(self.scenario, sol.plan)
        for k, slot in enumerate(sol.plan.assignment):
            assert gains[k, slot] >= gains[k].max() * (1 - 1e-12)
            assert np.all(sol.alloc.t[k, np.arange(sol.plan.num_slots) != slot] == 0)

    def test_zero_vectors_is_static(self):
        sol = solve_general(self.scenario, 0, self.opts, warm_start=self.static)
        assert sol.throughput == self.static.throughput
        with pytest.raises(ValueError):
            solve_general(self.scenario, -1, self.opts, warm_start=self.static)

    def test_ul_adaptive_solved_directly(self):
        sol = solve_ul_adaptive(self.scenario, self.opts, warm_start=self.static)
        assert sol.scheme == "ul_adaptive"
        assert all(slot == 1 for slot in sol.plan.assignment)
        assert sol.throughput >= self.static.throughput - 1e-9

    def test_ul_adaptive_from_static(self):
        sol = ul_adaptive_from_static(self.static, self.scenario)
        assert sol.plan.assignment == (1, 1)
        np.testing.assert_array_equal(sol.plan.ul_vectors[0].values, self.static.plan.v0.values)
        assert sol.throughput == pytest.approx(self.static.throughput, rel=1e-9)
        assert sol.overhead_coefficients == 2 * 5

    def test_rounding_pools_split_devices(self):
        sol = solve_general(self.scenario, 1, self.opts, warm_start=self.static)
        times = sol.alloc.t.sum(axis=1)
        energies = sol.alloc.e.sum(axis=1)
        split_t = np.column_stack([0.5 * times, 0.5 * times])
        split_e = np.column_stack([0.5 * energies, 0.5 * energies])
        split = build_solution(self.scenario, sol.plan, Allocation(tau0=sol.alloc.tau0, t=split_t, e=split_e))
        rounded = round_association(split, self.scenario)
        assert rounded.throughput >= split.throughput - 1e-9
        assert all(np.count_nonzero(row) <= 1 for row in rounded.alloc.t)


    def test_rounding_tie_rules(self):
        plan = PhasePlan(v0=self.static.plan.v0, ul_vectors=(self.static.plan.v0,), assignment=(1, 0))
        times = self.static.alloc.t.sum(axis=1)
        energies = self.static.alloc.e.sum(axis=1)
        t = np.array([[0.0, times[0]], [0.5 * times[1], 0.5 * times[1]]])
        e = np.array([[0.0, energies[0]], [0.5 * energies[1], 0.5 * energies[1]]])
        sol = build_solution(self.scenario, plan, Allocation(tau0=self.static.alloc.tau0, t=t, e=e))
        rounded = round_association(sol, self.scenario)
        assert rounded.plan.assignment == (1, 0)


class TestBaselines:
    def setup_method(self):
        self.scenario = generate_scenario(SystemConfig(num_elements=4, num_devices=2, seed=2))

    def test_random_phases_are_reproducible(self):
        first = baseline_random_phases(self.scenario, trials=5, seed=1)
        second = baseline_random_phases(self.scenario, trials=5, seed=1)
        assert first.throughput == second.throughput
        assert first.restarts_used == 5
        assert first.scheme == "random"

    def test_more_random_trials_never_hurt(self):
        few = baseline_random_phases(self.scenario, trials=3, seed=1)
        many = baseline_random_phases(self.scenario, trials=10, seed=1)
        assert many.throughput >= few.throughput

    def test_random_trials_checked(self):
        with pytest.raises(ValueError):
            baseline_random_phases(self.scenario, trials=0)

    def test_no_irs_matches_direct_links(self):
        sol = baseline_no_irs(self.scenario)
        bare = self.scenario.without_irs()
        expected = finish_solution(bare, PhasePlan(v0=sol.plan.v0, assignment=(0, 0)))
        assert sol.scheme == "no_irs"
        assert sol.throughput == pytest.approx(expected.throughput, rel=1e-12)


class HalvingEngine(_ScaEngine):
    label = "halving"

    def value(self, vectors):
        return float(vectors[0, 0].real)

    def subproblem(self, vectors):
        return object(), None

    @staticmethod
    def read_vectors(problem, z, current):
        return current * 0.5


class TestScaEngine:
    def test_worse_step_is_rejected_with_relative_drop(self, caplog):
        engine = HalvingEngine(None, 1.0, ScaOptions(max_outer_iters=3))
        report = Mock(status="optimal", iterations=2)
        with patch("app.services.sca.solve_subproblem", return_value=(np.zeros(1), report)):
            with caplog.at_level(logging.WARNING, logger="app.services.sca"):
                run = engine.run(np.array([[1.0 + 0.0j]]))
        assert run.trace == [1.0]
        assert run.iterations == 0
        assert "drops by 5.000e-01 relative" in caplog.text
