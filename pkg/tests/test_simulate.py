import math

import numpy as np
import pytest

from timefuel import LtiSystem, build_spectrum, validate_problem
from timefuel.sequences import CandidateSequence, OrderTooLargeError
from timefuel.simulate import (
    InvalidScheduleError,
    SwitchingSchedule,
    evaluate_cost,
    grid_oracle,
    propagate,
    reachability_x0,
    schedule_from_times,
)

from conftest import random_schedule, random_system


def rk4_propagate(system, x0, schedule, step=1e-5):
    """Reference integrator: classic fourth-order Runge-Kutta per segment."""
    lam = system.eigenvalues
    b = system.gains
    x = np.array(x0, dtype=float)
    bp = schedule.breakpoints
    for i, u in enumerate(schedule.levels):
        length = bp[i + 1] - bp[i]
        steps = max(1, int(math.ceil(length / step)))
        h = length / steps
        f = lambda y: lam * y + b * u
        for _ in range(steps):
            k1 = f(x)
            k2 = f(x + 0.5 * h * k1)
            k3 = f(x + 0.5 * h * k2)
            k4 = f(x + h * k3)
            x = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


@pytest.fixture
def stable_system():
    return LtiSystem(build_spectrum([(-1, 1), (-2, 1)]), (1.0, 1.0))


class TestSchedule:
    def test_empty(self):
        s = SwitchingSchedule.empty()
        assert s.final_time == 0.0
        assert s.levels == ()

    def test_validation(self):
        with pytest.raises(InvalidScheduleError):
            SwitchingSchedule((0.0, 1.0), (0,))  # trailing off period
        with pytest.raises(InvalidScheduleError):
            SwitchingSchedule((0.0, 1.0, 1.0), (1, 0))
        with pytest.raises(InvalidScheduleError):
            SwitchingSchedule((0.5, 1.0), (1,))
        with pytest.raises(InvalidScheduleError):
            SwitchingSchedule((0.0, 0.5, 1.0), (1, 1))

    def test_from_times_collapses(self):
        s = schedule_from_times((0, 1, 0, -1), (0.0, 0.3, 0.3, 0.9))
        assert s.levels == (1, -1)
        assert s.breakpoints == pytest.approx((0.0, 0.3, 0.9))

    def test_from_times_trims_trailing_zero(self):
        s = schedule_from_times((1, 0), (0.4, 0.9))
        assert s.levels == (1,)
        assert s.breakpoints == (0.0, 0.4)

    def test_from_times_all_collapsed(self):
        s = schedule_from_times((0, 1, 0, -1), (0.2, 0.2, 0.2, 0.2))
        assert s == SwitchingSchedule.empty()

    def test_from_times_merges_equal_levels(self):
        s = schedule_from_times((1, 0, 1), (0.4, 0.4, 0.7))
        assert s.levels == (1,)
        assert s.breakpoints == (0.0, 0.7)


class TestPropagate:
    def test_equilibrium(self, stable_system):
        traj = propagate(stable_system, [0.0, 0.0], SwitchingSchedule.empty())
        np.testing.assert_array_equal(traj.terminal_state, [0.0, 0.0])

    def test_scalar_hand_value(self):
        system = LtiSystem(build_spectrum([(-1, 1)]), (1.0,))
        sched = SwitchingSchedule((0.0, math.log(2.0)), (-1,))
        traj = propagate(system, [1.0], sched)
        np.testing.assert_allclose(traj.terminal_state, [0.0], atol=1e-15)

    def test_matches_rk4(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            n = int(rng.integers(1, 4))
            system = random_system(rng, n)
            sched = random_schedule(rng)
            x0 = rng.uniform(-1, 1, size=n)
            exact = propagate(system, x0, sched).terminal_state
            reference = rk4_propagate(system, x0, sched)
            np.testing.assert_allclose(exact, reference, atol=1e-8)

    def test_semigroup(self, stable_system):
        sched = SwitchingSchedule((0.0, 0.5, 1.0, 1.5), (1, 0, -1))
        x0 = [0.3, -0.2]
        full = propagate(stable_system, x0, sched).terminal_state
        head = propagate(
            stable_system, x0, SwitchingSchedule((0.0, 0.5), (1,))
        ).terminal_state
        tail = propagate(
            stable_system, head, SwitchingSchedule((0.0, 0.5, 1.0), (0, -1))
        ).terminal_state
        np.testing.assert_allclose(tail, full, atol=1e-12)

    def test_breakpoints_sampled(self, stable_system):
        traj = propagate(
            stable_system,
            [0.7, -0.4],
            SwitchingSchedule((0.0, 1.0, 2.0, 2.5), (1, 0, -1)),
            samples_per_segment=5,
        )
        assert traj.sample_times[0] == 0.0
        assert set(np.round((0.0, 1.0, 2.0, 2.5), 12)) <= set(
            np.round(traj.sample_times, 12)
        )

    def test_stable_free_decay_monotone(self, stable_system):
        # norm can only shrink while the input is off and every mode is stable
        sched = SwitchingSchedule((0.0, 2.0, 2.5), (0, 1))
        traj = propagate(stable_system, [0.7, -0.4], sched, samples_per_segment=8)
        off_samples = traj.states[traj.sample_times <= 2.0]
        norms = np.linalg.norm(off_samples, axis=1)
        assert np.all(np.diff(norms) <= 1e-12)

    def test_samples_per_segment(self, stable_system):
        sched = SwitchingSchedule((0.0, 1.0, 2.0), (0, 1))
        traj = propagate(stable_system, [0.1, 0.1], sched, samples_per_segment=4)
        assert len(traj.sample_times) == 1 + 2 * 4


class TestReachability:
    def test_empty_schedule(self, stable_system):
        np.testing.assert_array_equal(
            reachability_x0(stable_system, SwitchingSchedule.empty()), [0.0, 0.0]
        )

    def test_duality_random(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            n = int(rng.integers(1, 5))
            system = random_system(rng, n)
            sched = random_schedule(rng)
            x0 = reachability_x0(system, sched)
            terminal = propagate(system, x0, sched).terminal_state
            assert np.max(np.abs(terminal)) <= 1e-10

    def test_scalar_hand_value(self):
        system = LtiSystem(build_spectrum([(-1, 1)]), (1.0,))
        sched = SwitchingSchedule((0.0, math.log(2.0)), (-1,))
        np.testing.assert_allclose(reachability_x0(system, sched), [1.0], rtol=1e-14)

    def test_reference_example_schedule(self):
        # optimal k = 1 switching times of the reference example transfer
        # its initial state (frozen from an independent SLSQP solve)
        system = LtiSystem(build_spectrum([(-1, 1), (-2, 1)]), (1.0, 1.0))
        sched = SwitchingSchedule((0.0, 0.6443, 1.0463, 1.1480), (-1, 0, 1))
        np.testing.assert_allclose(
            reachability_x0(system, sched), [0.6, 0.4], atol=5e-3
        )


class TestCost:
    def test_empty(self):
        assert evaluate_cost(SwitchingSchedule.empty(), 1.0) == (0.0, 0.0, 1.0)

    def test_single_bang(self):
        J, on, sp = evaluate_cost(SwitchingSchedule((0.0, 1.0), (1,)), 1.0)
        assert J == 2.0 and on == 1.0 and sp == 0.0

    def test_off_periods_counted_in_time_only(self):
        sched = SwitchingSchedule((0.0, 0.5, 1.0, 2.0), (-1, 0, 1))
        J, on, sp = evaluate_cost(sched, 2.0)
        assert on == pytest.approx(1.5)
        assert J == pytest.approx(2.0 * 2.0 + 1.5)
        assert sp == pytest.approx(1.0 - 1.5 / 2.0)

    def test_additive_over_concatenation(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            s = random_schedule(rng)
            k = float(rng.uniform(0.2, 3.0))
            J, on, _ = evaluate_cost(s, k)
            parts_on = sum(
                (s.breakpoints[i + 1] - s.breakpoints[i])
                for i, v in enumerate(s.levels)
                if v != 0
            )
            assert on == pytest.approx(parts_on)
            assert J == pytest.approx(k * s.final_time + parts_on)


class TestGridOracle:
    def test_scalar_closed_form(self):
        system = LtiSystem(build_spectrum([(-1, 1)]), (1.0,))
        spec = validate_problem(system, [0.5], 1.0)
        seq = CandidateSequence.from_levels((-1,))
        cost, times = grid_oracle(spec, seq, 1e-3, t_max=4.0)
        expected = 2.0 * math.log(1.5)
        assert abs(cost - expected) / expected < 5e-3

    def test_reference_example_winner(self):
        system = LtiSystem(build_spectrum([(-1, 1), (-2, 1)]), (1.0, 1.0))
        spec = validate_problem(system, [0.6, 0.4], 1.0)
        seq = CandidateSequence.from_levels((-1, 0, 1))
        cost, _ = grid_oracle(spec, seq, 1e-3, t_max=6.0)
        assert abs(cost - 1.8940) < 5e-3

    def test_order_guard(self):
        system = LtiSystem(build_spectrum([(-1, 1), (-2, 1), (-3, 1)]), (1, 1, 1))
        spec = validate_problem(system, [0.1, 0.1, 0.1], 1.0)
        with pytest.raises(OrderTooLargeError):
            grid_oracle(spec, CandidateSequence.from_levels((1,)), 1e-3)

    def test_infeasible_returns_none(self):
        system = LtiSystem(build_spectrum([(1, 1)]), (1.0,))
        spec = validate_problem(system, [2.0], 1.0)
        out = grid_oracle(spec, CandidateSequence.from_levels((0, -1)), 1e-2, t_max=5.0)
        assert out is None
