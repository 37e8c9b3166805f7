import numpy as np
import pytest

from delays.buffer import FeedbackBuffer, FeedbackPacket
from delays.schedule import DelaySchedule, arrivals, make_schedule, missing_count, missing_counts
from mdp.errors import ContractViolation
from mdp.model import Policy, Trajectory


def _trajectory(H=2):
    return Trajectory(
        states=np.zeros(H, dtype=int),
        actions=np.zeros(H, dtype=int),
        suffered_costs=np.zeros(H),
        final_state=0,
    )


def _packet(j, delay, H=2, S=2, A=2, mode="full_info"):
    costs = np.zeros((H, S, A)) if mode == "full_info" else np.zeros(H)
    return FeedbackPacket(
        episode=j,
        trajectory=_trajectory(H),
        costs=costs,
        mode=mode,
        policy_snapshot=Policy.uniform(H, S, A),
        delay=delay,
    )


class TestSchedules:
    def test_fixed(self):
        schedule = make_schedule("fixed", {"d": 2}, 6)
        assert schedule.delays == (2,) * 6
        assert schedule.total == 12
        assert schedule.max_delay == 2

    def test_zero_delay_arrivals(self):
        schedule = make_schedule("fixed", {"d": 0}, 5)
        assert all(arrivals(schedule, k) == {k} for k in range(1, 6))
        assert missing_counts(schedule).tolist() == [0] * 5

    def test_fixed_delay_arrivals(self):
        schedule = make_schedule("fixed", {"d": 2}, 6)
        assert arrivals(schedule, 1) == frozenset()
        assert arrivals(schedule, 3) == {1}
        assert arrivals(schedule, 6) == {4}

    def test_one_missing(self):
        schedule = make_schedule("one_missing", None, 4)
        assert missing_counts(schedule).tolist() == [1, 1, 1, 1]
        assert all(1 not in arrivals(schedule, k) for k in range(1, 5))

    def test_adversarial_list_length_checked(self):
        with pytest.raises(ContractViolation):
            make_schedule("adversarial_list", {"delays": [1, 2]}, 3)

    def test_negative_delay_rejected(self):
        with pytest.raises(ContractViolation):
            DelaySchedule((1, -1))

    def test_random_kinds_need_rng(self):
        with pytest.raises(ContractViolation):
            make_schedule("uniform_random", {"d_hi": 3}, 5)

    def test_geometric_cap(self, rng):
        schedule = make_schedule("geometric", {"p": 0.05, "d_cap": 7}, 200, rng)
        assert schedule.max_delay <= 7
        assert min(schedule.delays) >= 0

    def test_json_round_trip(self, rng):
        schedule = make_schedule("uniform_random", {"d_hi": 4}, 20, rng)
        assert DelaySchedule.from_json(schedule.to_json()).delays == schedule.delays

    def test_unknown_kind(self):
        with pytest.raises(ContractViolation):
            make_schedule("bursty", {}, 3)


class TestArrivalAccounting:
    def test_arrivals_partition_delivered_episodes(self, rng):
        for _ in range(50):
            schedule = make_schedule("uniform_random", {"d_hi": 6}, 30, rng)
            seen = [j for k in range(1, 31) for j in arrivals(schedule, k)]
            expected = [j for j in range(1, 31) if j + schedule.delay(j) <= 30]
            assert sorted(seen) == expected
            assert len(seen) == len(set(seen))

    def test_missing_counts_match_definition(self, rng):
        schedule = make_schedule("uniform_random", {"d_hi": 5}, 25, rng)
        fast = missing_counts(schedule)
        assert fast.tolist() == [missing_count(schedule, k) for k in range(1, 26)]

    def test_missing_sum_bounded_by_total_delay(self, rng):
        for _ in range(100):
            K = 40
            schedule = make_schedule("uniform_random", {"d_hi": 8}, K, rng)
            total_missing = int(missing_counts(schedule).sum())
            assert total_missing <= schedule.total
            if all(d <= K - j for j, d in enumerate(schedule.delays, start=1)):
                assert total_missing == schedule.total

    def test_worked_example(self):
        schedule = DelaySchedule((2, 0, 1))
        assert [arrivals(schedule, k) for k in (1, 2, 3)] == [frozenset(), {2}, {1}]
        assert [missing_count(schedule, k) for k in (1, 2, 3)] == [1, 1, 1]
        assert int(missing_counts(schedule).sum()) == 3 == schedule.total
        # episode 3 is due after the horizon unless the run goes on
        assert arrivals(DelaySchedule((2, 0, 1, 1)), 4) == {3}

    def test_fixed_delay_missing_sum_equals_total(self):
        schedule = DelaySchedule((2, 2, 2, 0, 0))
        assert missing_counts(schedule).tolist() == [1, 2, 2, 1, 0]
        assert int(missing_counts(schedule).sum()) == 6


class TestFeedbackBuffer:
    def test_delivery_and_counters(self):
        schedule = DelaySchedule((1, 0, 0))
        buffer = FeedbackBuffer(schedule, 2, 2, 2)
        buffer.record_visit(_packet(1, 1))
        assert buffer.deliver(1) == []
        assert buffer.missing == 1
        buffer.check_invariants()

        buffer.record_visit(_packet(2, 0))
        delivered = buffer.deliver(2)
        assert [p.episode for p in delivered] == [1, 2]
        assert buffer.missing == 0
        assert np.array_equal(buffer.m, buffer.n)
        buffer.check_invariants()

    def test_outstanding_visits_track_missing(self, rng):
        schedule = make_schedule("uniform_random", {"d_hi": 3}, 15, rng)
        buffer = FeedbackBuffer(schedule, 2, 2, 2)
        for k in range(1, 16):
            buffer.record_visit(_packet(k, schedule.delay(k)))
            buffer.deliver(k)
            assert buffer.missing == missing_count(schedule, k)
            assert int((buffer.m - buffer.n).sum()) == 2 * buffer.missing
            assert np.all(buffer.n <= buffer.m)

    def test_double_delivery_rejected(self):
        buffer = FeedbackBuffer(DelaySchedule((0,)), 2, 2, 2)
        packet = _packet(1, 0)
        buffer.record_visit(packet)
        buffer.deliver(1)
        with pytest.raises(ContractViolation):
            buffer.record_observed(packet)

    def test_observed_before_executed_rejected(self):
        buffer = FeedbackBuffer(DelaySchedule((0, 0)), 2, 2, 2)
        with pytest.raises(ContractViolation):
            buffer.record_observed(_packet(2, 0))

    def test_past_horizon_never_delivered(self):
        buffer = FeedbackBuffer(DelaySchedule((5, 0)), 2, 2, 2)
        buffer.record_visit(_packet(1, 5))
        buffer.record_visit(_packet(2, 0))
        assert [p.episode for p in buffer.deliver(2)] == [2]
        assert buffer.dropped_past_horizon == 1

    def test_delay_must_match_schedule(self):
        buffer = FeedbackBuffer(DelaySchedule((1,)), 2, 2, 2)
        with pytest.raises(ContractViolation):
            buffer.record_visit(_packet(1, 0))


class TestFeedbackPacket:
    def test_bandit_payload_shape(self):
        with pytest.raises(ContractViolation):
            FeedbackPacket(
                episode=1,
                trajectory=_trajectory(),
                costs=np.zeros((2, 2, 2)),
                mode="bandit",
                policy_snapshot=Policy.uniform(2, 2, 2),
                delay=0,
            )

    def test_suffered_costs_from_table(self):
        packet = _packet(1, 0)
        assert packet.suffered_costs().tolist() == [0.0, 0.0]
        assert packet.arrival == 1
