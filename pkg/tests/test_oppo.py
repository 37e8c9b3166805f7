import math
from unittest.mock import patch

import numpy as np
import pytest

from delays.buffer import FeedbackBuffer, FeedbackPacket
from delays.schedule import make_schedule
from estimation.confidence import ConfidenceSet, TransitionCounts, contains_truth, log_term
from estimation.costs import is_cost_estimator
from estimation.optimism import optimistic_transition, upper_occupancy
from learners.base import Learner, sample_action
from learners.oppo import (
    DelayedOppo,
    OppoConfig,
    evaluate_policy_optimistic,
    improve_policy,
    policy_from_scores,
    tuned_parameters,
)
from mdp.dynamics import policy_value, q_backup, rollout, sample_episode, v_from_q
from mdp.errors import ContractViolation
from mdp.model import CostSequence, Policy, TabularMdp, Trajectory
from tests.helpers import drive

REGIMES = [
    ("full_info", "known"),
    ("full_info", "unknown"),
    ("bandit", "known"),
    ("bandit", "unknown"),
]


def _config(mode, dynamics, K, **extra):
    return OppoConfig(
        learning_rate=0.3,
        exploration=0.05 if mode == "bandit" else 0.0,
        num_episodes=K,
        feedback_mode=mode,
        dynamics_mode=dynamics,
        **extra,
    )


def reference_oppo(mdp, costs, mode, dynamics, eta, gamma, delta, seed):
    """Non-delayed OPPO written as one plain loop."""
    rng = np.random.default_rng(seed)
    H, S, A = mdp.shape
    K = costs.num_episodes
    counts = TransitionCounts(H, S, A, log_term(H, S, A, K, delta))
    scores = np.zeros((H, S, A))
    policy = Policy.uniform(H, S, A)
    policies = []
    for k in range(K):
        policies.append(policy.probs.copy())
        cost = costs.tables[k]
        traj = sample_episode(mdp, policy, cost, rng)
        if dynamics == "unknown":
            counts.observe(traj)
        model = mdp if dynamics == "known" else counts.confidence_set()

        if mode == "full_info":
            c_hat = np.asarray(cost, dtype=float)
        else:
            u = upper_occupancy(model, policy, mdp.initial_state)
            c_hat = np.zeros((H, S, A))
            steps = np.arange(H)
            c_hat[steps, traj.states, traj.actions] = is_cost_estimator(
                traj.suffered_costs, True, u[steps, traj.states], policy.probs[steps, traj.states, traj.actions], gamma
            )

        V = np.zeros((H + 1, S))
        Q = np.zeros((H, S, A))
        for h in reversed(range(H)):
            if dynamics == "known":
                Q[h] = q_backup(c_hat[h], mdp.transitions[h], V[h + 1])
            else:
                p_hat = optimistic_transition(model.p_bar[h], model.epsilon[h], V[h + 1])
                Q[h] = q_backup(c_hat[h], p_hat, V[h + 1])
            V[h] = v_from_q(Q[h], policy.probs[h])

        scores = scores + np.array(Q, copy=True)
        policy = policy_from_scores(scores, eta)
    return policies


class TestTunedParameters:
    def test_full_information(self):
        eta, gamma = tuned_parameters("full_info", 3, 2, 100, 44)
        assert eta == pytest.approx(1.0 / (3 * 12))
        assert gamma == 0.0

    def test_bandit(self):
        eta, gamma = tuned_parameters("bandit", 2, 4, 10, 20)
        scale = 4**1.5 * 10 + 20
        assert eta == pytest.approx(1.0 / (2 * scale ** (2 / 3)))
        assert gamma == pytest.approx(scale ** (-1 / 3))


class TestOppoConfig:
    def test_bandit_needs_exploration(self):
        with pytest.raises(ValueError):
            OppoConfig(learning_rate=0.1, num_episodes=10, feedback_mode="bandit")

    def test_explicit_exploration_needs_d_max(self):
        with pytest.raises(ValueError):
            OppoConfig(learning_rate=0.1, num_episodes=10, dynamics_mode="unknown", use_explicit_exploration=True)

    def test_explicit_exploration_needs_unknown_dynamics(self):
        with pytest.raises(ValueError):
            OppoConfig(learning_rate=0.1, num_episodes=10, use_explicit_exploration=True, d_max_hint=3)


class TestImprovePolicy:
    def test_empty_batch_keeps_scores(self):
        scores = np.zeros((1, 1, 2))
        new_scores, policy = improve_policy(scores, [], 1.0)
        assert new_scores is scores
        assert policy.probs.tolist() == [[[0.5, 0.5]]]

    def test_exponential_weights(self):
        q = np.array([[[0.0, math.log(3.0)]]])
        _, policy = improve_policy(np.zeros((1, 1, 2)), [q], 1.0)
        assert policy.probs[0, 0] == pytest.approx([0.75, 0.25])

    def test_batch_equals_sum(self, rng):
        q1, q2 = rng.random((2, 2, 3, 4))
        scores, batched = improve_policy(np.zeros((2, 3, 4)), [q1, q2], 0.7)
        _, summed = improve_policy(np.zeros((2, 3, 4)), [q1 + q2], 0.7)
        assert batched.probs == pytest.approx(summed.probs, abs=1e-15)
        assert scores == pytest.approx(q1 + q2)

    def test_extreme_scores_keep_every_action_positive(self):
        policy = policy_from_scores(np.array([[[0.0, 1e6, -1e6]]]), 1.0)
        assert np.all(policy.probs > 0.0)
        assert policy.probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert policy.probs[0, 0, 2] == pytest.approx(1.0)

    def test_non_finite_rejected(self):
        with pytest.raises(ContractViolation):
            improve_policy(np.zeros((1, 1, 2)), [np.array([[[np.inf, 0.0]]])], 1.0)


class TestEvaluation:
    def test_known_dynamics_is_exact_value(self, small_mdp, small_costs, rng):
        policy = Policy(rng.dirichlet(np.ones(2), size=(3, 3)))
        cost = small_costs.tables[0]
        traj = sample_episode(small_mdp, policy, cost, rng)
        packet = FeedbackPacket(1, traj, cost, "full_info", policy, 0)
        config = _config("full_info", "known", 10)
        tables = evaluate_policy_optimistic(packet, small_mdp, config, small_mdp.initial_state)
        exact = policy_value(small_mdp, policy, cost)
        assert tables.Q == pytest.approx(exact.Q, abs=1e-12)

    def test_optimism_under_covering_set(self, small_mdp, small_costs, rng):
        policy = Policy.uniform(*small_mdp.shape)
        cost = small_costs.tables[2]
        traj = sample_episode(small_mdp, policy, cost, rng)
        packet = FeedbackPacket(1, traj, cost, "full_info", policy, 0)
        config = _config("full_info", "unknown", 10)
        counts = TransitionCounts(*small_mdp.shape, log_term(*small_mdp.shape, 10, 0.1))
        counts.observe(traj)
        tables = evaluate_policy_optimistic(packet, counts.confidence_set(), config, small_mdp.initial_state)
        truth = policy_value(small_mdp, policy, cost)
        assert tables.initial_value(0) <= truth.initial_value(0) + 1e-10


class TestZeroDelayReduction:
    @pytest.mark.parametrize("mode,dynamics", REGIMES)
    def test_matches_non_delayed_reference(self, mode, dynamics):
        rng = np.random.default_rng(17)
        mdp = TabularMdp.random(4, 3, 3, rng)
        K = 200
        costs = CostSequence(rng.random((K, 3, 4, 3)))
        config = _config(mode, dynamics, K)
        learner = DelayedOppo(config, mdp)
        delayed = drive(learner, mdp, costs, make_schedule("fixed", {"d": 0}, K), mode, seed=99)
        reference = reference_oppo(mdp, costs, mode, dynamics, config.learning_rate, config.exploration, config.delta, seed=99)
        assert len(delayed) == len(reference) == K
        for ours, theirs in zip(delayed, reference):
            assert np.array_equal(ours, theirs)

    def test_non_delayed_trajectories_match_too(self):
        rng = np.random.default_rng(5)
        mdp = TabularMdp.random(3, 2, 2, rng)
        K = 60
        costs = CostSequence(rng.random((K, 2, 3, 2)))
        schedule = make_schedule("fixed", {"d": 0}, K)
        a = drive(DelayedOppo(_config("full_info", "unknown", K), mdp), mdp, costs, schedule, "full_info", seed=3)
        b = drive(
            DelayedOppo(_config("full_info", "unknown", K, trajectory_delayed=False), mdp),
            mdp, costs, schedule, "full_info", seed=3,
        )
        for x, y in zip(a, b):
            assert np.array_equal(x, y)


class TestDelayedOppo:
    def test_satisfies_learner_protocol(self, small_mdp):
        assert isinstance(DelayedOppo(_config("full_info", "known", 5), small_mdp), Learner)

    def test_no_feedback_keeps_policy(self, small_mdp, small_costs):
        learner = DelayedOppo(_config("full_info", "known", 12), small_mdp)
        schedule = make_schedule("fixed", {"d": 20}, 12)
        policies = drive(learner, small_mdp, small_costs, schedule, "full_info", seed=1)
        assert all(np.array_equal(p, policies[0]) for p in policies)

    def test_replayed_feedback_rejected(self, small_mdp, small_costs, rng):
        learner = DelayedOppo(_config("full_info", "known", 12), small_mdp)
        learner.begin_episode(1)
        traj = sample_episode(small_mdp, learner.policy, small_costs.tables[0], rng)
        packet = FeedbackPacket(1, traj, small_costs.tables[0], "full_info", learner.policy, 0)
        learner.end_episode(1, traj)
        learner.on_feedback(1, [packet])
        with pytest.raises(ContractViolation):
            learner.on_feedback(2, [packet])

    def test_restart_keeps_transition_counts(self, small_mdp, small_costs):
        learner = DelayedOppo(_config("full_info", "unknown", 12), small_mdp)
        drive(learner, small_mdp, small_costs, make_schedule("fixed", {"d": 1}, 12), "full_info", seed=2)
        seen = learner.counts.counts.sum()
        learner.restart(0.01)
        assert learner.eta == 0.01
        assert np.all(learner.scores == 0.0)
        assert np.allclose(learner.policy.probs, 1.0 / small_mdp.num_actions)
        assert learner.counts.counts.sum() == seen > 0

    def test_rejects_a_trajectory_from_another_start(self, small_mdp, small_costs, rng):
        learner = DelayedOppo(_config("full_info", "unknown", 12), small_mdp)
        learner.begin_episode(1)
        traj = sample_episode(small_mdp, learner.policy, small_costs.tables[0], rng)
        moved = Trajectory(
            states=np.r_[(traj.states[0] + 1) % small_mdp.num_states, traj.states[1:]],
            actions=traj.actions,
            suffered_costs=traj.suffered_costs,
            final_state=traj.final_state,
        )
        with pytest.raises(ContractViolation):
            learner.end_episode(1, moved)

    def test_explicit_exploration_gates_and_skips(self, small_mdp, small_costs):
        config = _config("full_info", "unknown", 12, use_explicit_exploration=True, d_max_hint=3)
        learner = DelayedOppo(config, small_mdp)
        assert learner.exploration_gate().all()
        played = learner.begin_episode(1)
        assert np.allclose(played.probs, 1.0 / small_mdp.num_actions)
        policies = drive(learner, small_mdp, small_costs, make_schedule("fixed", {"d": 0}, 12), "full_info", seed=4)
        # the gate only opens after 2 d_max log(HSA / delta) visits, far beyond 12 episodes
        assert learner.k_exp == set(range(1, 13))
        assert all(np.array_equal(p, policies[0]) for p in policies)

    def test_state_dict(self, small_mdp):
        state = DelayedOppo(_config("bandit", "unknown", 5), small_mdp).state_dict()
        assert state["kind"] == "oppo"
        assert "transition_counts" in state


def _play(learner, mdp, cost, k, rng, delay=0):
    """One episode through ``act``; returns the bandit packet it produces."""
    learner.begin_episode(k)
    base = learner.policy
    traj = rollout(mdp, learner.act, cost, rng)
    learner.end_episode(k, traj)
    return FeedbackPacket(k, traj, traj.suffered_costs, "bandit", base, delay)


class TestBanditSnapshots:
    def test_snapshot_counts_own_trajectory_when_not_delayed(self, small_mdp, small_costs, rng):
        learner = DelayedOppo(_config("bandit", "unknown", 12, trajectory_delayed=False), small_mdp)
        first = _play(learner, small_mdp, small_costs.tables[0], 1, rng, delay=1)
        learner.on_feedback(1, [])
        snapshot = learner._snapshots[1]
        assert snapshot.n.sum() == small_mdp.horizon
        for h, (s, a) in enumerate(first.trajectory.steps()):
            assert snapshot.n[h, s, a] >= 1
        _play(learner, small_mdp, small_costs.tables[1], 2, rng)
        learner.on_feedback(2, [first])
        assert 1 not in learner._snapshots

    def test_zero_delay_snapshot_includes_arrived_trajectory(self, small_mdp, small_costs, rng):
        learner = DelayedOppo(_config("bandit", "unknown", 12), small_mdp)
        packet = _play(learner, small_mdp, small_costs.tables[0], 1, rng)
        with patch("learners.oppo.evaluate_policy_optimistic", wraps=evaluate_policy_optimistic) as evaluate:
            learner.on_feedback(1, [packet])
        model = evaluate.call_args.args[1]
        assert model.n.sum() == small_mdp.horizon
        for h, (s, a) in enumerate(packet.trajectory.steps()):
            assert model.n[h, s, a] >= 1

    def test_delayed_packet_uses_the_set_from_its_own_episode(self, small_mdp, small_costs, rng):
        learner = DelayedOppo(_config("bandit", "unknown", 12), small_mdp)
        first = _play(learner, small_mdp, small_costs.tables[0], 1, rng, delay=1)
        learner.on_feedback(1, [])
        second = _play(learner, small_mdp, small_costs.tables[1], 2, rng)
        with patch("learners.oppo.evaluate_policy_optimistic", wraps=evaluate_policy_optimistic) as evaluate:
            learner.on_feedback(2, [first, second])
        models = {call.args[0].episode: call.args[1] for call in evaluate.call_args_list}
        assert models[1].n.sum() == 0
        assert models[2].n.sum() == 2 * small_mdp.horizon
        assert learner._snapshots == {}

    def test_full_information_keeps_no_snapshots(self, small_mdp, small_costs):
        learner = DelayedOppo(_config("full_info", "unknown", 12), small_mdp)
        drive(learner, small_mdp, small_costs, make_schedule("fixed", {"d": 3}, 12), "full_info", seed=6)
        assert learner._snapshots == {}


class TestAct:
    def test_plays_the_base_policy_without_exploration(self, small_mdp, small_costs):
        learner = DelayedOppo(_config("full_info", "known", 12), small_mdp)
        drive(learner, small_mdp, small_costs, make_schedule("fixed", {"d": 0}, 12), "full_info", seed=3)
        assert learner.begin_episode(13) is learner.policy
        H, S, _ = small_mdp.shape
        ours, theirs = np.random.default_rng(9), np.random.default_rng(9)
        for h in range(H):
            for s in range(S):
                for _ in range(10):
                    assert learner.act(s, h, ours) == sample_action(learner.policy, s, h, theirs)

    def test_action_frequencies_follow_the_policy(self, small_mdp, small_costs):
        learner = DelayedOppo(_config("full_info", "known", 12), small_mdp)
        drive(learner, small_mdp, small_costs, make_schedule("fixed", {"d": 0}, 12), "full_info", seed=3)
        learner.begin_episode(13)
        draws = np.random.default_rng(21)
        s0 = small_mdp.initial_state
        actions = [learner.act(s0, 0, draws) for _ in range(4000)]
        freq = np.bincount(actions, minlength=small_mdp.num_actions) / 4000
        assert freq == pytest.approx(learner.policy.probs[0, s0], abs=0.04)

    def test_gated_states_play_uniformly(self, small_mdp, small_costs):
        config = _config("full_info", "unknown", 12, use_explicit_exploration=True, d_max_hint=0)
        learner = DelayedOppo(config, small_mdp)
        drive(learner, small_mdp, small_costs, make_schedule("fixed", {"d": 0}, 12), "full_info", seed=5)
        played = learner.begin_episode(13)
        gate = learner.exploration_gate()
        H, S, A = small_mdp.shape
        s0 = small_mdp.initial_state
        # with d_max = 0 only never-visited states stay gated; step 0 always starts in s0
        assert not gate[0, s0]
        assert all(gate[0, s] for s in range(S) if s != s0)
        uniform = Policy.uniform(H, S, A)
        for h in range(H):
            for s in range(S):
                expected = uniform if gate[h, s] else learner.policy
                assert played.probs[h, s] == pytest.approx(expected.probs[h, s])
                ours, theirs = np.random.default_rng(h * S + s), np.random.default_rng(h * S + s)
                for _ in range(10):
                    assert learner.act(s, h, ours) == sample_action(expected, s, h, theirs)

    def test_seeded_actions_are_reproducible(self, small_mdp, small_costs):
        config = _config("bandit", "unknown", 12)
        streams = []
        for _ in range(2):
            learner = DelayedOppo(config, small_mdp)
            drive(learner, small_mdp, small_costs, make_schedule("fixed", {"d": 1}, 12), "bandit", seed=8)
            learner.begin_episode(13)
            draws = np.random.default_rng(30)
            streams.append([learner.act(s, h, draws) for h in range(3) for s in range(3) for _ in range(5)])
        assert streams[0] == streams[1]


def test_optimistic_values_lower_bound_true_values():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        mdp = TabularMdp.random(3, 2, 3, rng)
        K = 40
        costs = CostSequence(rng.random((K, 3, 3, 2)))
        config = _config("full_info", "unknown", K)
        learner = DelayedOppo(config, mdp)
        schedule = make_schedule("uniform_random", {"d_hi": 3}, K, rng)
        buffer = FeedbackBuffer(schedule, 3, 2, 3)
        for k in range(1, K + 1):
            played = learner.begin_episode(k)
            traj = sample_episode(mdp, played, costs.tables[k - 1], rng)
            packet = FeedbackPacket(k, traj, costs.tables[k - 1], "full_info", learner.policy, schedule.delay(k))
            learner.end_episode(k, traj)
            buffer.record_visit(packet)
            arrived = buffer.deliver(k)
            learner.on_feedback(k, arrived)
            cs = learner.counts.confidence_set()
            if not contains_truth(cs, mdp):
                continue
            for p in arrived:
                estimate = evaluate_policy_optimistic(p, cs, config, mdp.initial_state).initial_value(mdp.initial_state)
                truth = policy_value(mdp, p.policy_snapshot, p.costs).initial_value(mdp.initial_state)
                assert estimate <= truth + 1e-10
