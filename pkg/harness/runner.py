from __future__ import annotations

import logging
import math

import numpy as np

from delays.buffer import FeedbackBuffer, FeedbackPacket
from delays.schedule import DelaySchedule, make_schedule
from harness.costs import generate_costs
from harness.schemas import ExperimentConfig, LearnerSpec, RegretRecord, RegretRow
from learners.base import FixedPolicyLearner, Learner
from learners.oppo import DelayedOppo, OppoConfig, tuned_parameters
from learners.oreps import DelayedOreps
from learners.wrappers import (
    DoublingLearner,
    RoundRobinReduction,
    SkipConfig,
    SkippingLearner,
    default_skip_threshold,
)
from mdp.dynamics import best_policy_in_hindsight, empirical_regret, initial_value, prefix_hindsight_values, rollout
from mdp.errors import ConfigError, LabError
from mdp.model import CostSequence, TabularMdp
from mdp.schemas import load_mdp

logger = logging.getLogger(__name__)


def build_mdp(config: ExperimentConfig, rng: np.random.Generator) -> TabularMdp:
    spec = config.mdp
    if spec.kind == "file":
        try:
            return load_mdp(spec.path)
        except (OSError, ValueError, LabError) as exc:
            raise ConfigError(f"cannot load MDP from {spec.path}: {exc}") from exc
    if spec.kind == "chain":
        return TabularMdp.chain(spec.num_states, spec.num_actions, spec.horizon)
    if spec.support is not None and spec.support > spec.num_states:
        raise ConfigError("support cannot exceed num_states")
    return TabularMdp.random(
        spec.num_states,
        spec.num_actions,
        spec.horizon,
        rng,
        concentration=spec.concentration,
        support=spec.support,
    )


def checkpoint_episodes(config: ExperimentConfig) -> list[int]:
    """Log-spaced episodes plus K, or every episode."""
    K = config.num_episodes
    if config.prefix_mode == "final":
        return [K]
    if config.checkpoints == "all":
        return list(range(1, K + 1))
    points = np.unique(np.round(np.geomspace(1, K, num=config.num_checkpoints)).astype(int))
    return sorted({int(k) for k in points if 1 <= k <= K} | {K})


def _oppo(spec: LearnerSpec, mdp: TabularMdp, num_episodes: int, total_delay: int, d_max: int) -> DelayedOppo:
    H, _, A = mdp.shape
    eta, gamma = tuned_parameters(spec.feedback_mode, H, A, num_episodes, total_delay)
    config = OppoConfig(
        learning_rate=spec.eta or eta,
        exploration=spec.gamma or gamma,
        delta=spec.delta,
        num_episodes=num_episodes,
        feedback_mode=spec.feedback_mode,
        dynamics_mode=spec.dynamics_mode,
        use_explicit_exploration=spec.use_explicit_exploration,
        d_max_hint=d_max if spec.use_explicit_exploration else None,
        trajectory_delayed=spec.trajectory_delayed,
        union_split=spec.union_split,
    )
    return DelayedOppo(config, mdp)


def _oreps(spec: LearnerSpec, mdp: TabularMdp, num_episodes: int, total_delay: int) -> DelayedOreps:
    return DelayedOreps(mdp, spec.eta or 1.0 / math.sqrt(num_episodes + total_delay))


def build_learner(
    spec: LearnerSpec,
    mdp: TabularMdp,
    schedule: DelaySchedule,
    costs: CostSequence | None = None,
) -> Learner:
    """Assemble the learner and its wrapper stack.

    Parameters not set in ``spec`` are tuned from K and the total delay D.
    """
    K, D, d_max = schedule.num_episodes, schedule.total, schedule.max_delay
    H, S, A = mdp.shape

    if spec.kind == "hindsight":
        if costs is None:
            raise ConfigError("the hindsight learner needs the cost sequence")
        return FixedPolicyLearner(best_policy_in_hindsight(mdp, costs)[0])

    if spec.kind == "blackbox":
        per_instance = math.ceil(K / (d_max + 1))
        if spec.base == "oreps":
            return RoundRobinReduction(lambda: _oreps(spec, mdp, per_instance, 0), d_max)
        return RoundRobinReduction(lambda: _oppo(spec, mdp, per_instance, 0, 0), d_max)

    learner: Learner = _oppo(spec, mdp, K, D, d_max) if spec.kind == "oppo" else _oreps(spec, mdp, K, D)

    feed = spec.feed_skipped_trajectories
    if feed is None:
        feed = not spec.trajectory_delayed
    if "doubling" in spec.wrappers:
        return DoublingLearner(
            learner,
            H,
            skip="skip" in spec.wrappers,
            schedule=spec.feedback_mode,
            feed_skipped_trajectories=feed,
        )
    if "skip" in spec.wrappers:
        beta = spec.beta
        if beta is None:
            bandit_delayed = spec.feedback_mode == "bandit" and spec.trajectory_delayed
            beta = default_skip_threshold(D, S, H, A if bandit_delayed else None)
            logger.warning(f"skip threshold not set; using {beta:.4g} from D={D}")
        return SkippingLearner(learner, SkipConfig(threshold=beta, feed_skipped_trajectories=feed))
    return learner


def _seed_streams(seed: int) -> list[np.random.Generator]:
    """Independent generators for the MDP, costs, delays and episodes."""
    return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(4)]


def run_experiment(config: ExperimentConfig, seed: int | None = None) -> RegretRecord:
    """Run the interaction loop for one seed and measure regret at the checkpoints.

    The learner value is the exact V^{k, pi}_1 of the policy actually played,
    so the regret carries no sampling noise; suffered costs are summed for
    reference. Actions are taken step by step through ``learner.act``.
    """
    seed = config.seeds[0] if seed is None else seed
    mdp_rng, cost_rng, delay_rng, episode_rng = _seed_streams(seed)
    K = config.num_episodes

    mdp = build_mdp(config, mdp_rng)
    try:
        costs = generate_costs(config.costs.kind, config.costs.params, mdp.shape, K, cost_rng)
        schedule = make_schedule(config.delays.kind, config.delays.params, K, delay_rng)
    except LabError as exc:
        raise ConfigError(str(exc)) from exc
    spec = config.learner
    if spec.kind == "blackbox" and spec.wrappers:
        raise ConfigError("the blackbox reduction takes no wrappers")
    learner = build_learner(spec, mdp, schedule, costs)

    H, S, A = mdp.shape
    buffer = FeedbackBuffer(schedule, S, A, H)
    wanted = checkpoint_episodes(config)
    wanted_set = set(wanted)
    logger.info(f"run '{config.name}' seed={seed}: {spec.label}, K={K}, D={schedule.total}, d_max={schedule.max_delay}")

    values = np.zeros(K)
    snapshots: dict[int, tuple[int, int, int]] = {}
    suffered_total = 0.0
    for k in range(1, K + 1):
        played = learner.begin_episode(k)
        base = learner.policy
        cost = costs.tables[k - 1]
        trajectory = rollout(mdp, learner.act, cost, episode_rng)
        values[k - 1] = initial_value(mdp, played, cost)
        suffered_total += float(trajectory.suffered_costs.sum())

        payload = cost if spec.feedback_mode == "full_info" else trajectory.suffered_costs
        packet = FeedbackPacket(
            episode=k,
            trajectory=trajectory,
            costs=payload,
            mode=spec.feedback_mode,
            policy_snapshot=base,
            delay=schedule.delay(k),
        )
        learner.end_episode(k, trajectory)
        buffer.record_visit(packet)
        learner.on_feedback(k, buffer.deliver(k))
        buffer.check_invariants()

        if k in wanted_set:
            snapshots[k] = (buffer.missing, int(getattr(learner, "skipped", 0)), int(getattr(learner, "phase", 1)))

    hindsight = prefix_hindsight_values(mdp, costs, wanted)
    cumulative = np.cumsum(values)
    regrets = empirical_regret(values, [hindsight[k] for k in wanted], at=wanted)
    rows = []
    for k, regret in zip(wanted, regrets):
        missing, skipped, phase = snapshots[k]
        cum_value = float(cumulative[k - 1])
        rows.append(
            RegretRow(
                k=k,
                value=float(values[k - 1]),
                cum_value=cum_value,
                hindsight=hindsight[k],
                regret=float(regret),
                missing=missing,
                skipped=skipped,
                phase=phase,
            )
        )

    record = RegretRecord(
        config=config,
        seed=seed,
        learner=spec.label,
        rows=rows,
        total_delay=schedule.total,
        max_delay=schedule.max_delay,
        suffered_total=suffered_total,
        learner_state={k: v for k, v in learner.state_dict().items() if not isinstance(v, (list, dict))},
    )
    logger.info(f"run '{config.name}' seed={seed}: final regret {record.final_regret:.4f}")
    return record
