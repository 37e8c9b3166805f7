import numpy as np

from delays.buffer import FeedbackBuffer, FeedbackPacket
from mdp.dynamics import rollout


def make_packet(k, trajectory, cost, mode, policy, delay):
    payload = cost if mode == "full_info" else trajectory.suffered_costs
    return FeedbackPacket(k, trajectory, payload, mode, policy, delay)


def drive(learner, mdp, costs, schedule, mode, seed):
    """The interaction loop; returns the base policy of every episode."""
    rng = np.random.default_rng(seed)
    H, S, A = mdp.shape
    buffer = FeedbackBuffer(schedule, S, A, H)
    policies = []
    for k in range(1, costs.num_episodes + 1):
        learner.begin_episode(k)
        base = learner.policy
        policies.append(base.probs.copy())
        trajectory = rollout(mdp, learner.act, costs.tables[k - 1], rng)
        packet = make_packet(k, trajectory, costs.tables[k - 1], mode, base, schedule.delay(k))
        learner.end_episode(k, trajectory)
        buffer.record_visit(packet)
        learner.on_feedback(k, buffer.deliver(k))
    return policies
