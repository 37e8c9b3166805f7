"""KL projection onto the occupancy measures of a known MDP."""

from __future__ import annotations

import logging

import numpy as np
from scipy.optimize import minimize
from scipy.special import kl_div, logsumexp, softmax

from config.settings import PROJECTION_TOL
from mdp.dynamics import occupancy_measure
from mdp.errors import ProjectionError
from mdp.model import FLOW_TOL, ROW_TOL, OccupancyMeasure, Policy, TabularMdp

logger = logging.getLogger(__name__)


class OccupancyPolytope:
    """Delta(M): initial-state, layer-sum, flow and p^q = p constraints of one MDP."""

    def __init__(self, mdp: TabularMdp) -> None:
        self.mdp = mdp
        uniform = Policy.uniform(*mdp.shape)
        self.reachable = occupancy_measure(mdp, uniform).state() > 0.0

    def residuals(self, q: OccupancyMeasure) -> dict[str, float]:
        return q.residuals(self.mdp)

    def contains(self, q: OccupancyMeasure, tol: float = FLOW_TOL) -> bool:
        return q.is_feasible(self.mdp, tol)


def bregman_divergence(q: np.ndarray | OccupancyMeasure, q_ref: np.ndarray | OccupancyMeasure) -> float:
    """Unnormalized KL, the Bregman divergence of the unnormalized negative entropy."""
    a = q.q if isinstance(q, OccupancyMeasure) else np.asarray(q, dtype=float)
    b = q_ref.q if isinstance(q_ref, OccupancyMeasure) else np.asarray(q_ref, dtype=float)
    return float(np.sum(kl_div(a, b)))


def unconstrained_update(q: np.ndarray | OccupancyMeasure, batch_cost: np.ndarray, eta: float) -> np.ndarray:
    """q * exp(-eta c); an (H, S, A) cost is broadcast over the next state."""
    table = q.q if isinstance(q, OccupancyMeasure) else np.asarray(q, dtype=float)
    cost = np.asarray(batch_cost, dtype=float)
    if cost.ndim == 3:
        cost = cost[..., None]
    return table * np.exp(-eta * cost)


def policy_from_occupancy(q: OccupancyMeasure) -> Policy:
    """pi_h(a | s) ∝ sum_s' q_h(s, a, s'); uniform where the state has no mass."""
    mass = q.state_action()
    state = mass.sum(axis=-1, keepdims=True)
    A = mass.shape[-1]
    reached = state > ROW_TOL
    probs = np.where(reached, mass / np.where(reached, state, 1.0), 1.0 / A)
    return Policy(probs)


class _FlowDual:
    """sum_h log Z_h(v) over the per-state potentials v of layers 2..H.

    Layer h has Z_h = sum_{s,a} w_h(s, a) exp(<p_h(.|s, a), v_{h+1}> - v_h(s)),
    with v_1 = v_{H+1} = 0. The gradient is inflow minus outflow per state,
    so a stationary point is a flow-conserving occupancy.
    """

    def __init__(self, mdp: TabularMdp, reachable: np.ndarray, log_w: np.ndarray) -> None:
        H, S, A = mdp.shape
        self.H = H
        # one gauge per layer: the first reachable state keeps v = 0
        self.index = -np.ones((H + 1, S), dtype=int)
        n = 0
        for h in range(1, H):
            states = np.flatnonzero(reachable[h])
            for s in states[1:]:
                self.index[h, s] = n
                n += 1
        self.num_vars = n

        self.pairs: list[tuple[np.ndarray, np.ndarray]] = []
        self.log_w: list[np.ndarray] = []
        self.B: list[np.ndarray] = []
        for h in range(H):
            active = reachable[h][:, None] & np.isfinite(log_w[h])
            s_idx, a_idx = np.nonzero(active)
            B = np.zeros((len(s_idx), n))
            for row, (s, a) in enumerate(zip(s_idx, a_idx)):
                col = self.index[h, s]
                if col >= 0:
                    B[row, col] -= 1.0
                if h + 1 < H:
                    cols = self.index[h + 1]
                    nxt = cols >= 0
                    B[row, cols[nxt]] += mdp.transitions[h, s, a, nxt]
            self.pairs.append((s_idx, a_idx))
            self.log_w.append(log_w[h][s_idx, a_idx])
            self.B.append(B)

    def layer_probs(self, x: np.ndarray) -> list[np.ndarray]:
        return [softmax(lw + B @ x) for lw, B in zip(self.log_w, self.B)]

    def value_and_grad(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        value = 0.0
        grad = np.zeros(self.num_vars)
        for lw, B in zip(self.log_w, self.B):
            logits = lw + B @ x
            value += float(logsumexp(logits))
            grad += B.T @ softmax(logits)
        return value, grad

    def hessian(self, x: np.ndarray) -> np.ndarray:
        hess = np.zeros((self.num_vars, self.num_vars))
        for lw, B in zip(self.log_w, self.B):
            sigma = softmax(lw + B @ x)
            weighted = B.T * sigma
            mean = B.T @ sigma
            hess += weighted @ B - np.outer(mean, mean)
        return hess


def kl_project_known_p(
    q_tilde: np.ndarray,
    mdp: TabularMdp,
    *,
    polytope: OccupancyPolytope | None = None,
    tol: float | None = None,
) -> OccupancyMeasure:
    """argmin over Delta(M) of D_R(q || q_tilde) for a known kernel.

    With p^q = p, q_h(s, a, s') = q_h(s, a) p_h(s' | s, a), so the problem
    reduces to a KL projection of the weights
    log w_h(s, a) = sum_s' p log(q_tilde / p) onto flow-conserving
    occupancies, solved through its convex dual. The result is rebuilt as
    the occupancy of the induced policy, which makes it exactly feasible.
    """
    tol = PROJECTION_TOL if tol is None else tol
    polytope = polytope or OccupancyPolytope(mdp)
    p = mdp.transitions
    q_tilde = np.asarray(q_tilde, dtype=float)
    if q_tilde.shape != p.shape:
        raise ProjectionError(f"q_tilde shape {q_tilde.shape} does not match the kernel {p.shape}")

    support = p > 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(support, np.log(np.where(support, q_tilde, 1.0)) - np.log(np.where(support, p, 1.0)), 0.0)
        ratio = np.where(support & (q_tilde <= 0.0), -np.inf, ratio)
    log_w = np.where(support, p * ratio, 0.0).sum(axis=-1)
    log_w = np.where(np.any(support & (q_tilde <= 0.0), axis=-1), -np.inf, log_w)

    dual = _FlowDual(mdp, polytope.reachable, log_w)
    x = np.zeros(dual.num_vars)
    if dual.num_vars:
        _, grad = dual.value_and_grad(x)
        if np.max(np.abs(grad)) > tol:
            result = minimize(
                dual.value_and_grad,
                x,
                jac=True,
                hess=dual.hessian,
                method="trust-exact",
                options={"gtol": tol * 1e-2, "maxiter": 500},
            )
            x = result.x
            _, grad = dual.value_and_grad(x)
            if np.max(np.abs(grad)) > tol:
                raise ProjectionError(
                    f"projection stopped with flow residual {np.max(np.abs(grad)):.3e} > {tol:.1e} ({result.message})"
                )

    H, S, A = mdp.shape
    mass = np.zeros((H, S, A))
    for h, probs in enumerate(dual.layer_probs(x)):
        s_idx, a_idx = dual.pairs[h]
        mass[h, s_idx, a_idx] = probs
    if not np.all(np.isfinite(mass)):
        raise ProjectionError("projection produced non-finite mass")
    policy = policy_from_occupancy(OccupancyMeasure(mass[..., None] * p))
    return occupancy_measure(mdp, policy)
