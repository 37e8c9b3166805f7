"""Adversaries for the experiments: stochastic, switching, drifting or recorded cost sequences."""

from __future__ import annotations

from typing import Any

import numpy as np

from mdp.errors import ConfigError, LabError
from mdp.model import CostSequence
from mdp.schemas import load_cost_sequence


def _means(params: dict[str, Any], shape: tuple[int, int, int], rng: np.random.Generator) -> np.ndarray:
    """Per-(h, s, a) means: a scalar ``mean``, an explicit ``means`` table, or uniform draws."""
    if "means" in params:
        means = np.asarray(params["means"], dtype=float)
        if means.shape != shape:
            raise ConfigError(f"means must have shape {shape}, got {means.shape}")
    elif "mean" in params:
        means = np.full(shape, float(params["mean"]))
    else:
        lo, hi = float(params.get("mean_lo", 0.0)), float(params.get("mean_hi", 1.0))
        if not 0.0 <= lo <= hi <= 1.0:
            raise ConfigError("mean range must satisfy 0 <= mean_lo <= mean_hi <= 1")
        means = rng.uniform(lo, hi, size=shape)
    if np.any(means < 0.0) or np.any(means > 1.0):
        raise ConfigError("cost means must lie in [0, 1]")
    return means


def _iid_stochastic(params: dict[str, Any], shape, K: int, rng: np.random.Generator) -> np.ndarray:
    means = _means(params, shape, rng)
    distribution = params.get("distribution", "bernoulli")
    if distribution == "bernoulli":
        return (rng.random((K, *shape)) < means).astype(float)
    if distribution == "beta":
        concentration = float(params.get("concentration", 10.0))
        if concentration <= 0:
            raise ConfigError("beta concentration must be positive")
        # degenerate means are sampled exactly
        a = np.clip(means * concentration, 1e-12, None)
        b = np.clip((1.0 - means) * concentration, 1e-12, None)
        draws = rng.beta(a, b, size=(K, *shape))
        draws = np.where(means <= 0.0, 0.0, np.where(means >= 1.0, 1.0, draws))
        return np.clip(draws, 0.0, 1.0)
    raise ConfigError(f"unknown distribution: {distribution}")


def _piecewise_switching(params: dict[str, Any], shape, K: int, rng: np.random.Generator) -> np.ndarray:
    """One cheap action per (h, s); it moves to the next action every ``period`` episodes."""
    period = int(params.get("period", max(1, K // 4)))
    low, high = float(params.get("low", 0.0)), float(params.get("high", 1.0))
    if period < 1:
        raise ConfigError("switching period must be >= 1")
    if not 0.0 <= low <= high <= 1.0:
        raise ConfigError("switching costs must satisfy 0 <= low <= high <= 1")
    H, S, A = shape
    offsets = rng.integers(0, A, size=(H, S)) if params.get("random_offsets", True) else np.zeros((H, S), dtype=int)
    blocks = np.arange(K) // period
    cheap = (offsets[None, :, :] + blocks[:, None, None]) % A
    tables = np.full((K, H, S, A), high)
    np.put_along_axis(tables, cheap[..., None], low, axis=-1)
    return tables


def _sinusoidal_drift(params: dict[str, Any], shape, K: int, rng: np.random.Generator) -> np.ndarray:
    """Means 0.5 + amplitude sin(2 pi k / period + phase); sampled as Bernoulli when ``sample`` is set."""
    period = float(params.get("period", max(1, K // 2)))
    amplitude = float(params.get("amplitude", 0.5))
    if period <= 0:
        raise ConfigError("drift period must be positive")
    if not 0.0 <= amplitude <= 0.5:
        raise ConfigError("drift amplitude must lie in [0, 0.5]")
    phases = rng.uniform(0.0, 2.0 * np.pi, size=shape)
    ks = np.arange(1, K + 1)[:, None, None, None]
    means = np.clip(0.5 + amplitude * np.sin(2.0 * np.pi * ks / period + phases), 0.0, 1.0)
    if params.get("sample", False):
        return (rng.random(means.shape) < means).astype(float)
    return means


def _fixed_file(params: dict[str, Any], shape, K: int, rng: np.random.Generator) -> np.ndarray:
    if "path" not in params:
        raise ConfigError("fixed_file costs need a path")
    try:
        costs = load_cost_sequence(params["path"])
    except (OSError, ValueError, LabError) as exc:
        raise ConfigError(f"cannot load costs from {params['path']}: {exc}") from exc
    if costs.tables.shape[1:] != shape:
        raise ConfigError(f"cost file has dims {costs.tables.shape[1:]}, the MDP needs {shape}")
    if costs.num_episodes < K:
        raise ConfigError(f"cost file holds {costs.num_episodes} episodes, {K} requested")
    return costs.tables[:K]


_GENERATORS = {
    "iid_stochastic": _iid_stochastic,
    "piecewise_switching": _piecewise_switching,
    "sinusoidal_drift": _sinusoidal_drift,
    "fixed_file": _fixed_file,
}


def generate_costs(
    kind: str,
    params: dict[str, Any] | None,
    shape: tuple[int, int, int],
    num_episodes: int,
    rng: np.random.Generator,
) -> CostSequence:
    """Draw a K-episode cost sequence for an (H, S, A) MDP."""
    generator = _GENERATORS.get(kind)
    if generator is None:
        raise ConfigError(f"unknown cost kind: {kind}")
    if num_episodes < 1:
        raise ConfigError("num_episodes must be >= 1")
    return CostSequence(generator(params or {}, tuple(shape), int(num_episodes), rng))
