from __future__ import annotations

import asyncio
import logging
import math
from collections import OrderedDict

import numpy as np

from config.settings import LAB_WORKERS
from framework.fanout import map_blocking
from harness.runner import run_experiment
from harness.schemas import ExperimentConfig, SweepCell, SweepConfig, SweepRow

logger = logging.getLogger(__name__)


def expand_grid(sweep: SweepConfig) -> list[tuple[ExperimentConfig, int]]:
    """One (config, seed) task per grid cell, in grid order."""
    if not sweep.grid():
        raise ValueError("sweep grid is empty")
    tasks = []
    for num_episodes, delays, learner, seed in sweep.grid():
        config = sweep.base.model_copy(
            update={"num_episodes": num_episodes, "delays": delays, "learner": learner, "seeds": [seed]}
        )
        tasks.append((config, seed))
    return tasks


def run_cell(task: tuple[ExperimentConfig, int]) -> SweepCell:
    """Run one cell; any failure becomes an error row so the sweep continues."""
    config, seed = task
    cell = SweepCell(
        label=f"{config.learner.label}|K={config.num_episodes}|{config.delays.label}|seed={seed}",
        num_episodes=config.num_episodes,
        delay=config.delays.label,
        learner=config.learner.label,
        seed=seed,
    )
    try:
        record = run_experiment(config, seed)
    except Exception as exc:
        logger.error(f"sweep cell {cell.label} failed: {exc}")
        return cell.model_copy(update={"is_error": True, "error_detail": f"{type(exc).__name__}: {exc}"})
    logger.info(f"sweep cell {cell.label}: final regret {record.final_regret:.4f}")
    return cell.model_copy(update={"final_regret": record.final_regret, "total_delay": record.total_delay})


def aggregate(cells: list[SweepCell]) -> list[SweepRow]:
    """Mean and standard error of the final regret per (K, delay, learner), in first-seen order."""
    groups: OrderedDict[tuple[int, str, str], list[SweepCell]] = OrderedDict()
    for cell in cells:
        groups.setdefault((cell.num_episodes, cell.delay, cell.learner), []).append(cell)

    rows = []
    for (num_episodes, delay, learner), members in groups.items():
        ok = np.array([c.final_regret for c in members if not c.is_error], dtype=float)
        mean = stderr = None
        if ok.size:
            mean = float(ok.mean())
            stderr = float(ok.std(ddof=1) / math.sqrt(ok.size)) if ok.size > 1 else 0.0
        rows.append(
            SweepRow(
                num_episodes=num_episodes,
                delay=delay,
                learner=learner,
                n_seeds=int(ok.size),
                n_errors=len(members) - int(ok.size),
                mean_final_regret=mean,
                stderr_final_regret=stderr,
            )
        )
    return rows


async def run_sweep_async(sweep: SweepConfig, workers: int | None = None) -> tuple[list[SweepCell], list[SweepRow]]:
    workers = workers or sweep.workers or LAB_WORKERS
    tasks = expand_grid(sweep)
    logger.info(f"sweep: {len(tasks)} cells on {workers} worker(s)")
    cells = await map_blocking(tasks, run_cell, workers)
    return cells, aggregate(cells)


def sweep(sweep_config: SweepConfig, workers: int | None = None) -> tuple[list[SweepCell], list[SweepRow]]:
    return asyncio.run(run_sweep_async(sweep_config, workers))
