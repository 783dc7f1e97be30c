"""Flat observation vector built from a scheduler snapshot."""
from __future__ import annotations

import numpy as np

from ..engine import COMPLETED, OUTSTANDING, READY, RUNNING, SchedulerView, TaskInstance

TASK_FEATURES = 6
JOB_FEATURES = 2


def observation_size(capacity: int, v_max: int) -> int:
    return capacity * v_max * TASK_FEATURES + capacity * JOB_FEATURES + 1


def task_block(t: TaskInstance, clk: int, time_norm: float) -> list[float]:
    """[PE or -1, ready, running, outstanding, waiting time, remaining parents]."""
    status = t.status
    if status == READY:
        twt = clk - t.ready_clk
    elif status in (RUNNING, COMPLETED):
        twt = t.start_clk - t.ready_clk
    else:
        twt = 0
    return [
        float(t.pe) if t.pe is not None else -1.0,
        1.0 if status == READY else 0.0,
        1.0 if status == RUNNING else 0.0,
        1.0 if status == OUTSTANDING else 0.0,
        twt / time_norm,
        float(t.remaining),
    ]


def remaining_depth(job) -> int:
    """Levels left in the job: longest chain of not-yet-completed tasks."""
    dag = job.dag
    tasks = job.tasks
    depth: dict[int, int] = {}
    best = 0
    for n in dag.topo_order:
        if tasks[n].status == COMPLETED:
            continue
        d = 1 + max((depth.get(p, 0) for p in dag.preds[n]), default=0)
        depth[n] = d
        if d > best:
            best = d
    return best


def build_observation(view: SchedulerView, capacity: int, v_max: int,
                      time_norm: float = 100.0):
    """Observation vector plus the offset of each live task's feature block."""
    jobs = view.jobs
    if len(jobs) > capacity:
        raise ValueError(f"{len(jobs)} jobs in the system exceed observation capacity {capacity}")
    obs = np.zeros(observation_size(capacity, v_max))
    offsets: dict[tuple[int, int], int] = {}
    clk = view.clk
    waiting = 0
    job_base = capacity * v_max * TASK_FEATURES
    for j, job in enumerate(jobs):
        ids = sorted(job.tasks)
        if len(ids) > v_max:
            raise ValueError(f"job with {len(ids)} tasks exceeds v_max {v_max}")
        for i, tid in enumerate(ids):
            t = job.tasks[tid]
            off = (j * v_max + i) * TASK_FEATURES
            obs[off:off + TASK_FEATURES] = task_block(t, clk, time_norm)
            offsets[(job.job_id, tid)] = off
            if t.status in (OUTSTANDING, READY):
                waiting += 1
        obs[job_base + j * JOB_FEATURES] = remaining_depth(job)
        obs[job_base + j * JOB_FEATURES + 1] = (clk - job.inject_clk) / time_norm
    obs[-1] = waiting
    return obs, offsets


def support_mask(t: TaskInstance, pe_ids: list[int]) -> np.ndarray:
    return np.array([pe in t.template.comp_cost for pe in pe_ids], dtype=bool)
