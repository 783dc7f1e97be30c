"""Rule-based schedulers: Random, STF, MET and run-time HEFT.

Every scheduler is a scikit-learn style estimator: constructor arguments are
its hyper-parameters (so ``get_params``/``set_params``/``clone`` work),
``fit`` is where anything learnable would be learned, and ``schedule`` maps
the current ready tasks to PEs.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .engine import Assignment, SchedulerView, TaskInstance
from .errors import SchedulingError
from .platform import Platform
from .workload import JobDag


class Scheduler(BaseEstimator):
    name = "base"

    def fit(self, env=None, y=None):
        return self

    def reset(self, platform: Platform, rng: np.random.Generator) -> None:
        self.rng_ = rng

    def schedule(self, view: SchedulerView) -> list[Assignment]:
        raise NotImplementedError

    def predict(self, view: SchedulerView) -> dict[tuple[int, int], int]:
        """Task key -> PE for the given snapshot, without side effects on the view."""
        return {a.task.key: a.pe for a in self.schedule(view)}


def _supporting(task: TaskInstance, view: SchedulerView) -> list[int]:
    pes = [pe for pe in view.platform.pe_ids if pe in task.template.comp_cost]
    if not pes:
        raise SchedulingError(f"task {task.task_id} of job {task.job.job_id} has no supporting PE")
    return pes


class RandomScheduler(Scheduler):
    name = "random"

    def __init__(self, seed: int | None = None):
        self.seed = seed

    def reset(self, platform, rng):
        self.rng_ = np.random.default_rng(self.seed) if self.seed is not None else rng

    def schedule(self, view):
        if not hasattr(self, "rng_"):
            self.rng_ = np.random.default_rng(self.seed)
        out = []
        for t in view.ready:
            pes = _supporting(t, view)
            out.append(Assignment(t, pes[int(self.rng_.integers(len(pes)))]))
        return out


def _fastest(task, view) -> tuple[float, int, dict[int, float]]:
    times = {pe: view.exec_time(task, pe) for pe in _supporting(task, view)}
    best = min(times, key=lambda pe: (times[pe], pe))
    return times[best], best, times


class STFScheduler(Scheduler):
    """Shortest time first: ready tasks by ascending best execution time, each on its fastest PE."""

    name = "stf"

    def _ordered(self, view):
        scored = []
        for t in view.ready:
            best_time, best_pe, times = _fastest(t, view)
            scored.append((best_time, t.job.job_id, t.task_id, t, best_pe, times))
        scored.sort(key=lambda s: s[:3])
        return scored

    def schedule(self, view):
        return [Assignment(s[3], s[4]) for s in self._ordered(view)]


class METScheduler(STFScheduler):
    """STF ordering, but a task whose fastest PE is busy moves to the fastest idle PE.

    A PE counts as busy while it runs a task or holds queued work, including
    work queued earlier in the same call.
    """

    name = "met"

    def schedule(self, view):
        claimed: set[int] = set()
        out = []
        for _, _, _, t, pe, times in self._ordered(view):
            if view.is_busy(pe) or pe in claimed:
                idle = [p for p in times if not view.is_busy(p) and p not in claimed]
                if idle:
                    pe = min(idle, key=lambda p: (times[p], p))
            claimed.add(pe)
            out.append(Assignment(t, pe))
        return out


def rank_u(dag: JobDag, platform: Platform) -> dict[int, float]:
    """Upward rank: mean scaled cost plus the heaviest path (with mean transfer cost) to TAIL."""
    bw = platform.mean_bandwidth
    ranks: dict[int, float] = {}
    for n in reversed(dag.topo_order):
        costs = dag.task[n].comp_cost
        w_bar = platform.mu * sum(costs.values()) / len(costs)
        tail = 0.0
        for s in dag.succs[n]:
            c_bar = dag.weight[(n, s)] / bw if bw > 0 else 0.0
            tail = max(tail, c_bar + ranks[s])
        ranks[n] = w_bar + tail
    return ranks


def insertion_slot(duration: float, earliest: float,
                   timeline: list[tuple[float, float]]) -> float:
    """Earliest start >= `earliest` where [start, start + duration) avoids every busy interval."""
    start = earliest
    for b0, b1 in timeline:
        if b1 <= start:
            continue
        if start + duration <= b0:
            return start
        start = max(start, b1)
    return start


def eft(task: TaskInstance, pe: int, view: SchedulerView,
        timeline: list[tuple[float, float]] | None = None,
        insertion: bool = True) -> tuple[float, float]:
    """(start, finish) of `task` on `pe` given data arrival from its parents."""
    if pe not in task.template.comp_cost:
        raise SchedulingError(f"PE {pe} does not support task {task.task_id}")
    if timeline is None:
        timeline = view.timeline(pe)
    platform = view.platform
    ready_at = float(view.clk)
    for ppe, aft, w in view.parent_finish(task):
        ready_at = max(ready_at, aft + platform.transfer_delay(w, ppe, pe))
    comp = platform.mu * task.template.comp_cost[pe]
    if insertion:
        start = insertion_slot(comp, ready_at, timeline)
    else:
        avail = max(float(view.clk), timeline[-1][1]) if timeline else float(view.clk)
        start = max(avail, ready_at)
    return start, start + comp


class HEFTRTScheduler(Scheduler):
    """Run-time HEFT over the current ready set: upward-rank order, min-EFT placement."""

    name = "heft_rt"

    def __init__(self, insertion: bool = True):
        self.insertion = insertion

    def reset(self, platform, rng):
        super().reset(platform, rng)
        self.ranks_: dict[int, dict[int, float]] = {}

    def ranks_for(self, dag: JobDag, platform: Platform) -> dict[int, float]:
        if not hasattr(self, "ranks_"):
            self.ranks_ = {}
        key = id(dag)
        if key not in self.ranks_:
            self.ranks_[key] = rank_u(dag, platform)
        return self.ranks_[key]

    def schedule(self, view):
        order = sorted(
            view.ready,
            key=lambda t: (-self.ranks_for(t.job.dag, view.platform)[t.task_id],
                           t.job.job_id, t.task_id))
        timelines = {pe: view.timeline(pe) for pe in view.platform.pe_ids}
        out = []
        for t in order:
            best = None
            for pe in _supporting(t, view):
                start, finish = eft(t, pe, view, timelines[pe], self.insertion)
                if best is None or finish < best[2]:
                    best = (pe, start, finish)
            pe, start, finish = best
            tl = timelines[pe]
            tl.append((start, finish))
            tl.sort()
            out.append(Assignment(t, pe, start, finish))
        return out


SCHEDULERS = {
    "random": RandomScheduler,
    "stf": STFScheduler,
    "met": METScheduler,
    "heft_rt": HEFTRTScheduler,
    "heft_rt_noinsert": lambda: HEFTRTScheduler(insertion=False),
}


def make_scheduler(name: str) -> Scheduler:
    try:
        return SCHEDULERS[name]()
    except KeyError:
        known = ", ".join(sorted(SCHEDULERS) + ["neural"])
        raise ValueError(f"unknown scheduler {name!r} (known: {known})") from None
