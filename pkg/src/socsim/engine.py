"""Unit-tick discrete-event kernel for streaming DAG jobs onto PEs.

Per tick the kernel (1) retires tasks whose completion tick has arrived,
promoting their children to the ready queue and closing finished jobs,
(2) emits that tick's reward, (3) injects jobs while the job queue is below
capacity, (4) hands the unassigned ready tasks to the scheduler, and
(5) starts the next queued task on every idle PE. Tasks run to completion;
a task that starts at ``clk`` with duration ``d`` completes at the first
tick ``>= clk + d``.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import SchedulingError
from .metrics import JobRuntimeRecord
from .platform import Platform
from .workload import JobDag

log = logging.getLogger(__name__)

OUTSTANDING = "outstanding"
READY = "ready"
RUNNING = "running"
COMPLETED = "completed"

REWARD_KINDS = ("dense", "dense2", "sparse", "sparse2")

_EPS = 1e-9


@dataclass
class SimConfig:
    scale: float = 25.0
    sim_length: int = 10_000
    capacity: int = 3
    num_workloads: int = 200
    quasi_steady: bool = True
    seed: int = 0
    reward_kind: str = "dense"
    c1: float = 50.0
    c2: float = -0.5
    sparse_window: int = 100

    def __post_init__(self):
        if self.sim_length <= 0:
            raise ValueError("sim_length must be positive")
        if self.capacity <= 0 or self.num_workloads <= 0:
            raise ValueError("capacity and num_workloads must be positive")
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        if self.quasi_steady and self.num_workloads < self.capacity:
            raise ValueError("quasi-steady start needs num_workloads >= capacity")
        if self.reward_kind not in REWARD_KINDS:
            raise ValueError(f"unknown reward kind {self.reward_kind!r}")
        if self.sparse_window <= 0:
            raise ValueError("sparse_window must be positive")

    @classmethod
    def from_text(cls, text: str) -> "SimConfig":
        """Parse ``key = value`` lines; unknown keys are an error."""
        kwargs: dict[str, object] = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in cls.__dataclass_fields__:
                raise ValueError(f"line {lineno}: unknown key {key!r}")
            ftype = cls.__dataclass_fields__[key].type
            kwargs[key] = _coerce(value, ftype)
        return cls(**kwargs)

    def to_text(self) -> str:
        return "".join(f"{k} = {getattr(self, k)}\n" for k in self.__dataclass_fields__)


def _coerce(value: str, ftype: str):
    if ftype == "bool":
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if ftype == "int":
        return int(value)
    if ftype == "float":
        return float(value)
    return value


def reward(clk: int, newly_completed: int, kind: str = "dense", c1: float = 50.0,
           c2: float = -0.5, m: int = 100, clk_max: int = 10_000) -> float:
    if kind == "dense":
        return c1 * newly_completed + c2 * clk
    if kind == "dense2":
        return c1 * newly_completed
    if kind == "sparse":
        return c1 * newly_completed if clk >= clk_max - m else 0.0
    if kind == "sparse2":
        return c1 * newly_completed if clk == clk_max else 0.0
    raise ValueError(f"unknown reward kind {kind!r}")


class TaskInstance:
    __slots__ = ("job", "task_id", "template", "status", "pe", "planned", "seq",
                 "ready_clk", "start_clk", "completion_clk", "decision_clk",
                 "duration", "remaining")

    def __init__(self, job: "JobInstance", template):
        self.job = job
        self.task_id = template.task_id
        self.template = template
        self.status = OUTSTANDING
        self.pe: int | None = None
        self.planned: tuple[float, float] | None = None
        self.seq = -1
        self.ready_clk: int | None = None
        self.start_clk: int | None = None
        self.completion_clk: int | None = None
        self.decision_clk: int | None = None
        self.duration = 0.0
        self.remaining = 0

    @property
    def key(self) -> tuple[int, int]:
        return (self.job.job_id, self.task_id)

    def __repr__(self):
        return f"TaskInstance(job={self.job.job_id}, task={self.task_id}, {self.status})"


class JobInstance:
    __slots__ = ("job_id", "dag", "inject_clk", "tasks", "remaining", "completion_clk")

    def __init__(self, job_id: int, dag: JobDag, inject_clk: int):
        self.job_id = job_id
        self.dag = dag
        self.inject_clk = inject_clk
        self.tasks = {t.task_id: TaskInstance(self, t) for t in dag.nodes}
        for tid, t in self.tasks.items():
            t.remaining = len(dag.preds[tid])
        self.remaining = len(self.tasks)
        self.completion_clk: int | None = None


class PEState:
    __slots__ = ("pe_id", "running", "queue", "count", "active", "blocking")

    def __init__(self, pe_id: int):
        self.pe_id = pe_id
        self.running: TaskInstance | None = None
        self.queue: list[TaskInstance] = []
        self.count = 0
        self.active = 0
        self.blocking = 0

    @property
    def busy(self) -> bool:
        return self.running is not None or bool(self.queue)


class Assignment(NamedTuple):
    task: TaskInstance
    pe: int
    planned_start: float | None = None
    planned_finish: float | None = None


class PEUsage(NamedTuple):
    count: int
    active_time: int
    blocking_time: int


@dataclass
class LoggedAction:
    job_id: int
    task_id: int
    pe: int
    start_clk: int
    omega: int | None = None
    truncated: bool = False


@dataclass
class Interaction:
    clk: int
    actions: list[LoggedAction]


class SchedulerView:
    """Read-only window onto the simulator handed to a scheduler each tick."""

    def __init__(self, clk: int, ready: list[TaskInstance], jobs: list[JobInstance],
                 pes: dict[int, PEState], platform: Platform, capacity: int):
        self.clk = clk
        self.ready = ready
        self.jobs = jobs
        self.pes = pes
        self.platform = platform
        self.capacity = capacity

    def is_busy(self, pe: int) -> bool:
        return self.pes[pe].busy

    def parent_info(self, task: TaskInstance) -> dict[int, tuple[int, float]]:
        dag = task.job.dag
        tasks = task.job.tasks
        w = dag.weight
        return {p: (tasks[p].pe, w[(p, task.task_id)]) for p in dag.preds[task.task_id]}

    def parent_finish(self, task: TaskInstance) -> list[tuple[int, int, float]]:
        """(parent PE, actual finish tick, edge weight) per parent."""
        dag = task.job.dag
        tasks = task.job.tasks
        w = dag.weight
        return [(tasks[p].pe, tasks[p].completion_clk, w[(p, task.task_id)])
                for p in dag.preds[task.task_id]]

    def exec_time(self, task: TaskInstance, pe: int) -> float:
        return self.platform.exec_time(task.template.comp_cost, pe, self.parent_info(task))

    def timeline(self, pe: int) -> list[tuple[float, float]]:
        """Committed busy intervals on `pe` from now on, sorted and disjoint."""
        state = self.pes[pe]
        out: list[tuple[float, float]] = []
        end = float(self.clk)
        if state.running is not None:
            end = max(end, float(state.running.completion_clk))
            out.append((float(state.running.start_clk), end))
        for t in sorted(state.queue, key=_queue_key):
            ps, pf = t.planned
            start = max(ps, end, float(self.clk))
            end = start + (pf - ps)
            out.append((start, end))
        return out

    def avail(self, pe: int) -> float:
        tl = self.timeline(pe)
        return max(float(self.clk), tl[-1][1]) if tl else float(self.clk)


def _queue_key(t: TaskInstance):
    return (t.planned[0], t.seq)


@dataclass
class EpisodeResult:
    config: SimConfig
    completed_jobs: list[JobRuntimeRecord]
    reward_stream: np.ndarray
    interactions: list[Interaction]
    pe_stats: dict[int, PEUsage]
    jobs: list[JobInstance]
    trace: list[tuple[int, str, int, int, int]] = field(default_factory=list)

    @property
    def total_reward(self) -> float:
        return float(self.reward_stream.sum())

    def status_counts(self) -> dict[str, int]:
        counts = {OUTSTANDING: 0, READY: 0, RUNNING: 0, COMPLETED: 0}
        for job in self.jobs:
            for t in job.tasks.values():
                counts[t.status] += 1
        return counts

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["clk", "kind", "job", "task", "pe"])
        w.writerows(self.trace)
        return buf.getvalue()


class Simulator:
    """One episode's mutable state. Use :func:`run_episode` unless stepping by hand."""

    def __init__(self, workloads: Sequence[JobDag], platform: Platform, scheduler,
                 config: SimConfig, record_trace: bool = False):
        self.workloads = list(workloads)
        self.platform = platform
        self.scheduler = scheduler
        self.config = config
        self.record_trace = record_trace
        ss = np.random.SeedSequence(config.seed)
        inj_ss, pick_ss, sched_ss = ss.spawn(3)
        self.inj_rng = np.random.default_rng(inj_ss)
        self.pick_rng = np.random.default_rng(pick_ss)
        self.sched_rng = np.random.default_rng(sched_ss)
        self.pes = {pe: PEState(pe) for pe in platform.pe_ids}
        self._pe_list = [self.pes[pe] for pe in platform.pe_ids]
        self.jobs: list[JobInstance] = []
        self.active: list[JobInstance] = []
        self.ready: list[TaskInstance] = []
        self.completed: list[JobRuntimeRecord] = []
        self.interactions: list[Interaction] = []
        self.trace: list[tuple[int, str, int, int, int]] = []
        self.rewards = np.zeros(config.sim_length, dtype=float)
        self.next_injection = 0
        self._seq = 0

    def _event(self, clk, kind, job=-1, task=-1, pe=-1):
        if self.record_trace:
            self.trace.append((clk, kind, job, task, pe))

    def inter_arrival(self) -> int:
        return max(1, math.ceil(self.inj_rng.exponential(self.config.scale)))

    def _inject(self, clk: int) -> None:
        if not self.workloads:
            return
        dag = self.workloads[int(self.pick_rng.integers(len(self.workloads)))]
        job = JobInstance(len(self.jobs), dag, clk)
        self.jobs.append(job)
        self.active.append(job)
        self._event(clk, "inject", job.job_id)
        for tid in dag.topo_order:
            t = job.tasks[tid]
            if t.remaining == 0:
                self._make_ready(t, clk)

    def _make_ready(self, t: TaskInstance, clk: int) -> None:
        t.status = READY
        t.ready_clk = clk
        self.ready.append(t)
        self._event(clk, "ready", t.job.job_id, t.task_id)

    def _complete(self, pe: PEState, clk: int) -> int:
        t = pe.running
        pe.running = None
        t.status = COMPLETED
        t.completion_clk = clk
        job = t.job
        self._event(clk, "complete", job.job_id, t.task_id, pe.pe_id)
        for c in job.dag.succs[t.task_id]:
            child = job.tasks[c]
            child.remaining -= 1
            if child.remaining == 0:
                self._make_ready(child, clk)
        job.remaining -= 1
        if job.remaining:
            return 0
        job.completion_clk = clk
        self.active.remove(job)
        tasks = job.tasks.values()
        self.completed.append(JobRuntimeRecord(
            job.job_id, job.dag, job.inject_clk, clk,
            {x.task_id: x.duration for x in tasks},
            {x.task_id: x.pe for x in tasks},
            {x.task_id: x.start_clk for x in tasks},
            {x.task_id: x.completion_clk for x in tasks},
        ))
        self._event(clk, "job_done", job.job_id)
        return 1

    def _schedule(self, clk: int) -> None:
        ready = sorted(self.ready, key=lambda t: (t.job.job_id, t.task_id))
        view = SchedulerView(clk, ready, self.active, self.pes, self.platform,
                             self.config.capacity)
        assignments = self.scheduler.schedule(view)
        if not assignments:
            return
        ready_ids = {id(t) for t in ready}
        done: set[int] = set()
        logged = []
        for a in assignments:
            t = a.task
            if id(t) not in ready_ids:
                raise SchedulingError(f"{t!r} is not in the ready set at clk {clk}")
            if id(t) in done:
                raise SchedulingError(f"{t!r} assigned twice at clk {clk}")
            if a.pe not in self.pes:
                raise SchedulingError(f"unknown PE {a.pe}")
            if a.pe not in t.template.comp_cost:
                raise SchedulingError(
                    f"PE {a.pe} does not support task {t.task_id} of job {t.job.job_id}")
            done.add(id(t))
            t.pe = a.pe
            t.decision_clk = clk
            t.seq = self._seq
            self._seq += 1
            if a.planned_start is not None:
                finish = a.planned_finish
                if finish is None:
                    finish = a.planned_start + self.platform.mu * t.template.comp_cost[a.pe]
                t.planned = (float(a.planned_start), float(finish))
            else:
                start = self._avail(a.pe, clk)
                dur = self.platform.exec_time(t.template.comp_cost, a.pe, _parents(t))
                t.planned = (start, start + dur)
            self.pes[a.pe].queue.append(t)
            logged.append(LoggedAction(t.job.job_id, t.task_id, a.pe, clk))
            self._event(clk, "assign", t.job.job_id, t.task_id, a.pe)
        self.ready = [t for t in self.ready if id(t) not in done]
        self.interactions.append(Interaction(clk, logged))

    def _avail(self, pe: int, clk: int) -> float:
        state = self.pes[pe]
        end = float(clk)
        if state.running is not None:
            end = max(end, float(state.running.completion_clk))
        for t in state.queue:
            end = max(end, t.planned[1])
        return end

    def _execute(self, clk: int) -> None:
        for pe in self._pe_list:
            if pe.running is None and pe.queue:
                nxt = min(pe.queue, key=_queue_key)
                pe.queue.remove(nxt)
                dur = self.platform.exec_time(nxt.template.comp_cost, pe.pe_id, _parents(nxt))
                nxt.duration = dur
                nxt.status = RUNNING
                nxt.start_clk = clk
                nxt.completion_clk = max(clk + 1, math.ceil(clk + dur - _EPS))
                pe.running = nxt
                pe.count += 1
                self._event(clk, "start", nxt.job.job_id, nxt.task_id, pe.pe_id)
            if pe.running is not None:
                pe.active += 1
                if pe.queue:
                    pe.blocking += 1

    def run(self) -> EpisodeResult:
        cfg = self.config
        if hasattr(self.scheduler, "reset"):
            self.scheduler.reset(self.platform, self.sched_rng)
        for clk in range(cfg.sim_length + 1):
            finished = 0
            for pe in self._pe_list:
                t = pe.running
                if t is not None and t.completion_clk == clk:
                    finished += self._complete(pe, clk)
            if clk >= 1:
                self.rewards[clk - 1] = reward(clk, finished, cfg.reward_kind, cfg.c1, cfg.c2,
                                               cfg.sparse_window, cfg.sim_length)
            if clk == cfg.sim_length:
                break
            if cfg.quasi_steady:
                while len(self.active) < cfg.capacity and self.workloads:
                    self._inject(clk)
            elif clk >= self.next_injection and len(self.active) < cfg.capacity:
                self._inject(clk)
                self.next_injection = clk + self.inter_arrival()
            if self.ready:
                self._schedule(clk)
            self._execute(clk)

        for inter in self.interactions:
            for a in inter.actions:
                t = self.jobs[a.job_id].tasks[a.task_id]
                if t.status == COMPLETED:
                    a.omega = t.completion_clk
                else:
                    a.truncated = True
        stats = {pe.pe_id: PEUsage(pe.count, pe.active, pe.blocking) for pe in self._pe_list}
        result = EpisodeResult(cfg, self.completed, self.rewards, self.interactions, stats,
                               self.jobs, self.trace)
        if hasattr(self.scheduler, "end_episode"):
            self.scheduler.end_episode(result)
        return result


def _parents(t: TaskInstance) -> dict[int, tuple[int, float]]:
    dag = t.job.dag
    tasks = t.job.tasks
    w = dag.weight
    return {p: (tasks[p].pe, w[(p, t.task_id)]) for p in dag.preds[t.task_id]}


def run_episode(workloads: Sequence[JobDag], platform: Platform, scheduler,
                config: SimConfig, record_trace: bool = False) -> EpisodeResult:
    return Simulator(workloads, platform, scheduler, config, record_trace).run()


def pe_usage_stats(result: EpisodeResult) -> dict[int, PEUsage]:
    return dict(result.pe_stats)


def inter_arrival_samples(scale: float, n: int, seed: int = 0) -> np.ndarray:
    """Clock-aligned inter-arrival gaps as drawn by the injector."""
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(3)[0])
    return np.maximum(1, np.ceil(rng.exponential(scale, size=n))).astype(int)

