"""Run-time metrics over completed jobs."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .workload import JobDag


@dataclass
class JobRuntimeRecord:
    job_id: int
    dag: JobDag
    inject_clk: int
    completion_clk: int
    durations: dict[int, float]
    pes: dict[int, int] = field(default_factory=dict)
    starts: dict[int, int] = field(default_factory=dict)
    completions: dict[int, int] = field(default_factory=dict)

    @property
    def makespan(self) -> int:
        return self.completion_clk - self.inject_clk


def average_latency(records: Sequence[JobRuntimeRecord]) -> float | None:
    """Mean over jobs of the summed task execution times; None when nothing completed."""
    if not records:
        return None
    return sum(sum(r.durations.values()) for r in records) / len(records)


def critical_path_lower_bound(dag: JobDag, mu: float = 1.0) -> float:
    """Heaviest HEAD-to-TAIL path with each node at its cheapest PE and free edges."""
    best: dict[int, float] = {}
    for n in dag.topo_order:
        w = mu * min(dag.task[n].comp_cost.values())
        best[n] = w + max((best[p] for p in dag.preds[n]), default=0.0)
    return max(best.values(), default=0.0)


def sequential_time(dag: JobDag, platform) -> tuple[float, bool]:
    """Best single-PE sequential time and whether a fallback was needed.

    When no PE supports every task, each task takes its cheapest supporting PE
    and the flag is set.
    """
    totals = []
    for pe in platform.pe_ids:
        if all(pe in t.comp_cost for t in dag.nodes):
            totals.append(sum(t.comp_cost[pe] for t in dag.nodes))
    if totals:
        return platform.mu * min(totals), False
    return platform.mu * sum(min(t.comp_cost.values()) for t in dag.nodes), True


def slr(record: JobRuntimeRecord, platform) -> float:
    bound = critical_path_lower_bound(record.dag, platform.mu)
    if bound <= 0:
        return math.inf if record.makespan > 0 else 1.0
    return record.makespan / bound


def speedup(record: JobRuntimeRecord, platform) -> float:
    seq, _ = sequential_time(record.dag, platform)
    if record.makespan <= 0:
        return math.inf
    return seq / record.makespan


def avg_slr(records: Sequence[JobRuntimeRecord], platform) -> float | None:
    if not records:
        return None
    return sum(slr(r, platform) for r in records) / len(records)


def avg_speedup(records: Sequence[JobRuntimeRecord], platform) -> float | None:
    if not records:
        return None
    return sum(speedup(r, platform) for r in records) / len(records)


def explained_variance(returns: Iterable[float], predicted: Iterable[float]) -> float | None:
    """1 - Var[G - G_hat] / Var[G]; None when the returns have no variance."""
    g = np.asarray(list(returns) if not isinstance(returns, np.ndarray) else returns, float)
    p = np.asarray(list(predicted) if not isinstance(predicted, np.ndarray) else predicted, float)
    if g.shape != p.shape:
        raise ValueError("returns and predictions differ in length")
    if g.size < 2:
        return None
    var = g.var()
    if var == 0:
        return None
    return float(1.0 - (g - p).var() / var)


def summarize(records: Sequence[JobRuntimeRecord], platform) -> dict[str, float | None]:
    return {
        "avg_latency": average_latency(records),
        "avg_slr": avg_slr(records, platform),
        "avg_speedup": avg_speedup(records, platform),
        "completed_jobs": len(records),
    }


__all__ = [
    "JobRuntimeRecord", "average_latency", "slr", "speedup", "avg_slr", "avg_speedup",
    "explained_variance", "critical_path_lower_bound", "sequential_time", "summarize",
]
