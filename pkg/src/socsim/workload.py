"""Job DAGs: data model, layered synthesis, structural metrics, and profile I/O."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from typing import Mapping, Sequence

import numpy as np

from .errors import ProfileError

Edge = tuple[int, int, float]


@dataclass(frozen=True)
class TaskTemplate:
    task_id: int
    name: str
    comp_cost: Mapping[int, float]

    def supports(self, pe: int) -> bool:
        return pe in self.comp_cost


@dataclass(frozen=True)
class JobDag:
    job_id: int
    nodes: tuple[TaskTemplate, ...]
    edges: tuple[Edge, ...]
    name: str = "job"
    meta: Mapping[str, object] = field(default_factory=dict, compare=False)

    @cached_property
    def task(self) -> dict[int, TaskTemplate]:
        return {t.task_id: t for t in self.nodes}

    @cached_property
    def preds(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {t.task_id: [] for t in self.nodes}
        for s, d, _ in self.edges:
            out.setdefault(d, []).append(s)
        return out

    @cached_property
    def succs(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {t.task_id: [] for t in self.nodes}
        for s, d, _ in self.edges:
            out.setdefault(s, []).append(d)
        return out

    @cached_property
    def weight(self) -> dict[tuple[int, int], float]:
        return {(s, d): w for s, d, w in self.edges}

    @property
    def head_id(self) -> int | None:
        heads = [n for n, p in self.preds.items() if not p]
        return heads[0] if len(heads) == 1 else None

    @property
    def tail_id(self) -> int | None:
        tails = [n for n, s in self.succs.items() if not s]
        return tails[0] if len(tails) == 1 else None

    @property
    def num_tasks(self) -> int:
        return len(self.nodes)

    @cached_property
    def topo_order(self) -> list[int]:
        order = _kahn(self)
        if order is None:
            raise ValueError(f"job {self.name!r} has a cycle")
        return order

    @cached_property
    def levels(self) -> int:
        """Number of nodes on the longest HEAD-to-TAIL path."""
        depth: dict[int, int] = {}
        for n in self.topo_order:
            depth[n] = 1 + max((depth[p] for p in self.preds[n]), default=0)
        return max(depth.values(), default=0)

    def with_job_id(self, job_id: int) -> "JobDag":
        return JobDag(job_id, self.nodes, self.edges, self.name, self.meta)


@dataclass(frozen=True)
class DagGenParams:
    v: int
    alpha: float
    nu: float = 0.0
    nu_std: float = 0.0
    seed: int = 0
    width_std: float = 0.0
    pred_std: float = 0.0

    def __post_init__(self):
        if self.v < 3:
            raise ValueError(f"v must be at least 3, got {self.v}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.nu < 0 or self.nu_std < 0 or self.width_std < 0 or self.pred_std < 0:
            raise ValueError("nu and standard deviations must be non-negative")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def synthesize_dag(params: DagGenParams, rng: np.random.Generator | None = None,
                   costs: Sequence[Mapping[int, float]] | None = None,
                   names: Sequence[str] | None = None, job_id: int = 0) -> JobDag:
    """Build a layered random DAG with exactly ``params.v`` nodes.

    Node ``i`` takes ``costs[i % len(costs)]`` as its per-PE cost table; by
    default the bundled synthetic profile supplies the costs.
    """
    if rng is None:
        rng = np.random.default_rng(params.seed)
    if costs is None:
        template = load_synthetic_job()
        costs = [t.comp_cost for t in template.nodes]
        names = names or [t.name for t in template.nodes]
    v, alpha = params.v, params.alpha

    target_depth = _round_half_up(math.sqrt(v) / alpha)
    depth = min(max(3, target_depth), v)
    n_mid = depth - 2
    mean_width = math.floor(math.sqrt(v) * alpha)
    widths = [max(1, _round_half_up(rng.normal(mean_width, params.width_std)))
              for _ in range(n_mid)]
    total = 2 + sum(widths)
    while total < v:
        widths[rng.integers(n_mid)] += 1
        total += 1
    while total > v:
        shrinkable = [i for i, w in enumerate(widths) if w > 1]
        widths[shrinkable[rng.integers(len(shrinkable))]] -= 1
        total -= 1

    level_nodes: list[list[int]] = [[0]]
    nxt = 1
    for w in widths:
        level_nodes.append(list(range(nxt, nxt + w)))
        nxt += w
    level_nodes.append([v - 1])

    pairs: set[tuple[int, int]] = set()
    for lvl in range(1, depth):
        prev = level_nodes[lvl - 1]
        for node in level_nodes[lvl]:
            k = _round_half_up(rng.normal(len(prev) / 3, params.pred_std))
            k = max(1, min(k, len(prev)))
            for p in rng.choice(len(prev), size=k, replace=False):
                pairs.add((prev[int(p)], node))
        # Nodes left without a successor would become extra sinks.
        has_child = {s for s, _ in pairs}
        for p in prev:
            if p not in has_child:
                cur = level_nodes[lvl]
                pairs.add((p, cur[int(rng.integers(len(cur)))]))

    edges = []
    for s, d in sorted(pairs):
        w = max(1, math.floor(abs(rng.normal(params.nu, params.nu_std))))
        edges.append((s, d, float(w)))

    nodes = tuple(
        TaskTemplate(i, names[i % len(names)] if names else f"t{i}", dict(costs[i % len(costs)]))
        for i in range(v)
    )
    meta = {"levels": depth, "target_levels": target_depth,
            "depth_clamped": depth != target_depth}
    return JobDag(job_id, nodes, tuple(edges), f"synth_v{v}", meta)


def validate_dag(dag: JobDag) -> list[str]:
    """Return human-readable invariant violations; empty when the DAG is well formed."""
    problems: list[str] = []
    ids = [t.task_id for t in dag.nodes]
    idset = set(ids)
    if len(idset) != len(ids):
        problems.append("duplicate-node: task ids are not unique")
    seen: set[tuple[int, int]] = set()
    for s, d, w in dag.edges:
        if s not in idset or d not in idset:
            problems.append(f"dangling-edge: ({s}, {d}) references a missing node")
        if s == d:
            problems.append(f"self-loop: node {s}")
        if (s, d) in seen:
            problems.append(f"duplicate-edge: ({s}, {d})")
        seen.add((s, d))
        if w < 0:
            problems.append(f"negative-weight: edge ({s}, {d}) has weight {w}")
    for t in dag.nodes:
        if not t.comp_cost:
            problems.append(f"unsupported-task: node {t.task_id} has no supporting PE")
        for pe, c in t.comp_cost.items():
            if c < 0:
                problems.append(f"negative-cost: node {t.task_id} on PE {pe}")
    if problems:
        return problems

    if _kahn(dag) is None:
        problems.append("cycle: graph is not acyclic")
        return problems
    heads = [n for n, p in dag.preds.items() if not p]
    tails = [n for n, s in dag.succs.items() if not s]
    if len(heads) != 1:
        problems.append(f"multiple-HEAD: {len(heads)} nodes with in-degree 0: {sorted(heads)}")
    if len(tails) != 1:
        problems.append(f"multiple-TAIL: {len(tails)} nodes with out-degree 0: {sorted(tails)}")
    if len(heads) == 1 and len(tails) == 1:
        down = _reach(heads[0], dag.succs)
        up = _reach(tails[0], dag.preds)
        for n in ids:
            if n not in down or n not in up:
                problems.append(f"off-path: node {n} is not on a HEAD-TAIL path")
    return problems


def _kahn(dag: JobDag) -> list[int] | None:
    indeg = {t.task_id: 0 for t in dag.nodes}
    for _, d, _ in dag.edges:
        indeg[d] += 1
    stack = sorted((n for n, k in indeg.items() if k == 0), reverse=True)
    order = []
    while stack:
        n = stack.pop()
        order.append(n)
        for c in sorted(dag.succs.get(n, ()), reverse=True):
            indeg[c] -= 1
            if indeg[c] == 0:
                stack.append(c)
    return order if len(order) == len(indeg) else None


def _reach(start: int, adj: Mapping[int, list[int]]) -> set[int]:
    seen = {start}
    todo = [start]
    while todo:
        for m in adj.get(todo.pop(), ()):
            if m not in seen:
                seen.add(m)
                todo.append(m)
    return seen


def edge_density(dag: JobDag) -> float:
    n = dag.num_tasks
    if n < 2:
        raise ValueError("edge density needs at least two nodes")
    return 2 * len(dag.edges) / (n * (n - 1))


def chain_ratio(dag: JobDag) -> float:
    if not dag.nodes:
        return 0.0
    chained = sum(1 for t in dag.nodes
                  if len(dag.preds[t.task_id]) == 1 and len(dag.succs[t.task_id]) == 1)
    return chained / dag.num_tasks


def ccr(dag: JobDag, platform) -> float:
    """Mean transfer delay per edge over mean per-task computation cost.

    Delay uses the mean bandwidth across distinct PE pairs; computation uses
    each task's mean over its supporting PEs.
    """
    if platform.num_pes > 1 and platform.mean_bandwidth <= 0:
        raise ValueError("platform has no bandwidth entries")
    if not dag.edges:
        return 0.0
    mean_w = sum(w for _, _, w in dag.edges) / len(dag.edges)
    comm = mean_w / platform.mean_bandwidth if platform.num_pes > 1 else 0.0
    comp = sum(sum(t.comp_cost.values()) / len(t.comp_cost) for t in dag.nodes) / dag.num_tasks
    return comm / comp


def parse_job_profile(text: str, known_pes: Sequence[int] | None = None,
                      job_id: int = 0) -> JobDag:
    name = "job"
    tasks: dict[int, str] = {}
    order: list[int] = []
    edges: list[Edge] = []
    comps: dict[int, dict[int, float]] = {}
    refs: list[tuple[int, str, tuple]] = []
    pes = set(known_pes) if known_pes is not None else None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        kind, *args = line.split()
        try:
            if kind == "job":
                if len(args) != 1:
                    raise ProfileError(lineno, "expected: job <name>")
                name = args[0]
            elif kind == "task":
                if len(args) != 2:
                    raise ProfileError(lineno, "expected: task <id> <name>")
                tid = int(args[0])
                if tid in tasks:
                    raise ProfileError(lineno, f"duplicate task {tid}")
                tasks[tid] = args[1]
                order.append(tid)
            elif kind == "edge":
                if len(args) != 3:
                    raise ProfileError(lineno, "expected: edge <src> <dst> <weight>")
                s, d, w = int(args[0]), int(args[1]), float(args[2])
                if w < 0:
                    raise ProfileError(lineno, "edge weight must be non-negative")
                edges.append((s, d, w))
                refs.append((lineno, "edge", (s, d)))
            elif kind == "comp":
                if len(args) != 3:
                    raise ProfileError(lineno, "expected: comp <task_id> <pe_id> <cost>")
                tid, pe, c = int(args[0]), int(args[1]), float(args[2])
                if c < 0:
                    raise ProfileError(lineno, "computation cost must be non-negative")
                if pes is not None and pe not in pes:
                    raise ProfileError(lineno, f"comp references undefined pe {pe}")
                comps.setdefault(tid, {})[pe] = c
                refs.append((lineno, "comp", (tid,)))
            else:
                raise ProfileError(lineno, f"unknown directive {kind!r}")
        except ProfileError:
            raise
        except ValueError as exc:
            raise ProfileError(lineno, str(exc)) from None
    for lineno, kind, ids in refs:
        for tid in ids:
            if tid not in tasks:
                raise ProfileError(lineno, f"{kind} references undefined task {tid}")
    for tid in order:
        if tid not in comps:
            raise ProfileError(0, f"task {tid} has no comp lines")
    nodes = tuple(TaskTemplate(tid, tasks[tid], comps[tid]) for tid in order)
    return JobDag(job_id, nodes, tuple(edges), name)


def write_job_profile(dag: JobDag) -> str:
    lines = [f"job {dag.name}"]
    lines += [f"task {t.task_id} {t.name}" for t in dag.nodes]
    lines += [f"edge {s} {d} {w!r}" for s, d, w in dag.edges]
    for t in dag.nodes:
        lines += [f"comp {t.task_id} {pe} {c!r}" for pe, c in t.comp_cost.items()]
    return "\n".join(lines) + "\n"


def adjacency_dump(dag: JobDag) -> str:
    """One line per node, `id: child(weight) ...`, for eyeballing structure."""
    out = []
    for t in dag.nodes:
        kids = " ".join(f"{c}({dag.weight[(t.task_id, c)]:g})" for c in dag.succs[t.task_id])
        out.append(f"{t.task_id}: {kids}")
    return "\n".join(out) + "\n"


def structurally_equal(a: JobDag, b: JobDag) -> bool:
    return (a.name == b.name
            and [(t.task_id, t.name, dict(t.comp_cost)) for t in a.nodes]
            == [(t.task_id, t.name, dict(t.comp_cost)) for t in b.nodes]
            and sorted(a.edges) == sorted(b.edges))


def load_synthetic_job() -> JobDag:
    text = resources.files("socsim.data").joinpath("synthetic_job.txt").read_text()
    return parse_job_profile(text)


def make_workloads(template: JobDag, count: int, rng: np.random.Generator,
                   alpha: float | None = None, nu: float | None = None,
                   nu_std: float = 0.0) -> list[JobDag]:
    """Workload pool drawn from a job profile.

    With ``alpha`` unset every workload is the profile graph itself. Otherwise
    each workload is a freshly synthesized structure carrying the profile's
    per-task costs; edge weights come from ``nu`` (default 0, so weight 1).
    """
    if alpha is None:
        return [template.with_job_id(i) for i in range(count)]
    costs = [t.comp_cost for t in template.nodes]
    names = [t.name for t in template.nodes]
    params = DagGenParams(template.num_tasks, alpha, nu or 0.0, nu_std)
    return [synthesize_dag(params, rng, costs, names, job_id=i) for i in range(count)]
