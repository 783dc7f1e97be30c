import itertools

import numpy as np
import pytest

from socsim.platform import Platform, ProcessingElement
from socsim.workload import JobDag, TaskTemplate, validate_dag


def make_platform(n_pes=2, bw=1.0, mu=1.0):
    pes = tuple(ProcessingElement(i, f"pe{i}", ((1.0, 1000.0),)) for i in range(n_pes))
    if isinstance(bw, dict):
        bandwidth = bw
    else:
        bandwidth = {(a, b): bw for a in range(n_pes) for b in range(n_pes) if a != b}
    return Platform(pes, bandwidth, mu)


def make_dag(costs, edges, job_id=0, name="t"):
    """costs: list of {pe: cost}; edges: (src, dst, weight) triples."""
    nodes = tuple(TaskTemplate(i, f"n{i}", dict(c)) for i, c in enumerate(costs))
    return JobDag(job_id, nodes, tuple(edges), name)


def chain(n, cost=1.0, weight=0.0, pes=(0,)):
    return make_dag([{p: cost for p in pes} for _ in range(n)],
                    [(i, i + 1, weight) for i in range(n - 1)])


def enumerate_dags(max_nodes):
    """Every valid DAG on 2..max_nodes nodes whose edges run from lower to higher id."""
    out = []
    for n in range(2, max_nodes + 1):
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        for bits in itertools.product((0, 1), repeat=len(pairs)):
            edges = [(i, j, 1.0) for (i, j), b in zip(pairs, bits) if b]
            dag = make_dag([{0: 1.0}] * n, edges)
            if not validate_dag(dag):
                out.append(edges)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
