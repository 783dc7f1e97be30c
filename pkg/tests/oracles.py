"""Independent re-implementations used as test oracles.

The heuristic oracles never call into socsim.schedulers; each decision rule
is rebuilt from raw simulator state so agreement is meaningful. The
schedulers are imported only to run them side by side.
"""
import numpy as np

from socsim.engine import SimConfig, run_episode
from socsim.schedulers import HEFTRTScheduler, METScheduler, STFScheduler, eft


def oracle_exec(view, t, pe):
    plat = view.platform
    delay = 0.0
    for p in t.job.dag.preds[t.task_id]:
        parent = t.job.tasks[p]
        if parent.pe != pe:
            delay = max(delay, t.job.dag.weight[(p, t.task_id)] / plat.bandwidth[(parent.pe, pe)])
    return plat.mu * t.template.comp_cost[pe] + delay


def _pes_of(t, view):
    return [pe for pe in sorted(view.pes) if pe in t.template.comp_cost]


def _argmin_pe(t, view, allowed):
    best = None
    for pe in sorted(allowed):
        e = oracle_exec(view, t, pe)
        if best is None or e < best[1]:
            best = (pe, e)
    return best


def _stf_order(view):
    remaining = list(view.ready)
    order = []
    while remaining:
        pick = None
        for t in remaining:
            key = (_argmin_pe(t, view, _pes_of(t, view))[1], t.job.job_id, t.task_id)
            if pick is None or key < pick[0]:
                pick = (key, t)
        order.append(pick[1])
        remaining.remove(pick[1])
    return order


def oracle_stf(view):
    return [(t.key, _argmin_pe(t, view, _pes_of(t, view))[0]) for t in _stf_order(view)]


def oracle_met(view):
    claimed = set()
    out = []
    for t in _stf_order(view):
        pe = _argmin_pe(t, view, _pes_of(t, view))[0]

        def busy(k):
            state = view.pes[k]
            return state.running is not None or len(state.queue) > 0 or k in claimed

        if busy(pe):
            idle = [k for k in _pes_of(t, view) if not busy(k)]
            if idle:
                pe = _argmin_pe(t, view, idle)[0]
        claimed.add(pe)
        out.append((t.key, pe))
    return out


def naive_rank(dag, plat, n):
    costs = dag.task[n].comp_cost
    w_bar = plat.mu * sum(costs.values()) / len(costs)
    tails = [dag.weight[(n, s)] / plat.mean_bandwidth + naive_rank(dag, plat, s)
             for s in dag.succs[n]]
    return w_bar + max(tails, default=0.0)


def brute_slot(duration, earliest, timeline):
    candidates = sorted({earliest} | {b1 for _, b1 in timeline if b1 >= earliest})
    for c in candidates:
        if all(not (c < b1 and c + duration > b0) for b0, b1 in timeline):
            return c
    raise AssertionError("append slot must exist")


def oracle_heft(view, insertion=True):
    plat = view.platform
    order = sorted(view.ready, key=lambda t: (-naive_rank(t.job.dag, plat, t.task_id),
                                              t.job.job_id, t.task_id))
    timelines = {pe: list(view.timeline(pe)) for pe in view.pes}
    out = []
    for t in order:
        best = None
        for pe in _pes_of(t, view):
            ready_at = float(view.clk)
            for p in t.job.dag.preds[t.task_id]:
                parent = t.job.tasks[p]
                c = 0.0 if parent.pe == pe else \
                    t.job.dag.weight[(p, t.task_id)] / plat.bandwidth[(parent.pe, pe)]
                ready_at = max(ready_at, parent.completion_clk + c)
            d = plat.mu * t.template.comp_cost[pe]
            tl = timelines[pe]
            if insertion:
                start = brute_slot(d, ready_at, tl)
            else:
                start = max([ready_at, float(view.clk)] + [b1 for _, b1 in tl])
            if best is None or start + d < best[2]:
                best = (pe, start, start + d)
        timelines[best[0]] = sorted(timelines[best[0]] + [(best[1], best[2])])
        out.append((t.key, best[0], best[1]))
    return out


class Checked:
    """Runs `inner` and compares every call against `oracle` on the same view."""

    def __init__(self, inner, oracle):
        self.inner, self.oracle = inner, oracle
        self.calls = self.mismatches = 0

    def reset(self, platform, rng):
        self.inner.reset(platform, rng)

    def schedule(self, view):
        expected = self.oracle(view)
        got = self.inner.schedule(view)
        self.calls += 1
        mine = [(a.task.key, a.pe) for a in got]
        theirs = [e[:2] for e in expected]
        ok = mine == theirs
        if ok and expected and len(expected[0]) == 3:
            ok = all(abs(a.planned_start - e[2]) < 1e-9 for a, e in zip(got, expected))
        self.mismatches += not ok
        return got


HEURISTICS = {
    "stf": (STFScheduler, oracle_stf),
    "met": (METScheduler, oracle_met),
    "heft_rt": (HEFTRTScheduler, oracle_heft),
}


def random_instance(edges, n_nodes, rng, n_pes=2):
    from conftest import make_dag, make_platform

    costs = []
    for _ in range(n_nodes):
        c = {pe: float(rng.integers(1, 12)) for pe in range(n_pes) if rng.random() < 0.75}
        if not c:
            c = {int(rng.integers(n_pes)): float(rng.integers(1, 12))}
        costs.append(c)
    weighted = [(s, d, float(rng.integers(0, 10))) for s, d, _ in edges]
    plat = make_platform(n_pes, bw={(a, b): float(rng.choice([0.5, 1.0, 2.0]))
                                    for a in range(n_pes) for b in range(n_pes) if a != b},
                         mu=float(rng.choice([0.5, 1.0])))
    return make_dag(costs, weighted), plat


def heuristic_agreement(dag_edge_sets, seed=0, sim_length=60):
    """(calls, mismatches) per heuristic over every DAG shape given."""
    rng = np.random.default_rng(seed)
    totals = {name: [0, 0] for name in HEURISTICS}
    for edges in dag_edge_sets:
        n = 1 + max(max(s, d) for s, d, _ in edges)
        dag, plat = random_instance(edges, n, rng)
        for name, (cls, oracle) in HEURISTICS.items():
            checked = Checked(cls(), oracle)
            run_episode([dag], plat, checked, SimConfig(sim_length=sim_length, capacity=2,
                                                        num_workloads=2))
            totals[name][0] += checked.calls
            totals[name][1] += checked.mismatches
    return totals


def insertion_pairs(n_instances=200, seed=0):
    """Per-decision (finish with insertion, finish without) over random small instances.

    Decisions follow the insertion scheduler; at each one both placements are
    evaluated on the same timeline state.
    """
    from socsim.workload import DagGenParams, synthesize_dag

    rng = np.random.default_rng(seed)
    pairs = []
    agree = True

    class Probe(HEFTRTScheduler):
        def schedule(self, view):
            nonlocal agree
            got = super().schedule(view)
            order = [a.task for a in got]
            timelines = {pe: view.timeline(pe) for pe in view.platform.pe_ids}
            for a, t in zip(got, order):
                pes = [pe for pe in view.platform.pe_ids if pe in t.template.comp_cost]
                with_ins = [eft(t, pe, view, timelines[pe], True) for pe in pes]
                without = [eft(t, pe, view, timelines[pe], False) for pe in pes]
                f_ins = min(f for _, f in with_ins)
                f_no = min(f for _, f in without)
                pairs.append((f_ins, f_no))
                agree &= abs(a.planned_finish - f_ins) < 1e-9
                timelines[a.pe] = sorted(timelines[a.pe] + [(a.planned_start, a.planned_finish)])
            return got

    for _ in range(n_instances):
        v = int(rng.integers(4, 9))
        shape = synthesize_dag(DagGenParams(v, float(rng.uniform(0.5, 1.2)), 8.0, 6.0), rng)
        dag, plat = random_instance(shape.edges, v, rng, n_pes=int(rng.integers(2, 4)))
        run_episode([dag], plat, Probe(), SimConfig(sim_length=120, capacity=2,
                                                    num_workloads=2,
                                                    seed=int(rng.integers(1 << 30))))
    return pairs, agree


def all_small_dags(max_nodes=5):
    from conftest import enumerate_dags
    return enumerate_dags(max_nodes)


# -- neural ---------------------------------------------------------------------

def random_loss_case(rng):
    from socsim.neural.model import PolicyValueNet

    n_in, q, slots = int(rng.integers(2, 7)), int(rng.integers(2, 5)), int(rng.integers(1, 4))
    hidden, n = int(rng.integers(2, 6)), int(rng.integers(1, 5))
    model = PolicyValueNet(n_in, slots * q, hidden, rng)
    for k in model.params:
        model.params[k] = rng.normal(0, 0.7, model.params[k].shape)
    X = rng.normal(size=(n, n_in))
    masks = rng.random((n, slots, q)) < 0.7
    masks[..., 0] |= ~masks.any(-1)
    actions = np.full((n, slots), -1)
    for i in range(n):
        used = int(rng.integers(1, slots + 1))
        for s in range(used):
            actions[i, s] = int(rng.choice(np.flatnonzero(masks[i, s])))
    returns = rng.normal(0, 3, n)
    coef = float(rng.uniform(0, 0.5))
    return model, X, masks, actions, returns, coef


def fd_relative_error(model, X, masks, actions, returns, coef, eps=1e-6):
    """Normwise relative gap between analytic and central-difference gradients."""
    from socsim.neural.model import actor_critic_loss

    base = actor_critic_loss(model, X, masks, actions, returns, coef)
    adv = returns - base.values
    flat = model.get_flat()
    numeric = np.empty_like(flat)

    def loss_at(x):
        model.set_flat(x)
        return actor_critic_loss(model, X, masks, actions, returns, coef, advantage=adv).total

    for i in range(flat.size):
        up, down = flat.copy(), flat.copy()
        up[i] += eps
        down[i] -= eps
        numeric[i] = (loss_at(up) - loss_at(down)) / (2 * eps)
    model.set_flat(flat)
    analytic = np.concatenate([base.grads[k].ravel() for k in
                               ("W1", "b1", "W2", "b2", "Wp", "bp", "Wv", "bv")])
    return float(np.linalg.norm(analytic - numeric)
                 / max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12))


def brute_window_exact(rewards, start, end):
    """gamma = 1/2 accumulation in exact rationals, walking the clock array."""
    from fractions import Fraction

    acc = Fraction(0)
    for clk in range(start, end + 1):
        r = 0.0 if clk == 0 else rewards[clk - 1]
        acc += Fraction(r) * Fraction(1, 2) ** (clk - start)
    return float(acc)


def brute_window(rewards, start, end, gamma):
    acc = 0.0
    weight = 1.0
    for clk in range(start, end + 1):
        acc += weight * (0.0 if clk == 0 else rewards[clk - 1])
        weight *= gamma
    return acc


def random_trace(rng, clk_max=300, n_actions=50):
    rewards = rng.normal(0, 10, clk_max)
    starts = rng.integers(0, clk_max, n_actions)
    ends = [int(rng.integers(s, min(clk_max, s + 60) + 1)) for s in starts]
    return rewards, [int(s) for s in starts], ends
