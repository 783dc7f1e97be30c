"""Command-line entry point: run, train, synth and eval subcommands.

Every output row is a pure function of the command line and its seed. A run
at seed ``s`` draws its workload pool from ``SeedSequence([s, 1])`` and its
simulator streams from ``s`` itself, so adding sweep points or seeds never
changes the rows that were already there.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import logging
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .engine import REWARD_KINDS, SimConfig, run_episode
from .errors import ProfileError, SchedulingError, TrainingDivergence
from .metrics import summarize
from .platform import Platform, load_synthetic_platform, parse_resource_profile
from .schedulers import SCHEDULERS, make_scheduler
from .workload import (DagGenParams, JobDag, chain_ratio, edge_density, load_synthetic_job,
                       make_workloads, parse_job_profile, synthesize_dag, validate_dag,
                       write_job_profile)

log = logging.getLogger("socsim")

METRICS_HEADER = "# socsim-metrics v1"
SYNTH_HEADER = "# socsim-synth v1"
METRICS_COLUMNS = ("scheduler", "seed", "alpha", "mu", "nu", "scale", "sim_length", "capacity",
                   "completed_jobs", "avg_latency", "avg_slr", "avg_speedup", "total_reward")
SYNTH_COLUMNS = ("index", "file", "tasks", "edges", "levels", "edge_density", "chain_ratio")


class HarnessError(Exception):
    """A user-facing failure reported as one line on stderr."""


@dataclass(frozen=True)
class SweepPoint:
    scheduler: str
    alpha: float | None
    mu: float | None
    nu: float | None
    scale: float
    seed: int

    def tag(self) -> str:
        def f(x):
            return "na" if x is None else repr(x)
        return (f"{self.scheduler}_a{f(self.alpha)}_mu{f(self.mu)}_nu{f(self.nu)}"
                f"_sc{f(self.scale)}_seed{self.seed}")


# -- argument helpers ---------------------------------------------------------

def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _seeds(text: str) -> list[int]:
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part[1:]:
                lo, hi = part.split("-", 1)
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("empty seed list")
    return out


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise HarnessError(f"cannot read {path}: {e.strerror}") from None


def load_job(path: str | None) -> JobDag:
    if path is None:
        return load_synthetic_job()
    try:
        return parse_job_profile(_read(path))
    except ProfileError as e:
        raise HarnessError(f"{path}: {e}") from None


def load_platform(path: str | None, mu: float | None) -> Platform:
    if path is None:
        return load_synthetic_platform(mu)
    try:
        return parse_resource_profile(_read(path), mu)
    except ProfileError as e:
        raise HarnessError(f"{path}: {e}") from None


def _check_job(job: JobDag, platform: Platform, path: str | None) -> None:
    problems = validate_dag(job)
    unsupported = sorted({pe for t in job.nodes for pe in t.comp_cost} - set(platform.pe_ids))
    if unsupported:
        problems.append(f"unknown PE ids {unsupported}")
    if problems:
        raise HarnessError(f"{path or 'bundled job profile'}: {problems[0]}")


def base_config(args) -> SimConfig:
    cfg = SimConfig()
    if getattr(args, "config", None):
        try:
            cfg = SimConfig.from_text(_read(args.config))
        except ValueError as e:
            raise HarnessError(f"{args.config}: {e}") from None
    overrides = {}
    for flag, field_name in (("sim_length", "sim_length"), ("capacity", "capacity"),
                             ("reward", "reward_kind"), ("num_workloads", "num_workloads")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field_name] = value
    if getattr(args, "arrivals", False):
        overrides["quasi_steady"] = False
    try:
        return replace(cfg, **overrides)
    except ValueError as e:
        raise HarnessError(str(e)) from None


def workload_pool(job: JobDag, count: int, seed: int, alpha: float | None,
                  nu: float | None) -> list[JobDag]:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    try:
        return make_workloads(job, count, rng, alpha=alpha, nu=nu)
    except ValueError as e:
        raise HarnessError(str(e)) from None


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_rows(path: str | None, header: str, columns: Sequence[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    buf.write(header + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in columns])
    text = buf.getvalue()
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    return text


# -- subcommands --------------------------------------------------------------

def sweep_points(args, schedulers: Sequence[str]) -> list[SweepPoint]:
    alphas = args.alpha or [None]
    mus = args.mu or [None]
    nus = args.nu or [None]
    scales = args.scale or [None]
    points = []
    for sched, alpha, mu, nu, scale, seed in itertools.product(
            schedulers, alphas, mus, nus, scales, args.seeds):
        points.append(SweepPoint(sched, alpha, mu, nu, scale, seed))
    return points


def _execute(args, points: list[SweepPoint], scheduler_for) -> list[dict]:
    job = load_job(args.job)
    cfg0 = base_config(args)
    trace_dir = Path(args.trace_dir) if args.trace_dir else None
    if trace_dir is not None:
        trace_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for pt in points:
        platform = load_platform(args.resource, pt.mu)
        _check_job(job, platform, args.job)
        cfg = replace(cfg0, seed=pt.seed, scale=pt.scale if pt.scale is not None else cfg0.scale)
        pool = workload_pool(job, cfg.num_workloads, pt.seed, pt.alpha, pt.nu)
        result = run_episode(pool, platform, scheduler_for(pt.scheduler), cfg,
                             record_trace=trace_dir is not None)
        if trace_dir is not None:
            (trace_dir / f"{pt.tag()}.csv").write_text(result.trace_csv())
        summary = summarize(result.completed_jobs, platform)
        rows.append({
            "scheduler": pt.scheduler, "seed": pt.seed, "alpha": pt.alpha,
            "mu": platform.mu, "nu": pt.nu, "scale": cfg.scale,
            "sim_length": cfg.sim_length, "capacity": cfg.capacity,
            "total_reward": result.total_reward, **summary,
        })
        log.info("%s: %d jobs, avg latency %s", pt.tag(), summary["completed_jobs"],
                 summary["avg_latency"])
    return rows


def cmd_run(args) -> int:
    names = [s.strip() for s in args.scheduler.split(",") if s.strip()]
    for n in names:
        if n not in SCHEDULERS:
            known = ", ".join(sorted(SCHEDULERS))
            raise HarnessError(f"unknown scheduler {n!r} (known: {known}; use eval for neural)")
    rows = _execute(args, sweep_points(args, names), make_scheduler)
    write_rows(args.out, METRICS_HEADER, METRICS_COLUMNS, rows)
    return 0


def cmd_eval(args) -> int:
    from .neural import NeuralScheduler

    try:
        model = NeuralScheduler.load(args.checkpoint)
    except (OSError, ValueError, KeyError) as e:
        raise HarnessError(f"{args.checkpoint}: cannot load checkpoint ({e})") from None
    model.set_params(greedy=args.greedy)

    def make(_name):
        return model

    rows = _execute(args, sweep_points(args, ["neural"]), make)
    write_rows(args.out, METRICS_HEADER, METRICS_COLUMNS, rows)
    return 0


def cmd_train(args) -> int:
    from .neural import Environment, NeuralScheduler

    if len(args.seeds) != 1:
        raise HarnessError("train takes a single --seed")
    for axis in ("alpha", "mu", "nu", "scale"):
        if getattr(args, axis) and len(getattr(args, axis)) > 1:
            raise HarnessError(f"train takes a single --{axis} value")
    seed = args.seeds[0]
    alpha = args.alpha[0] if args.alpha else None
    nu = args.nu[0] if args.nu else None
    mu = args.mu[0] if args.mu else None
    job = load_job(args.job)
    platform = load_platform(args.resource, mu)
    _check_job(job, platform, args.job)
    cfg = replace(base_config(args), seed=seed)
    if args.scale:
        cfg = replace(cfg, scale=args.scale[0])
    env = Environment(workload_pool(job, cfg.num_workloads, seed, alpha, nu), platform, cfg)

    if args.resume:
        try:
            model = NeuralScheduler.load(args.resume)
        except (OSError, ValueError, KeyError) as e:
            raise HarnessError(f"{args.resume}: cannot load checkpoint ({e})") from None
    else:
        model = NeuralScheduler(
            capacity=cfg.capacity, v_max=env.v_max, action_mode=args.action_mode,
            eim=args.eim, seed=seed, episodes=args.episodes,
            **({} if args.lr is None else {"learning_rate": args.lr}),
            **({} if args.entropy_coef is None else {"entropy_coef": args.entropy_coef}))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    log_path = Path(args.log) if args.log else out.with_suffix(".log.csv")
    try:
        model.fit(env, episodes=args.episodes, log_path=log_path)
    except TrainingDivergence as e:
        model.save(out)
        raise HarnessError(f"training diverged: {e}; last good parameters saved to {out}") from None
    except ValueError as e:
        raise HarnessError(str(e)) from None
    model.save(out)
    log.info("trained %d episodes; checkpoint %s, log %s", model.episodes_done_, out, log_path)
    return 0


def cmd_synth(args) -> int:
    if args.count < 0:
        raise HarnessError("count must be non-negative")
    job = load_job(args.job)
    try:
        params = DagGenParams(args.v, args.alpha, args.nu, args.nu_std)
    except ValueError as e:
        raise HarnessError(str(e)) from None
    costs = [t.comp_cost for t in job.nodes]
    names = [t.name for t in job.nodes]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(np.random.SeedSequence([args.seeds[0], 2]))
    rows = []
    for i in range(args.count):
        dag = synthesize_dag(params, rng, costs, names, job_id=i)
        fname = f"job_{i:04d}.txt"
        (out_dir / fname).write_text(write_job_profile(dag))
        rows.append({"index": i, "file": fname, "tasks": dag.num_tasks,
                     "edges": len(dag.edges), "levels": dag.levels,
                     "edge_density": edge_density(dag), "chain_ratio": chain_ratio(dag)})
    write_rows(str(out_dir / "summary.csv"), SYNTH_HEADER, SYNTH_COLUMNS, rows)
    if rows:
        log.info("%d profiles, mean levels %.3f", len(rows),
                 sum(r["levels"] for r in rows) / len(rows))
    return 0


# -- parser -------------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--job", help="job profile file (default: bundled synthetic profile)")
    p.add_argument("--resource", help="resource profile file (default: bundled synthetic platform)")
    p.add_argument("--config", help="file of 'key = value' simulation settings")
    p.add_argument("--scale", type=_floats, help="mean inter-arrival time (comma list sweeps)")
    p.add_argument("--sim-length", dest="sim_length", type=int)
    p.add_argument("--capacity", type=int)
    p.add_argument("--num-workloads", dest="num_workloads", type=int)
    p.add_argument("--arrivals", action="store_true",
                   help="inject by exponential arrivals instead of a pre-filled queue")
    p.add_argument("--mu", type=_floats, help="PE performance scale (comma list sweeps)")
    p.add_argument("--alpha", type=_floats,
                   help="synthesize workload structures with this shape (comma list sweeps)")
    p.add_argument("--nu", type=_floats, help="mean edge weight of synthesized structures")
    p.add_argument("--reward", choices=REWARD_KINDS)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--seed", dest="seeds", type=lambda s: [int(s)])
    g.add_argument("--seeds", dest="seeds", type=_seeds, help="e.g. 0-19 or 1,5,9")
    p.set_defaults(seeds=[0])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="socsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate rule-based schedulers and export metrics")
    _common(run)
    run.add_argument("--scheduler", default="heft_rt",
                     help=f"one of {', '.join(SCHEDULERS)}; comma list sweeps")
    run.add_argument("--trace-dir", dest="trace_dir", help="write one event trace CSV per row")
    run.add_argument("--out", help="metrics CSV path (default: stdout)")
    run.set_defaults(func=cmd_run)

    ev = sub.add_parser("eval", help="simulate a trained checkpoint and export metrics")
    _common(ev)
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--greedy", action="store_true", help="take the most likely PE")
    ev.add_argument("--trace-dir", dest="trace_dir")
    ev.add_argument("--out")
    ev.set_defaults(func=cmd_eval)

    tr = sub.add_parser("train", help="train the neural scheduler")
    _common(tr)
    tr.add_argument("--episodes", type=int, default=100)
    tr.add_argument("--action-mode", dest="action_mode", choices=("independent", "group"),
                    default="independent")
    tr.add_argument("--eim", dest="eim", action="store_true", default=True)
    tr.add_argument("--no-eim", dest="eim", action="store_false")
    tr.add_argument("--lr", type=float)
    tr.add_argument("--entropy-coef", dest="entropy_coef", type=float)
    tr.add_argument("--resume", help="checkpoint to continue training from")
    tr.add_argument("--log", help="training log CSV (default: <out>.log.csv)")
    tr.add_argument("--out", required=True, help="checkpoint path")
    tr.set_defaults(func=cmd_train)

    sy = sub.add_parser("synth", help="write synthesized job profiles and a structure report")
    sy.add_argument("--job", help="profile supplying per-task costs (default: bundled)")
    sy.add_argument("--v", type=int, default=10)
    sy.add_argument("--alpha", type=float, default=0.8)
    sy.add_argument("--nu", type=float, default=0.0)
    sy.add_argument("--nu-std", dest="nu_std", type=float, default=0.0)
    sy.add_argument("--count", type=int, default=100)
    sy.add_argument("--seed", dest="seeds", type=lambda s: [int(s)], default=[0])
    sy.add_argument("--out", required=True, help="output directory")
    sy.set_defaults(func=cmd_synth)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    level = os.environ.get("SOCSIM_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (HarnessError, SchedulingError, ProfileError, ValueError) as e:
        msg = " ".join(str(e).split())
        print(f"socsim: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
