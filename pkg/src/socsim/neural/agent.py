"""Actor-critic scheduler that picks a PE per ready task from a masked policy."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from sklearn.utils.validation import check_is_fitted

from ..engine import COMPLETED, Assignment, EpisodeResult, SchedulerView, SimConfig, run_episode
from ..errors import SchedulingError, TrainingDivergence
from ..metrics import average_latency, explained_variance
from ..platform import Platform
from ..schedulers import Scheduler
from ..workload import JobDag
from .features import TASK_FEATURES, build_observation, observation_size, task_block, support_mask
from .model import Adam, PolicyValueNet, actor_critic_loss, clip_grad_norm, sample_masked
from .returns import eim_returns, standard_returns

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
LOG_COLUMNS = ("episode", "total_reward", "mean_return", "actor_loss", "critic_loss",
               "entropy", "explained_variance", "avg_latency", "completed_jobs")


@dataclass
class Environment:
    """Workload pool, platform and run settings shared by every training episode."""

    workloads: list[JobDag]
    platform: Platform
    config: SimConfig

    @property
    def v_max(self) -> int:
        return max(w.num_tasks for w in self.workloads)

    def run(self, scheduler, seed: int | None = None, record_trace: bool = False) -> EpisodeResult:
        cfg = self.config if seed is None else replace(self.config, seed=seed)
        return run_episode(self.workloads, self.platform, scheduler, cfg, record_trace)


@dataclass
class _Sample:
    x: np.ndarray
    masks: np.ndarray          # (S, Q)
    actions: list[int]         # one per used slot
    keys: list[tuple[int, int]]
    clk: int
    interaction: int


@dataclass
class Batch:
    X: np.ndarray
    masks: np.ndarray
    actions: np.ndarray
    returns: np.ndarray
    dropped: int = 0


@dataclass
class _Episode:
    samples: list[_Sample] = field(default_factory=list)
    interactions: int = 0


def episode_seed(seed: int, episode: int) -> int:
    return int(np.random.SeedSequence([seed, episode]).generate_state(1)[0])


class NeuralScheduler(Scheduler):
    """Masked multinomial policy over PEs trained with matched (or standard) returns.

    In ``independent`` mode each ready task gets its own forward pass: the
    system observation plus that task's feature block and support mask. In
    ``group`` mode up to ``a_max`` ready tasks share one forward pass whose
    output holds ``a_max`` per-slot distributions; a group's return window
    closes when its last task completes.

    Returns are multiplied by ``return_scale`` before the loss. The dense
    reward grows with the clock, so raw returns reach -1e4 and beyond; a
    value head chasing them drives the shared tanh trunk into saturation.
    """

    name = "neural"

    def __init__(self, capacity: int = 3, v_max: int = 10, hidden: int = 128,
                 action_mode: str = "independent", a_max: int = 8, gamma: float = 0.98,
                 learning_rate: float = 3e-4, entropy_coef: float = 0.01,
                 grad_clip: float = 1.0, episodes: int = 100, eim: bool = True,
                 time_norm: float = 100.0, return_scale: float = 1e-4,
                 greedy: bool = False, seed: int = 0):
        self.capacity = capacity
        self.v_max = v_max
        self.hidden = hidden
        self.action_mode = action_mode
        self.a_max = a_max
        self.gamma = gamma
        self.learning_rate = learning_rate
        self.entropy_coef = entropy_coef
        self.grad_clip = grad_clip
        self.episodes = episodes
        self.eim = eim
        self.time_norm = time_norm
        self.return_scale = return_scale
        self.greedy = greedy
        self.seed = seed

    # -- model plumbing -------------------------------------------------

    def _validate_params(self):
        if self.action_mode not in ("independent", "group"):
            raise ValueError(f"action_mode must be 'independent' or 'group', got {self.action_mode!r}")
        if not 0 <= self.gamma <= 1:
            raise ValueError("gamma must lie in [0, 1]")
        if self.grad_clip <= 0:
            raise ValueError("grad_clip must be positive")
        if self.a_max < 1:
            raise ValueError("a_max must be at least 1")
        if not self.return_scale > 0:
            raise ValueError("return_scale must be positive")

    def _slots(self) -> int:
        return 1 if self.action_mode == "independent" else self.a_max

    def input_size(self, num_pes: int) -> int:
        return (observation_size(self.capacity, self.v_max)
                + self._slots() * (TASK_FEATURES + num_pes))

    def init_model(self, platform: Platform) -> "NeuralScheduler":
        self._validate_params()
        q = platform.num_pes
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 0xC0DE]))
        self.model_ = PolicyValueNet(self.input_size(q), self._slots() * q, self.hidden, rng)
        self.optimizer_ = Adam(self.learning_rate)
        self.pe_ids_ = list(platform.pe_ids)
        self.history_: list[dict] = []
        self.episodes_done_ = 0
        return self

    # -- scheduling -----------------------------------------------------

    def reset(self, platform, rng):
        if not hasattr(self, "model_"):
            self.init_model(platform)
        if list(platform.pe_ids) != self.pe_ids_:
            raise ValueError("platform PEs differ from the ones the model was built for")
        self.rng_ = rng
        self._episode = _Episode()
        self.last_result_ = None

    def schedule(self, view: SchedulerView) -> list[Assignment]:
        if not hasattr(self, "model_"):
            check_is_fitted(self, "model_")
        if not hasattr(self, "_episode"):
            self.reset(view.platform, np.random.default_rng(self.seed))
        obs, offsets = build_observation(view, self.capacity, self.v_max, self.time_norm)
        q = len(self.pe_ids_)
        slots = self._slots()
        ep = self._episode
        out = []
        ready = view.ready
        for lo in range(0, len(ready), slots):
            chunk = ready[lo:lo + slots]
            x = np.zeros(self.model_.n_in)
            n_obs = len(obs)
            x[:n_obs] = obs
            masks = np.zeros((slots, q), dtype=bool)
            for k, t in enumerate(chunk):
                m = support_mask(t, self.pe_ids_)
                if not m.any():
                    raise SchedulingError(f"task {t.task_id} of job {t.job.job_id} has no supporting PE")
                base = n_obs + k * (TASK_FEATURES + q)
                x[base:base + TASK_FEATURES] = task_block(t, view.clk, self.time_norm)
                x[base + TASK_FEATURES:base + TASK_FEATURES + q] = m
                masks[k] = m
            logits, _, _ = self.model_.forward(x[None, :])
            logits = logits.reshape(slots, q)
            actions = []
            for k, t in enumerate(chunk):
                if self.greedy:
                    a = int(np.argmax(np.where(masks[k], logits[k], -np.inf)))
                else:
                    a = sample_masked(logits[k], masks[k], self.rng_.random())
                actions.append(a)
                pe = self.pe_ids_[a]
                out.append(Assignment(t, pe))
                off = offsets[(t.job.job_id, t.task_id)]
                obs[off] = float(pe)
            ep.samples.append(_Sample(x, masks, actions, [t.key for t in chunk],
                                      view.clk, ep.interactions))
        ep.interactions += 1
        return out

    def end_episode(self, result: EpisodeResult) -> None:
        self.last_result_ = result

    # -- learning -------------------------------------------------------

    def collect_batch(self, result: EpisodeResult) -> Batch:
        """Stack this episode's decisions with their return targets."""
        samples = self._episode.samples
        q = len(self.pe_ids_)
        slots = self._slots()
        if self.eim:
            keep, starts, ends = [], [], []
            dropped = 0
            for s in samples:
                omegas = []
                for job_id, tid in s.keys:
                    t = result.jobs[job_id].tasks[tid]
                    omegas.append(t.completion_clk if t.status == COMPLETED else None)
                if any(w is None for w in omegas):
                    dropped += 1
                    continue
                keep.append(s)
                starts.append(s.clk)
                ends.append(max(omegas))
            returns = eim_returns(starts, ends, result.reward_stream, self.gamma)
        else:
            keep, dropped = list(samples), 0
            clks = sorted({s.clk for s in samples})
            per_clk = dict(zip(clks, standard_returns(clks, result.reward_stream, self.gamma)))
            returns = np.array([per_clk[s.clk] for s in keep])
        n = len(keep)
        X = np.zeros((n, self.model_.n_in))
        masks = np.zeros((n, slots, q), dtype=bool)
        actions = np.full((n, slots), -1, dtype=int)
        for i, s in enumerate(keep):
            X[i] = s.x
            masks[i] = s.masks
            actions[i, :len(s.actions)] = s.actions
        return Batch(X, masks, actions, np.asarray(returns, dtype=float), dropped)

    def update(self, batch: Batch) -> dict:
        if len(batch.returns) == 0:
            return {"actor_loss": 0.0, "critic_loss": 0.0, "entropy": 0.0,
                    "explained_variance": None, "mean_return": None}
        targets = batch.returns * self.return_scale
        res = actor_critic_loss(self.model_, batch.X, batch.masks, batch.actions,
                                targets, self.entropy_coef)
        if not math.isfinite(res.total):
            raise TrainingDivergence(
                f"non-finite loss (actor={res.actor}, critic={res.critic}, "
                f"entropy={res.entropy}) on a batch of {len(batch.returns)} samples, "
                f"returns in [{batch.returns.min()}, {batch.returns.max()}]")
        backup = self.model_.copy_params()
        clip_grad_norm(res.grads, self.grad_clip)
        self.optimizer_.step(self.model_.params, res.grads)
        if not all(np.isfinite(v).all() for v in self.model_.params.values()):
            self.model_.params = backup
            raise TrainingDivergence("parameters became non-finite; restored last good values")
        return {
            "actor_loss": res.actor,
            "critic_loss": res.critic,
            "entropy": res.entropy,
            "explained_variance": explained_variance(targets, res.values),
            "mean_return": float(batch.returns.mean()),
        }

    def fit(self, env: Environment, y=None, episodes: int | None = None,
            log_path: str | Path | None = None) -> "NeuralScheduler":
        """Train for `episodes` more episodes (default ``self.episodes``) on `env`.

        Calling ``fit`` again continues from the current parameters and
        optimizer state; the episode counter, and with it each episode's
        random stream, carries on from where it stopped.
        """
        if env.config.capacity > self.capacity or env.v_max > self.v_max:
            raise ValueError(
                f"environment needs capacity >= {env.config.capacity} and v_max >= {env.v_max}; "
                f"scheduler has {self.capacity} and {self.v_max}")
        if not hasattr(self, "model_"):
            self.init_model(env.platform)
        n = self.episodes if episodes is None else episodes
        writer = None
        fh = None
        if log_path is not None:
            path = Path(log_path)
            new = not path.exists() or path.stat().st_size == 0
            fh = path.open("a", newline="")
            writer = csv.DictWriter(fh, fieldnames=LOG_COLUMNS, lineterminator="\n")
            if new:
                writer.writeheader()
        try:
            for _ in range(n):
                ep = self.episodes_done_
                result = env.run(self, seed=episode_seed(self.seed, ep))
                stats = self.update(self.collect_batch(result))
                row = {
                    "episode": ep,
                    "total_reward": result.total_reward,
                    "mean_return": stats["mean_return"],
                    "actor_loss": stats["actor_loss"],
                    "critic_loss": stats["critic_loss"],
                    "entropy": stats["entropy"],
                    "explained_variance": stats["explained_variance"],
                    "avg_latency": average_latency(result.completed_jobs),
                    "completed_jobs": len(result.completed_jobs),
                }
                self.history_.append(row)
                self.episodes_done_ += 1
                if writer is not None:
                    writer.writerow(row)
                log.debug("episode %d reward %.1f jobs %d", ep, row["total_reward"],
                          row["completed_jobs"])
        finally:
            if fh is not None:
                fh.close()
        return self

    # -- persistence ----------------------------------------------------

    def config_hash(self) -> str:
        params = {k: v for k, v in self.get_params().items() if k not in ("episodes", "greedy")}
        blob = json.dumps(params, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def save(self, path: str | Path) -> None:
        check_is_fitted(self, "model_")
        meta = {
            "format": "socsim-checkpoint",
            "version": CHECKPOINT_VERSION,
            "config_hash": self.config_hash(),
            "params": self.get_params(),
            "episodes_done": self.episodes_done_,
            "adam_t": self.optimizer_.t,
            "pe_ids": self.pe_ids_,
        }
        arrays = {f"p_{k}": v for k, v in self.model_.params.items()}
        arrays.update({f"m_{k}": v for k, v in self.optimizer_.m.items()})
        arrays.update({f"v_{k}": v for k, v in self.optimizer_.v.items()})
        with open(path, "wb") as fh:
            np.savez(fh, meta=np.array(json.dumps(meta)), **arrays)

    @classmethod
    def load(cls, path: str | Path) -> "NeuralScheduler":
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            if meta.get("format") != "socsim-checkpoint":
                raise ValueError(f"{path}: not a scheduler checkpoint")
            if meta.get("version") != CHECKPOINT_VERSION:
                raise ValueError(f"{path}: unsupported checkpoint version {meta.get('version')}")
            est = cls(**meta["params"])
            if est.config_hash() != meta["config_hash"]:
                raise ValueError(f"{path}: configuration hash mismatch")
            q = len(meta["pe_ids"])
            est._validate_params()
            est.model_ = PolicyValueNet(est.input_size(q), est._slots() * q, est.hidden)
            for k in est.model_.params:
                est.model_.params[k] = data[f"p_{k}"].copy()
            est.optimizer_ = Adam(est.learning_rate)
            est.optimizer_.t = meta["adam_t"]
            for k in est.model_.params:
                if f"m_{k}" in data:
                    est.optimizer_.m[k] = data[f"m_{k}"].copy()
                    est.optimizer_.v[k] = data[f"v_{k}"].copy()
            est.pe_ids_ = list(meta["pe_ids"])
            est.episodes_done_ = meta["episodes_done"]
            est.history_ = []
        return est


def train(env: Environment, scheduler: NeuralScheduler | None = None,
          episodes: int | None = None, log_path=None) -> NeuralScheduler:
    scheduler = NeuralScheduler(capacity=env.config.capacity, v_max=env.v_max) \
        if scheduler is None else scheduler
    return scheduler.fit(env, episodes=episodes, log_path=log_path)
