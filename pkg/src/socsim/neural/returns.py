"""Return targets for the scheduler's actions.

Rewards arrive once per clock tick, while scheduling decisions happen at
irregular ticks and take effect over each task's own lifetime. The matched
return of an action decided at tick ``s`` whose task completed at tick ``w``
discounts the per-tick rewards over exactly ``[s, w]``. The standard return
instead discounts only up to the next decision tick, so consequences that
land after it are dropped.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np


def _padded(reward_stream: np.ndarray) -> np.ndarray:
    # reward_stream[k] is the reward at tick k + 1; tick 0 carries none.
    return np.concatenate(([0.0], np.asarray(reward_stream, dtype=float)))


def window_return(r: np.ndarray, start: int, end: int, gamma: float) -> float:
    """Discounted sum of ``r[start..end]``, correctly rounded from the exact terms."""
    seg = r[start:end + 1]
    return math.fsum(seg * gamma ** np.arange(len(seg), dtype=float))


def eim_returns(starts: Sequence[int], omegas: Sequence[int | None],
                reward_stream: np.ndarray, gamma: float) -> np.ndarray:
    """Per-action discounted reward over the action's own [start, completion] window."""
    r = _padded(reward_stream)
    out = np.empty(len(starts))
    for i, (s, w) in enumerate(zip(starts, omegas)):
        if w is None:
            raise ValueError(f"action {i} has no completion tick; drop truncated actions first")
        if w < s:
            raise ValueError(f"action {i} completes before it starts")
        out[i] = window_return(r, s, w, gamma)
    return out


def standard_returns(interaction_clks: Sequence[int], reward_stream: np.ndarray,
                     gamma: float) -> np.ndarray:
    """Per-interaction discounted reward from its tick to the next interaction's tick.

    The last interaction runs to the end of the episode.
    """
    r = _padded(reward_stream)
    end_clk = len(r) - 1
    clks = list(interaction_clks)
    out = np.empty(len(clks))
    for i, c in enumerate(clks):
        nxt = clks[i + 1] if i + 1 < len(clks) else end_clk
        out[i] = window_return(r, c, nxt, gamma)
    return out
