"""Shared-trunk policy/value MLP with hand-written backprop, plus Adam."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PARAM_NAMES = ("W1", "b1", "W2", "b2", "Wp", "bp", "Wv", "bv")


class PolicyValueNet:
    """Two tanh hidden layers feeding a logits head and a scalar value head."""

    def __init__(self, n_in: int, n_out: int, hidden: int = 128,
                 rng: np.random.Generator | None = None):
        rng = np.random.default_rng(0) if rng is None else rng
        self.n_in, self.n_out, self.hidden = n_in, n_out, hidden
        self.params = {
            "W1": rng.normal(0, 1 / np.sqrt(n_in), (n_in, hidden)),
            "b1": np.zeros(hidden),
            "W2": rng.normal(0, 1 / np.sqrt(hidden), (hidden, hidden)),
            "b2": np.zeros(hidden),
            # Small policy head so the initial policy is close to uniform.
            "Wp": rng.normal(0, 0.01 / np.sqrt(hidden), (hidden, n_out)),
            "bp": np.zeros(n_out),
            "Wv": rng.normal(0, 1 / np.sqrt(hidden), (hidden, 1)),
            "bv": np.zeros(1),
        }

    def forward(self, X: np.ndarray):
        p = self.params
        h1 = np.tanh(X @ p["W1"] + p["b1"])
        h2 = np.tanh(h1 @ p["W2"] + p["b2"])
        logits = h2 @ p["Wp"] + p["bp"]
        values = (h2 @ p["Wv"] + p["bv"])[:, 0]
        return logits, values, (X, h1, h2)

    def backward(self, cache, dlogits: np.ndarray, dvalues: np.ndarray) -> dict[str, np.ndarray]:
        X, h1, h2 = cache
        p = self.params
        dv = dvalues[:, None]
        g = {
            "Wp": h2.T @ dlogits,
            "bp": dlogits.sum(0),
            "Wv": h2.T @ dv,
            "bv": dv.sum(0),
        }
        dh2 = dlogits @ p["Wp"].T + dv @ p["Wv"].T
        dz2 = dh2 * (1 - h2 ** 2)
        g["W2"] = h1.T @ dz2
        g["b2"] = dz2.sum(0)
        dz1 = (dz2 @ p["W2"].T) * (1 - h1 ** 2)
        g["W1"] = X.T @ dz1
        g["b1"] = dz1.sum(0)
        return g

    def get_flat(self) -> np.ndarray:
        return np.concatenate([self.params[k].ravel() for k in PARAM_NAMES])

    def set_flat(self, flat: np.ndarray) -> None:
        i = 0
        for k in PARAM_NAMES:
            size = self.params[k].size
            self.params[k] = flat[i:i + size].reshape(self.params[k].shape).copy()
            i += size

    def copy_params(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}


def masked_log_softmax(logits: np.ndarray, mask: np.ndarray):
    """Log-probabilities and probabilities with masked entries pinned to -inf and 0."""
    z = np.where(mask, logits, -np.inf)
    zmax = z.max(axis=-1, keepdims=True)
    zmax = np.where(np.isfinite(zmax), zmax, 0.0)
    e = np.where(mask, np.exp(z - zmax), 0.0)
    s = e.sum(axis=-1, keepdims=True)
    logp = np.where(mask, z - zmax - np.log(np.where(s > 0, s, 1.0)), -np.inf)
    probs = e / np.where(s > 0, s, 1.0)
    return logp, probs


def sample_masked(logits: np.ndarray, mask: np.ndarray, u: float) -> int:
    """Inverse-CDF draw from the masked softmax for a uniform ``u`` in [0, 1).

    Masked entries carry zero mass, so the search can never land on one.
    """
    z = np.where(mask, logits, -np.inf)
    cdf = np.cumsum(np.exp(z - z.max()))
    a = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    return min(a, len(cdf) - 1)


@dataclass
class LossResult:
    actor: float
    critic: float
    entropy: float
    total: float
    grads: dict[str, np.ndarray]
    values: np.ndarray


def actor_critic_loss(model: PolicyValueNet, X: np.ndarray, masks: np.ndarray,
                      actions: np.ndarray, returns: np.ndarray, entropy_coef: float,
                      advantage: np.ndarray | None = None) -> LossResult:
    """Policy-gradient + value regression + entropy bonus over a batch.

    ``masks`` is (N, S, Q) and ``actions`` is (N, S) with -1 in unused slots;
    independent actions use S = 1. The log-probability of a sample is the sum
    over its used slots. The advantage is held constant in the actor term; pass
    ``advantage`` to pin it explicitly (finite-difference checks do this).
    """
    N, S, Q = masks.shape
    logits, values, cache = model.forward(X)
    logits = logits.reshape(N, S, Q)
    used = actions >= 0
    safe_mask = np.where(used[..., None], masks, True)
    logp, probs = masked_log_softmax(logits, safe_mask)
    idx = np.where(used, actions, 0)
    chosen = np.take_along_axis(logp, idx[..., None], axis=-1)[..., 0]
    chosen = np.where(used, chosen, 0.0)
    logpi = chosen.sum(axis=1)

    plogp = np.where(safe_mask, probs * np.where(safe_mask, logp, 0.0), 0.0)
    slot_entropy = -plogp.sum(axis=-1)
    slot_entropy = np.where(used, slot_entropy, 0.0)
    entropy = slot_entropy.sum(axis=1)

    adv = returns - values if advantage is None else advantage
    actor = -float(np.sum(logpi * adv))
    critic = 0.5 * float(np.sum((returns - values) ** 2))
    ent = float(entropy.sum())
    total = actor + critic - entropy_coef * ent

    onehot = np.zeros_like(probs)
    np.put_along_axis(onehot, idx[..., None], 1.0, axis=-1)
    d_actor = -adv[:, None, None] * (onehot - probs)
    safe_logp = np.where(safe_mask, logp, 0.0)
    d_ent = entropy_coef * probs * (safe_logp + slot_entropy[..., None])
    dlogits = np.where(used[..., None] & safe_mask, d_actor + d_ent, 0.0).reshape(N, S * Q)
    dvalues = values - returns
    grads = model.backward(cache, dlogits, dvalues)
    return LossResult(actor, critic, ent, total, grads, values)


def clip_grad_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    norm = float(np.sqrt(sum(float((g ** 2).sum()) for g in grads.values())))
    if norm > max_norm > 0:
        scale = max_norm / (norm + 1e-12)
        for k in grads:
            grads[k] = grads[k] * scale
    return norm


class Adam:
    def __init__(self, lr: float = 3e-4, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        """Gradient descent step on `params` in place."""
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for k, g in grads.items():
            m = self.m.get(k)
            if m is None:
                m = self.m[k] = np.zeros_like(g)
                self.v[k] = np.zeros_like(g)
            v = self.v[k]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            mhat = m / (1 - b1 ** self.t)
            vhat = v / (1 - b2 ** self.t)
            params[k] -= self.lr * mhat / (np.sqrt(vhat) + self.eps)
