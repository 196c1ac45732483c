"""Group Relative Policy Optimization numerics with outcome supervision.

For a group of ``n`` sampled outputs with scalar rewards ``r_g``::

    A_g      = (r_g - mean(r)) / max(std(r), std_floor)          # population std
    ratio    = exp(logp_new - logp_old)                           # per token
    surr     = min(ratio * A_g, clip(ratio, 1 - eps, 1 + eps) * A_g)
    kl       = exp(logp_ref - logp_new) - (logp_ref - logp_new) - 1
    loss     = -sum_g 1/|o_g| sum_k (surr - beta * kl)

Every token of output ``g`` shares the advantage ``A_g``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class GroupTooSmall(ValueError):
    """A group needs at least two outputs for a relative advantage."""


@dataclass(frozen=True)
class GrpoConfig:
    clip_eps: float = 0.2
    kl_beta: float = 0.04
    std_floor: float = 1e-8
    mean_over_group: bool = False

    def __post_init__(self):
        if not 0 < self.clip_eps < 1:
            raise ValueError(f"clip_eps must be in (0, 1), got {self.clip_eps!r}")
        if not self.kl_beta >= 0:
            raise ValueError(f"kl_beta must be >= 0, got {self.kl_beta!r}")
        if not self.std_floor > 0:
            raise ValueError(f"std_floor must be > 0, got {self.std_floor!r}")


@dataclass
class RolloutGroup:
    """``n`` sampled outputs with aligned per-token log-probabilities and one reward each."""

    outputs: Sequence[Sequence[int]]
    logp_old: Sequence[np.ndarray]
    logp_new: Sequence[np.ndarray]
    logp_ref: Sequence[np.ndarray]
    rewards: np.ndarray

    def __post_init__(self):
        n = len(self.outputs)
        if n < 2:
            raise GroupTooSmall(f"group size must be >= 2, got {n}")
        self.rewards = np.asarray(self.rewards, dtype=float)
        if self.rewards.shape != (n,):
            raise ValueError(f"expected {n} rewards, got shape {self.rewards.shape}")
        lengths = [len(o) for o in self.outputs]
        if min(lengths) == 0:
            raise ValueError("outputs must contain at least one token")
        for name in ("logp_old", "logp_new", "logp_ref"):
            seqs = [np.asarray(s, dtype=float) for s in getattr(self, name)]
            if len(seqs) != n:
                raise ValueError(f"{name} has {len(seqs)} sequences for {n} outputs")
            for g, lp in enumerate(seqs):
                if lp.shape != (lengths[g],):
                    raise ValueError(f"{name}[{g}] has {lp.size} entries for {lengths[g]} tokens")
            flat = np.concatenate(seqs)
            if not (np.all(flat <= 0) and np.all(np.isfinite(flat))):
                raise ValueError(f"{name} must be finite and <= 0")
            setattr(self, name, seqs)

    @property
    def size(self) -> int:
        return len(self.outputs)


def group_advantages(rewards, std_floor: float = 1e-8) -> np.ndarray:
    """Intra-group reward normalization: ``(r - mean) / max(population std, std_floor)``."""
    r = np.asarray(rewards, dtype=float)
    if r.ndim != 1 or r.size < 2:
        raise GroupTooSmall(f"group size must be >= 2, got {r.size}")
    if r.max() == r.min():
        return np.zeros_like(r)
    centered = r - r.mean()
    return centered / max(float(np.sqrt(np.mean(centered**2))), std_floor)


def token_ratio(logp_new, logp_old):
    return np.exp(np.subtract(logp_new, logp_old))


def clipped_term(ratio, advantage, clip_eps: float):
    """``min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A)``, elementwise."""
    ratio = np.asarray(ratio, dtype=float)
    return np.minimum(ratio * advantage, np.clip(ratio, 1 - clip_eps, 1 + clip_eps) * advantage)


def kl_penalty(logp_new, logp_ref):
    """Nonnegative per-token KL estimate ``exp(d) - d - 1`` with ``d = logp_ref - logp_new``."""
    d = np.subtract(logp_ref, logp_new)
    return np.expm1(d) - d


@dataclass(frozen=True)
class LossStats:
    loss: float
    kl: float  # token-averaged KL estimate over the group
    clip_fraction: float  # share of tokens whose clipped branch is active
    token_grads: list  # dloss/dlogp_new, one array per output


def grpo_loss_and_grads(group: RolloutGroup, cfg: GrpoConfig) -> LossStats:
    """Loss plus its gradient with respect to every ``logp_new`` entry.

    Where the clipped branch is selected the surrogate is flat in
    ``logp_new``; at the tie ``ratio * A == clip(ratio) * A`` the unclipped
    branch's derivative is used.
    """
    adv = group_advantages(group.rewards, cfg.std_floor)
    scale = 1.0 / group.size if cfg.mean_over_group else 1.0
    lengths = np.array([len(o) for o in group.outputs])
    new = np.concatenate(group.logp_new)
    old = np.concatenate(group.logp_old)
    ref = np.concatenate(group.logp_ref)
    a = np.repeat(adv, lengths)
    inv_len = np.repeat(1.0 / lengths, lengths)
    starts = np.concatenate(([0], np.cumsum(lengths)[:-1]))

    ratio = token_ratio(new, old)
    unclipped = ratio * a
    surr = clipped_term(ratio, a, cfg.clip_eps)
    kl = kl_penalty(new, ref)
    per_output = np.add.reduceat(surr - cfg.kl_beta * kl, starts) / lengths

    active = unclipped > surr
    dsurr = np.where(active, 0.0, unclipped)
    dkl = -np.expm1(ref - new)  # d/dlogp_new of exp(d) - d - 1
    flat_grads = -scale * (dsurr - cfg.kl_beta * dkl) * inv_len
    return LossStats(
        loss=-scale * math.fsum(per_output),
        kl=float(kl.sum()) / len(kl),
        clip_fraction=int(np.count_nonzero(active)) / len(kl),
        token_grads=np.split(flat_grads, starts[1:]),
    )


def grpo_loss(group: RolloutGroup, cfg: GrpoConfig | None = None) -> float:
    """GRPO objective for one group (negated, so lower is better)."""
    return grpo_loss_and_grads(group, cfg or GrpoConfig()).loss
