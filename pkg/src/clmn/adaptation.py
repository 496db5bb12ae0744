"""Contrastive stance-alignment losses and the cross-language pair sampler."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import tensor as T
from .errors import ConfigError, ShapeError
from .tensor import Tensor

POLICIES = ("uniform", "balanced", "exhaustive")
COVERS = ("target", "both")


class CrossPair(NamedTuple):
    source: int
    target: int
    same: int  # 1 iff the two stance labels are equal


@dataclass(frozen=True)
class AdaptationConfig:
    alpha: float = 0.7
    margin: float = 1.0
    policy: str = "balanced"
    cover: str = "target"
    seed: int = 0

    def __post_init__(self):
        check_alpha(self.alpha)
        if not self.margin > 0:
            raise ConfigError(f"margin must be > 0, got {self.margin}")
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown pairing policy {self.policy!r}; choose from {POLICIES}")
        if self.cover not in COVERS:
            raise ConfigError(f"unknown pair cover {self.cover!r}; choose from {COVERS}")


def check_alpha(alpha: float) -> None:
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must lie in [0, 1], got {alpha}")


def _sq_dist(r_s, r_t) -> Tensor:
    r_s, r_t = T.as_tensor(r_s), T.as_tensor(r_t)
    if r_s.shape != r_t.shape:
        raise ShapeError(f"representation shapes differ: {r_s.shape} vs {r_t.shape}")
    return T.squared_distance(r_s, r_t, axis=-1)


def sea_loss(r_s, r_t, same) -> Tensor:
    """Squared Euclidean distance for same-label pairs, 0 otherwise (per pair)."""
    return _sq_dist(r_s, r_t) * np.asarray(same, dtype=np.float64)


def ssa_loss(r_s, r_t, same, margin: float) -> Tensor:
    """Hinge max(0, margin - squared distance) for different-label pairs, 0 otherwise."""
    if not margin > 0:
        raise ConfigError(f"margin must be > 0, got {margin}")
    diff = 1.0 - np.asarray(same, dtype=np.float64)
    return T.relu(margin - _sq_dist(r_s, r_t)) * diff


def csa_loss(r_s, r_t, same, margin: float) -> Tensor:
    return sea_loss(r_s, r_t, same) + ssa_loss(r_s, r_t, same, margin)


def total_loss(l_ca, l_csa, alpha: float):
    """(1 - alpha) * classification + alpha * alignment; works on floats or tensors."""
    check_alpha(alpha)
    return (1.0 - alpha) * l_ca + alpha * l_csa


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _pick(rng, labels: np.ndarray, anchor: int, policy: str) -> int:
    if policy == "uniform":
        return int(rng.integers(len(labels)))
    same = np.flatnonzero(labels == anchor)
    other = np.flatnonzero(labels != anchor)
    want_same = rng.random() < 0.5
    pool = same if (want_same and len(same)) or not len(other) else other
    return int(pool[rng.integers(len(pool))])


def sample_pairs(source_labels: Sequence[int], target_labels: Sequence[int], policy: str = "balanced",
                 seed=0, cover: str = "target") -> list[CrossPair]:
    """One epoch of cross-language pairs.

    ``cover="target"`` pairs every target example with one sampled source example;
    ``cover="both"`` additionally pairs every source example with a sampled target.
    ``balanced`` draws a same-label partner with probability 0.5 and a different-label
    partner otherwise; ``exhaustive`` emits every (source, target) combination.
    """
    s = np.asarray([int(x) for x in source_labels], dtype=np.int64)
    t = np.asarray([int(x) for x in target_labels], dtype=np.int64)
    if len(s) == 0 or len(t) == 0:
        raise ConfigError("pair sampling needs non-empty source and target sets")
    if policy not in POLICIES:
        raise ConfigError(f"unknown pairing policy {policy!r}")
    if cover not in COVERS:
        raise ConfigError(f"unknown pair cover {cover!r}")
    rng = _rng(seed)
    pairs: list[CrossPair] = []
    if policy == "exhaustive":
        for i in range(len(s)):
            for j in range(len(t)):
                pairs.append(CrossPair(i, j, int(s[i] == t[j])))
        order = rng.permutation(len(pairs))
        return [pairs[k] for k in order]
    for j in rng.permutation(len(t)):
        i = _pick(rng, s, t[j], policy)
        pairs.append(CrossPair(i, int(j), int(s[i] == t[j])))
    if cover == "both":
        for i in rng.permutation(len(s)):
            j = _pick(rng, t, s[i], policy)
            pairs.append(CrossPair(int(i), j, int(s[i] == t[j])))
        order = rng.permutation(len(pairs))
        pairs = [pairs[k] for k in order]
    return pairs
