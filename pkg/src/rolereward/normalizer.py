"""Group-conditioned reward normalization.

Per (role group, reward type) running mean/variance with exponential
moving average updates, standardization, weighted aggregation to the
scalar training reward, and JSON snapshot persistence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

from .rewards import RewardVector

__all__ = [
    "REWARD_TYPES",
    "RunningStat",
    "NormalizerState",
    "NormalizedRewards",
    "WeightVector",
    "DEFAULT_WEIGHTS",
    "DEFAULT_DECAY",
    "DEFAULT_NORM_EPSILON",
    "aggregate",
    "snapshot",
    "restore",
    "SnapshotError",
    "VersionError",
]

REWARD_TYPES = ("focus", "focus_attr", "ref")
SNAPSHOT_VERSION = 1
DEFAULT_DECAY = 0.99
DEFAULT_NORM_EPSILON = 1e-8


class SnapshotError(ValueError):
    """Malformed snapshot document."""


class VersionError(SnapshotError):
    """Snapshot document version is not supported."""


@dataclass
class RunningStat:
    """EMA mean/variance for one (group, reward type) cell.

    Before the first update the stat is the identity bootstrap
    (mean 0, var 1) so normalization is a no-op from step one.
    """

    mean: float = 0.0
    var: float = 1.0
    count: int = 0

    def update(self, value: float, decay: float) -> None:
        mean_old = self.mean
        self.mean = decay * mean_old + (1.0 - decay) * value
        self.var = decay * self.var + (1.0 - decay) * (value - mean_old) ** 2
        self.count += 1

    def normalize(self, value: float, epsilon: float) -> float:
        return (value - self.mean) / math.sqrt(self.var + epsilon)


@dataclass(frozen=True)
class NormalizedRewards:
    """Standardized reward components; format_valid passes through."""

    focus: float
    focus_attr: float
    ref: float
    format_valid: bool


@dataclass(frozen=True)
class WeightVector:
    """Non-negative aggregation weights for the scalar reward."""

    w_focus: float
    w_attr: float
    w_ref: float

    def __post_init__(self) -> None:
        for value in (self.w_focus, self.w_attr, self.w_ref):
            if not math.isfinite(value) or value < 0:
                raise ValueError("weights must be finite and non-negative")


DEFAULT_WEIGHTS = WeightVector(w_focus=0.4, w_attr=0.2, w_ref=0.2)


class NormalizerState:
    """Map of (group index, reward type) -> RunningStat.

    normalize() is a pure read; update() is the only mutator and requires
    exclusive access (the scoring service serializes updates through a
    single writer). Stats are created lazily at the identity bootstrap.
    num_groups, when given, bounds the accepted group indices; it is not
    persisted in snapshots.
    """

    def __init__(
        self,
        epsilon: float = DEFAULT_NORM_EPSILON,
        decay: float = DEFAULT_DECAY,
        num_groups: int | None = None,
    ) -> None:
        if not epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if not 0.0 < decay < 1.0:
            raise ValueError("decay must be in (0, 1)")
        self.epsilon = epsilon
        self.decay = decay
        self.num_groups = num_groups
        self.version = SNAPSHOT_VERSION
        self.stats: dict[tuple[int, str], RunningStat] = {}

    def _check_group(self, group: int) -> None:
        if not isinstance(group, int) or isinstance(group, bool) or group < 0:
            raise ValueError(f"unknown group index: {group!r}")
        if self.num_groups is not None and group >= self.num_groups:
            raise ValueError(
                f"unknown group index: {group} (have {self.num_groups} groups)"
            )

    def _stat(self, group: int, kind: str) -> RunningStat:
        key = (group, kind)
        stat = self.stats.get(key)
        if stat is None:
            stat = RunningStat()
            self.stats[key] = stat
        return stat

    def update(self, group: int, rewards: RewardVector) -> "NormalizerState":
        """Fold one reward vector into the group's statistics. Gated zero
        vectors update too: the gate is part of the reward distribution."""
        self._check_group(group)
        for kind, value in zip(REWARD_TYPES, (rewards.focus, rewards.focus_attr, rewards.ref)):
            self._stat(group, kind).update(value, self.decay)
        return self

    def normalize(self, group: int, rewards: RewardVector) -> NormalizedRewards:
        """Standardize each component against the group's running stats."""
        self._check_group(group)
        values = []
        for kind, value in zip(REWARD_TYPES, (rewards.focus, rewards.focus_attr, rewards.ref)):
            stat = self.stats.get((group, kind))
            if stat is None:
                stat = RunningStat()
            values.append(stat.normalize(value, self.epsilon))
        return NormalizedRewards(values[0], values[1], values[2], rewards.format_valid)


def aggregate(normalized: NormalizedRewards, weights: WeightVector = DEFAULT_WEIGHTS) -> float:
    """Weighted sum of the normalized components: the scalar training reward."""
    return (
        weights.w_focus * normalized.focus
        + weights.w_attr * normalized.focus_attr
        + weights.w_ref * normalized.ref
    )


def snapshot(state: NormalizerState) -> dict[str, Any]:
    """Serialize the state to a plain JSON-ready document; stats rows are
    ordered by (group, reward type) so equal states give equal bytes."""
    type_order = {kind: index for index, kind in enumerate(REWARD_TYPES)}
    rows = []
    for (group, kind), stat in sorted(
        state.stats.items(), key=lambda item: (item[0][0], type_order[item[0][1]])
    ):
        rows.append(
            {
                "group": group,
                "reward": kind,
                "mean": stat.mean,
                "var": stat.var,
                "count": stat.count,
            }
        )
    return {
        "version": SNAPSHOT_VERSION,
        "epsilon": state.epsilon,
        "decay": state.decay,
        "stats": rows,
    }


def restore(document: dict[str, Any]) -> NormalizerState:
    """Rebuild a state from a snapshot document, bit-exactly.

    Raises VersionError on an unsupported version and SnapshotError on a
    malformed document.
    """
    if not isinstance(document, dict):
        raise SnapshotError("snapshot document must be a JSON object")
    version = document.get("version")
    if version != SNAPSHOT_VERSION:
        raise VersionError(f"unsupported snapshot version: {version!r}")
    try:
        state = NormalizerState(
            epsilon=float(document["epsilon"]), decay=float(document["decay"])
        )
        for row in document["stats"]:
            group = row["group"]
            kind = row["reward"]
            if kind not in REWARD_TYPES:
                raise SnapshotError(f"unknown reward type: {kind!r}")
            if not isinstance(group, int) or group < 0:
                raise SnapshotError(f"invalid group index: {group!r}")
            state.stats[(group, kind)] = RunningStat(
                mean=float(row["mean"]), var=float(row["var"]), count=int(row["count"])
            )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SnapshotError):
            raise
        raise SnapshotError(f"malformed snapshot document: {exc}") from exc
    return state
