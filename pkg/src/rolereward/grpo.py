"""Group-relative policy optimization mathematics.

Evaluates group-standardized advantages, per-token importance ratios, a
non-negative per-token KL estimate against a frozen reference policy, and
the clipped surrogate objective over token log-probability arrays. Also
provides the categorical-policy (single-token) objective/gradient pair
used by the toy trainer, with a finite-difference validation harness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence

import numpy as np

__all__ = [
    "ResponseLogProbs",
    "GrpoConfig",
    "BanditBatchEntry",
    "group_advantages",
    "token_ratios",
    "kl_estimate",
    "grpo_objective",
    "log_softmax",
    "bandit_objective_and_gradient",
    "grpo_gradient_check",
]


@dataclass(frozen=True)
class ResponseLogProbs:
    """Per-token log-probabilities of one response under the current,
    behavior, and reference policies. All arrays share one length >= 1 and
    hold finite values <= 0."""

    logp_new: tuple[float, ...]
    logp_old: tuple[float, ...]
    logp_ref: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "logp_new", tuple(self.logp_new))
        object.__setattr__(self, "logp_old", tuple(self.logp_old))
        object.__setattr__(self, "logp_ref", tuple(self.logp_ref))
        lengths = {len(self.logp_new), len(self.logp_old), len(self.logp_ref)}
        if len(lengths) != 1 or len(self.logp_new) < 1:
            raise ValueError("log-prob arrays must share one length >= 1")
        for array in (self.logp_new, self.logp_old, self.logp_ref):
            for value in array:
                if not math.isfinite(value) or value > 0.0:
                    raise ValueError("log-probabilities must be finite and <= 0")

    def __len__(self) -> int:
        return len(self.logp_new)


@dataclass(frozen=True)
class GrpoConfig:
    """Clip width, KL coefficient, advantage epsilon and sampling group size."""

    clip_epsilon: float = 0.2
    kl_beta: float = 0.02
    adv_epsilon: float = 1e-4
    grpo_group_size: int = 4

    def __post_init__(self) -> None:
        if not 0.0 < self.clip_epsilon < 1.0:
            raise ValueError("clip_epsilon must be in (0, 1)")
        if not (math.isfinite(self.kl_beta) and self.kl_beta >= 0.0):
            raise ValueError("kl_beta must be finite and >= 0")
        if not self.adv_epsilon > 0.0:
            raise ValueError("adv_epsilon must be > 0")
        if self.grpo_group_size < 2:
            raise ValueError("grpo_group_size must be >= 2")


def group_advantages(rewards: Sequence[float], adv_epsilon: float) -> list[float]:
    """Standardize rewards within one sampled group.

    A_i = (R_i - mean) / (population std + adv_epsilon); every token of a
    response shares its response's scalar advantage.
    """
    if len(rewards) < 2:
        raise ValueError("a group needs at least 2 rewards")
    mean = sum(rewards) / len(rewards)
    variance = sum((r - mean) ** 2 for r in rewards) / len(rewards)
    std = math.sqrt(variance)
    return [(r - mean) / (std + adv_epsilon) for r in rewards]


def token_ratios(lp: ResponseLogProbs) -> list[float]:
    """Per-token importance ratios exp(logp_new - logp_old)."""
    return [math.exp(n - o) for n, o in zip(lp.logp_new, lp.logp_old)]


def _kl_term(logp_new: float, logp_ref: float) -> float:
    # k3 estimator: u - ln(u) - 1 with u = p_ref/p_new; expm1 keeps the
    # value non-negative under floating point for u near 1.
    s = logp_ref - logp_new
    return math.expm1(s) - s


def kl_estimate(lp: ResponseLogProbs) -> list[float]:
    """Per-token non-negative KL estimate of the policy against the
    reference: u - ln(u) - 1 with u = exp(logp_ref - logp_new)."""
    return [_kl_term(n, r) for n, r in zip(lp.logp_new, lp.logp_ref)]


def grpo_objective(
    group: Sequence[ResponseLogProbs],
    advantages: Sequence[float],
    config: GrpoConfig,
) -> float:
    """Clipped surrogate objective for one group of responses.

    (1/G) sum_i (1/|y_i|) sum_t [min(r A_i, clip(r, 1-eps, 1+eps) A_i)
    - beta * kl_t]; pure evaluation, no update.
    """
    if len(group) != len(advantages):
        raise ValueError("group and advantages must have equal length")
    if not group:
        raise ValueError("group must be non-empty")
    low = 1.0 - config.clip_epsilon
    high = 1.0 + config.clip_epsilon
    total = 0.0
    for lp, advantage in zip(group, advantages):
        acc = 0.0
        for t in range(len(lp)):
            ratio = math.exp(lp.logp_new[t] - lp.logp_old[t])
            clipped = min(max(ratio, low), high)
            acc += min(ratio * advantage, clipped * advantage)
            acc -= config.kl_beta * _kl_term(lp.logp_new[t], lp.logp_ref[t])
        total += acc / len(lp)
    return total / len(group)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable log-softmax over a 1-D logit vector."""
    logits = np.asarray(logits, dtype=float)
    shifted = logits - logits.max()
    return shifted - np.log(np.exp(shifted).sum())


@dataclass(frozen=True, eq=False)
class BanditBatchEntry:
    """One prompt's sampled group for a categorical (single-token) policy:
    the frozen behavior/reference logits, the sampled candidate indices and
    their scalar advantages."""

    prompt_id: str
    old_logits: np.ndarray
    ref_logits: np.ndarray
    candidate_indices: tuple[int, ...]
    advantages: tuple[float, ...]


def bandit_objective_and_gradient(
    new_logits: np.ndarray,
    entry: BanditBatchEntry,
    config: GrpoConfig,
) -> tuple[float, np.ndarray]:
    """Objective value and its exact gradient w.r.t. the new logits for one
    prompt's sampled group (each candidate counts as a one-token response).

    Advantages and the behavior/reference policies are constants of the
    optimization step.
    """
    if len(entry.candidate_indices) != len(entry.advantages):
        raise ValueError("candidate_indices and advantages must align")
    logp_new = log_softmax(new_logits)
    probs_new = np.exp(logp_new)
    logp_old = log_softmax(entry.old_logits)
    logp_ref = log_softmax(entry.ref_logits)

    low = 1.0 - config.clip_epsilon
    high = 1.0 + config.clip_epsilon
    group_size = len(entry.candidate_indices)

    objective = 0.0
    gradient = np.zeros_like(probs_new)
    for candidate, advantage in zip(entry.candidate_indices, entry.advantages):
        ratio = math.exp(logp_new[candidate] - logp_old[candidate])
        clipped = min(max(ratio, low), high)
        unclipped_term = ratio * advantage
        clipped_term = clipped * advantage
        objective += min(unclipped_term, clipped_term)

        u = math.exp(logp_ref[candidate] - logp_new[candidate])
        objective -= config.kl_beta * _kl_term(logp_new[candidate], logp_ref[candidate])

        # d(term)/d logp_new: advantage*ratio on the unclipped branch, 0 on
        # the clipped one; the KL part contributes beta*(u - 1).
        coefficient = config.kl_beta * (u - 1.0)
        if unclipped_term <= clipped_term:
            coefficient += advantage * ratio
        one_hot = np.zeros_like(probs_new)
        one_hot[candidate] = 1.0
        gradient += coefficient * (one_hot - probs_new)

    return objective / group_size, gradient / group_size


class _LogitPolicy(Protocol):
    logits: Mapping[str, np.ndarray]


def _batch_objective(
    logits_by_prompt: Mapping[str, np.ndarray],
    batch: Sequence[BanditBatchEntry],
    config: GrpoConfig,
) -> float:
    total = 0.0
    for entry in batch:
        value, _ = bandit_objective_and_gradient(
            logits_by_prompt[entry.prompt_id], entry, config
        )
        total += value
    return total / len(batch)


def grpo_gradient_check(
    policy: _LogitPolicy,
    batch: Sequence[BanditBatchEntry],
    config: GrpoConfig,
    step: float = 1e-5,
) -> float:
    """Max absolute deviation between the analytic batch gradient and
    central finite differences of the objective over every logit."""
    if not batch:
        raise ValueError("batch must be non-empty")
    logits = {pid: np.array(values, dtype=float) for pid, values in policy.logits.items()}

    analytic: dict[str, np.ndarray] = {
        pid: np.zeros_like(values) for pid, values in logits.items()
    }
    for entry in batch:
        _, gradient = bandit_objective_and_gradient(
            logits[entry.prompt_id], entry, config
        )
        analytic[entry.prompt_id] += gradient / len(batch)

    worst = 0.0
    for pid, values in logits.items():
        for index in range(values.shape[0]):
            original = values[index]
            values[index] = original + step
            upper = _batch_objective(logits, batch, config)
            values[index] = original - step
            lower = _batch_objective(logits, batch, config)
            values[index] = original
            numeric = (upper - lower) / (2.0 * step)
            worst = max(worst, abs(numeric - analytic[pid][index]))
    return worst
