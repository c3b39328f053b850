"""Desk-scale training demonstration.

A categorical softmax policy picks from a fixed pool of candidate
trajectories per prompt. Each step samples a group per prompt from the
frozen behavior policy, scores the samples through the full reward
pipeline (parse -> score -> normalize -> aggregate), standardizes the
scalars into advantages and ascends the clipped surrogate objective with
its analytic gradient. Deterministic given the task seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .grpo import (
    BanditBatchEntry,
    GrpoConfig,
    bandit_objective_and_gradient,
    group_advantages,
)
from .normalizer import NormalizerState, WeightVector, aggregate
from .rewards import (
    DEFAULT_REF_CONFIG,
    GoldAnnotation,
    RefRewardConfig,
    RewardVector,
    score_trajectory,
)
from .trajectory import FocusDimension, build_trajectory, render_trajectory

__all__ = [
    "ToyPrompt",
    "ToyTask",
    "ToyCategoricalPolicy",
    "TrainingRecord",
    "TrainingLog",
    "TOY_GRPO_CONFIG",
    "run_training",
    "emit_curves",
    "default_task",
    "task_to_dict",
    "task_from_dict",
    "load_task",
    "save_task",
]

# Fixture config for the built-in task. adv_epsilon is far above the
# production default: groups of 4 give noisy std estimates, and the damping
# both stabilizes the updates and spreads the reward rise over enough steps
# to read the curve shape.
TOY_GRPO_CONFIG = GrpoConfig(
    clip_epsilon=0.2, kl_beta=0.02, adv_epsilon=0.3, grpo_group_size=4
)


@dataclass(frozen=True)
class ToyPrompt:
    prompt_id: str
    character_id: str
    gold: GoldAnnotation


@dataclass(frozen=True)
class ToyTask:
    """Prompts with gold annotations and a fixed candidate pool per prompt."""

    prompts: tuple[ToyPrompt, ...]
    candidate_pool: dict[str, tuple[str, ...]]
    seed: int = 0

    def __post_init__(self) -> None:
        for prompt in self.prompts:
            if prompt.prompt_id not in self.candidate_pool:
                raise ValueError(f"no candidate pool for prompt {prompt.prompt_id!r}")
            if not self.candidate_pool[prompt.prompt_id]:
                raise ValueError(f"empty candidate pool for {prompt.prompt_id!r}")


class ToyCategoricalPolicy:
    """Softmax policy over each prompt's candidate pool."""

    def __init__(self, logits: dict[str, np.ndarray]) -> None:
        self.logits = {pid: np.array(v, dtype=float) for pid, v in logits.items()}

    @classmethod
    def uniform(cls, task: ToyTask) -> "ToyCategoricalPolicy":
        return cls(
            {
                prompt.prompt_id: np.zeros(len(task.candidate_pool[prompt.prompt_id]))
                for prompt in task.prompts
            }
        )

    def probs(self, prompt_id: str) -> np.ndarray:
        logits = self.logits[prompt_id]
        shifted = np.exp(logits - logits.max())
        return shifted / shifted.sum()

    def copy(self) -> "ToyCategoricalPolicy":
        return ToyCategoricalPolicy(self.logits)


@dataclass(frozen=True)
class TrainingRecord:
    """Per-step means over all sampled responses. Reward columns are raw
    (bounded) components and their weighted sum; the scalar fed to the
    advantage computation is the normalized one."""

    step: int
    r_focus: float
    r_attr: float
    r_ref: float
    r_scalar: float
    objective: float


@dataclass
class TrainingLog:
    records: list[TrainingRecord] = field(default_factory=list)
    final_logits: dict[str, list[float]] = field(default_factory=dict)


def _precompute_rewards(
    task: ToyTask, ref_config: RefRewardConfig
) -> dict[str, list[RewardVector]]:
    """Rewards per (prompt, candidate) are pure, so score each candidate
    once up front. Also enforces the pool invariant: every pool needs at
    least one focus hit and one focus miss."""
    table: dict[str, list[RewardVector]] = {}
    for prompt in task.prompts:
        vectors = [
            score_trajectory(candidate, prompt.gold, ref_config)
            for candidate in task.candidate_pool[prompt.prompt_id]
        ]
        if not any(v.focus == 1.0 for v in vectors):
            raise ValueError(f"pool for {prompt.prompt_id!r} has no focus=1 candidate")
        if not any(v.focus == 0.0 for v in vectors):
            raise ValueError(f"pool for {prompt.prompt_id!r} has no focus=0 candidate")
        table[prompt.prompt_id] = vectors
    return table


def character_groups(task: ToyTask) -> dict[str, int]:
    """Deterministic groups-of-one mapping: sorted character ids."""
    return {cid: i for i, cid in enumerate(sorted({p.character_id for p in task.prompts}))}


def run_training(
    task: ToyTask,
    config: GrpoConfig,
    norm: NormalizerState,
    weights: WeightVector,
    steps: int,
    lr: float,
    ref_config: RefRewardConfig = DEFAULT_REF_CONFIG,
) -> TrainingLog:
    """Train the categorical policy for the given number of steps.

    Per step and prompt: sample grpo_group_size candidates from the
    frozen behavior policy, fold each raw reward vector into the
    normalizer, standardize and aggregate to the scalar training reward,
    compute group advantages, then ascend each prompt's logits along the
    analytic objective gradient. The behavior policy refreshes every step;
    the reference policy stays frozen at initialization.
    """
    for prompt in task.prompts:
        if config.grpo_group_size > len(task.candidate_pool[prompt.prompt_id]):
            raise ValueError("grpo_group_size exceeds candidate pool size")
    rewards = _precompute_rewards(task, ref_config)
    groups = character_groups(task)
    rng = np.random.default_rng(task.seed)

    policy = ToyCategoricalPolicy.uniform(task)
    ref_logits = {pid: v.copy() for pid, v in policy.logits.items()}

    log = TrainingLog()
    for step in range(1, steps + 1):
        old_logits = {pid: v.copy() for pid, v in policy.logits.items()}
        raw_sums = np.zeros(4)  # focus, attr, ref, weighted raw scalar
        sample_count = 0
        objective_sum = 0.0

        for prompt in task.prompts:
            pid = prompt.prompt_id
            pool_size = len(task.candidate_pool[pid])
            probs_old = _softmax(old_logits[pid])
            indices = rng.choice(
                pool_size, size=config.grpo_group_size, replace=True, p=probs_old
            )

            scalars = []
            group = groups[prompt.character_id]
            for index in indices:
                raw = rewards[pid][int(index)]
                norm.update(group, raw)
                normalized = norm.normalize(group, raw)
                scalars.append(aggregate(normalized, weights))
                raw_sums += (
                    raw.focus,
                    raw.focus_attr,
                    raw.ref,
                    weights.w_focus * raw.focus
                    + weights.w_attr * raw.focus_attr
                    + weights.w_ref * raw.ref,
                )
                sample_count += 1

            advantages = group_advantages(scalars, config.adv_epsilon)
            entry = BanditBatchEntry(
                prompt_id=pid,
                old_logits=old_logits[pid],
                ref_logits=ref_logits[pid],
                candidate_indices=tuple(int(i) for i in indices),
                advantages=tuple(advantages),
            )
            objective, gradient = bandit_objective_and_gradient(
                policy.logits[pid], entry, config
            )
            objective_sum += objective
            policy.logits[pid] = policy.logits[pid] + lr * gradient

        means = raw_sums / sample_count
        log.records.append(
            TrainingRecord(
                step=step,
                r_focus=float(means[0]),
                r_attr=float(means[1]),
                r_ref=float(means[2]),
                r_scalar=float(means[3]),
                objective=objective_sum / len(task.prompts),
            )
        )

    log.final_logits = {pid: v.tolist() for pid, v in policy.logits.items()}
    return log


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = np.exp(logits - logits.max())
    return shifted / shifted.sum()


CURVES_HEADER = "step,r_focus,r_attr,r_ref,r_scalar,objective"


def emit_curves(log: TrainingLog, path: str | Path) -> None:
    """Write the per-step curves as CSV, 6 significant digits."""
    lines = [CURVES_HEADER]
    for record in log.records:
        lines.append(
            f"{record.step},{record.r_focus:.6g},{record.r_attr:.6g},"
            f"{record.r_ref:.6g},{record.r_scalar:.6g},{record.objective:.6g}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


# --- default task fixture ---------------------------------------------------

_CHARACTERS: Sequence[tuple[str, str]] = (
    ("lighthouse_keeper", "A weathered lighthouse keeper who speaks in short, salt-worn sentences and never leaves the coast."),
    ("street_botanist", "An exuberant street botanist cataloguing rooftop gardens, always naming plants in passing."),
    ("retired_detective", "A retired detective, dry and precise, who treats every question as a small case to close."),
    ("clockwork_librarian", "A clockwork librarian that hums while indexing, fiercely protective of quiet hours."),
)

_PROMPT_SPECS: Sequence[tuple[str, int, tuple[tuple[FocusDimension, str], ...], str]] = (
    ("p00", 0, ((FocusDimension.KNOWLEDGE, "storm lamp maintenance"),),
     "The lamp takes whale oil at dusk and a steady hand after midnight."),
    ("p01", 0, ((FocusDimension.MEMORY, "the winter the ferry sank"),),
     "I remember the ferry going down in winter and the lights we kept burning."),
    ("p02", 0, ((FocusDimension.STYLE, "short salt-worn sentences"),),
     "Short answer. Wind is rising. Bring the rope."),
    ("p03", 1, ((FocusDimension.KNOWLEDGE, "rooftop fern species"),),
     "That rooftop holds nine fern species and the rarest one hides by the cistern."),
    ("p04", 1, ((FocusDimension.ENGAGEMENT, "invite the visitor to the garden"),),
     "Come up to the garden tomorrow and I will show you the seedlings myself."),
    ("p05", 1, ((FocusDimension.EMOTION, "delight at a new cutting"),),
     "A new cutting today, what a delight, the whole balcony smells of mint."),
    ("p06", 2, ((FocusDimension.KNOWLEDGE, "the unsolved harbor case"),),
     "The harbor case stayed open because the ledger page was torn, not lost."),
    ("p07", 2, ((FocusDimension.EMPATHETIC, "reassure the nervous witness"),),
     "You are safe here, take your time, and tell me only what you saw."),
    ("p08", 2, ((FocusDimension.WORLDVIEW, "trust evidence over rumor"),),
     "Rumor is cheap; evidence pays the rent, so we follow the receipts."),
    ("p09", 3, ((FocusDimension.SAFETY, "decline to reveal patron records"),),
     "Patron records stay sealed; I can offer the public catalogue instead."),
    ("p10", 3, ((FocusDimension.HUMAN_LIKE, "hum softly between sentences"),),
     "Mm-hm, the reading room opens at nine, hm, and the lamps warm up slowly."),
    ("p11", 3, ((FocusDimension.EXTENSION, "the misfiled atlas incident"),),
     "The atlas was misfiled under weather, which is how the flood maps survived."),
)

_WRONG_DIMENSIONS = (
    FocusDimension.SAFETY,
    FocusDimension.ENGAGEMENT,
    FocusDimension.STYLE,
    FocusDimension.EMOTION,
)


def _near_reference(reference: str) -> str:
    words = reference.split()
    kept = words[: max(2, len(words) // 2)]
    return " ".join(kept) + " though everything else drifts elsewhere tonight."


def _mid_reference(reference: str) -> str:
    words = reference.split()
    kept = words[: max(2, len(words) // 3)]
    return " ".join(kept) + " yet nobody recalls why, frankly speaking, ever."


def _off_reference() -> str:
    return "Ask again some other century, perhaps?"


def default_task(seed: int = 7) -> ToyTask:
    """The built-in 12-prompt task: per pool one fully-correct candidate,
    six flawed-but-parseable ones, and one malformed trace."""
    prompts: list[ToyPrompt] = []
    pools: dict[str, tuple[str, ...]] = {}
    for pid, char_index, gold_foci, reference in _PROMPT_SPECS:
        character_id = _CHARACTERS[char_index][0]
        gold = GoldAnnotation(
            character_id=character_id,
            gold_foci=frozenset(dim for dim, _ in gold_foci),
            gold_attrs={dim: attr for dim, attr in gold_foci},
            reference_response=reference,
        )
        prompts.append(ToyPrompt(pid, character_id, gold))

        think = f"What does this moment ask of {character_id.replace('_', ' ')}?"
        wrong_dim = _WRONG_DIMENSIONS[char_index]
        other_dim = _WRONG_DIMENSIONS[(char_index + 1) % len(_WRONG_DIMENSIONS)]
        correct = render_trajectory(
            build_trajectory(think, list(gold_foci), reference)
        )
        wrong_focus_mid = render_trajectory(
            build_trajectory(
                think,
                [(wrong_dim, "a plausible but misplaced concern")],
                _mid_reference(reference),
            )
        )
        no_focus_short = render_trajectory(
            build_trajectory(think, [], "It is hard to say.")
        )
        wrong_focus_off = render_trajectory(
            build_trajectory(
                think,
                [(wrong_dim, "entirely the wrong thread")],
                _off_reference(),
            )
        )
        two_wrong = render_trajectory(
            build_trajectory(
                think,
                [(wrong_dim, "first stray thought"), (other_dim, "second stray thought")],
                "Two threads tangle; neither answers you.",
            )
        )
        malformed = f"<think>{think} <focus>{wrong_dim.value}</focus>"
        no_focus_near = render_trajectory(
            build_trajectory(think, [], _near_reference(reference))
        )
        wrong_focus_tiny = render_trajectory(
            build_trajectory(think, [(other_dim, "a shrug")], "Hmm.")
        )
        pools[pid] = (
            correct,
            wrong_focus_mid,
            no_focus_short,
            wrong_focus_off,
            two_wrong,
            malformed,
            no_focus_near,
            wrong_focus_tiny,
        )
    return ToyTask(prompts=tuple(prompts), candidate_pool=pools, seed=seed)


# --- task (de)serialization --------------------------------------------------


def task_to_dict(task: ToyTask) -> dict:
    return {
        "seed": task.seed,
        "prompts": [
            {
                "prompt_id": p.prompt_id,
                "character_id": p.character_id,
                "gold": {
                    "gold_foci": sorted(d.value for d in p.gold.gold_foci),
                    "gold_attrs": {d.value: t for d, t in sorted(
                        p.gold.gold_attrs.items(), key=lambda item: item[0].value
                    )},
                    "reference_response": p.gold.reference_response,
                },
            }
            for p in task.prompts
        ],
        "candidates": {pid: list(pool) for pid, pool in task.candidate_pool.items()},
    }


def task_from_dict(document: dict) -> ToyTask:
    prompts = []
    for entry in document["prompts"]:
        gold_doc = entry["gold"]
        foci = []
        for label in gold_doc["gold_foci"]:
            dim = FocusDimension.from_label(label)
            if dim is None:
                raise ValueError(f"unknown focus label in task file: {label!r}")
            foci.append(dim)
        attrs = {}
        for label, text in gold_doc.get("gold_attrs", {}).items():
            dim = FocusDimension.from_label(label)
            if dim is None:
                raise ValueError(f"unknown focus label in task file: {label!r}")
            attrs[dim] = text
        gold = GoldAnnotation(
            character_id=entry["character_id"],
            gold_foci=frozenset(foci),
            gold_attrs=attrs,
            reference_response=gold_doc["reference_response"],
        )
        prompts.append(ToyPrompt(entry["prompt_id"], entry["character_id"], gold))
    pools = {
        pid: tuple(candidates)
        for pid, candidates in document["candidates"].items()
    }
    return ToyTask(
        prompts=tuple(prompts), candidate_pool=pools, seed=int(document.get("seed", 0))
    )


def save_task(task: ToyTask, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(task_to_dict(task), indent=2) + "\n", encoding="utf-8"
    )


def load_task(path: str | Path) -> ToyTask:
    return task_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
