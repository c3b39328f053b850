"""Raw reward computation from a parsed trajectory and its gold annotation.

Three bounded components: a binary focus-set exact match, a per-dimension
attribute BLEU-1 mean, and an averaged overlap score of the answer against
the reference response. A format gate zeroes all components when the
trajectory violates the tag grammar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .metrics import BleuConfig, bleu, bleu1, ngram_precision_config, tokenize
from .trajectory import FocusDimension, ParsedTrajectory, parse_trajectory

__all__ = [
    "GoldAnnotation",
    "RewardVector",
    "RefRewardConfig",
    "DEFAULT_REF_CONFIG",
    "score_focus",
    "score_focus_attr",
    "score_reference",
    "score_parsed",
    "score_trajectory",
]


@dataclass(frozen=True)
class GoldAnnotation:
    """Per-sample ground truth: gold focus labels, per-label attribute
    texts, and the reference response."""

    character_id: str
    gold_foci: frozenset[FocusDimension]
    gold_attrs: dict[FocusDimension, str] = field(default_factory=dict)
    reference_response: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "gold_foci", frozenset(self.gold_foci))
        object.__setattr__(self, "gold_attrs", dict(self.gold_attrs))
        if not set(self.gold_attrs) <= self.gold_foci:
            raise ValueError("gold_attrs keys must be a subset of gold_foci")
        if not self.reference_response:
            raise ValueError("reference_response must be non-empty")


@dataclass(frozen=True)
class RewardVector:
    """Named raw reward components plus the format-gate flag."""

    focus: float
    focus_attr: float
    ref: float
    format_valid: bool

    def __post_init__(self) -> None:
        for value in (self.focus, self.focus_attr, self.ref):
            if not math.isfinite(value):
                raise ValueError("reward components must be finite")

    @classmethod
    def zero(cls) -> "RewardVector":
        return cls(0.0, 0.0, 0.0, False)


@dataclass(frozen=True)
class RefRewardConfig:
    """Overlap metrics averaged into the reference-guided component."""

    metrics: tuple[BleuConfig, ...]
    combine: str = "sum_normalized"

    def __post_init__(self) -> None:
        if not self.metrics:
            raise ValueError("metrics must be non-empty")
        if self.combine != "sum_normalized":
            raise ValueError(f"unknown combine mode: {self.combine!r}")


# Unigram and bigram precision (each with brevity penalty), averaged.
DEFAULT_REF_CONFIG = RefRewardConfig(
    metrics=(ngram_precision_config(1), ngram_precision_config(2))
)


def _focus_value(parsed: ParsedTrajectory, gold: GoldAnnotation) -> float:
    predicted = {declaration.dimension for declaration in parsed.foci}
    return float(predicted == set(gold.gold_foci))


def _focus_attr_value(parsed: ParsedTrajectory, gold: GoldAnnotation) -> float:
    if not gold.gold_attrs:
        return 0.0
    attrs_by_dim: dict[FocusDimension, list[str]] = {}
    for declaration in parsed.foci:
        attrs_by_dim.setdefault(declaration.dimension, []).append(
            declaration.attribute
        )
    total = 0.0
    for dimension, gold_text in gold.gold_attrs.items():
        pieces = attrs_by_dim.get(dimension)
        if pieces is None:
            continue
        # Repeated declarations of one dimension concatenate in document order.
        predicted_text = " ".join(pieces)
        total += bleu1(tokenize(predicted_text), tokenize(gold_text))
    return total / len(gold.gold_attrs)


def _reference_value(
    parsed: ParsedTrajectory, gold: GoldAnnotation, config: RefRewardConfig
) -> float:
    candidate = tokenize(parsed.answer)
    reference = tokenize(gold.reference_response)
    total = sum(bleu(candidate, reference, metric) for metric in config.metrics)
    return total / len(config.metrics)


def score_focus(parsed: ParsedTrajectory, gold: GoldAnnotation) -> float:
    """Exact match of the deduplicated predicted focus set against gold;
    0 when the format gate is closed."""
    if not parsed.format_valid:
        return 0.0
    return _focus_value(parsed, gold)


def score_focus_attr(parsed: ParsedTrajectory, gold: GoldAnnotation) -> float:
    """Mean BLEU-1 of predicted vs gold attribute text over the gold
    dimensions that carry an attribute; dimensions the trajectory does not
    declare contribute 0. 0 when gold has no attributes or the gate is
    closed."""
    if not parsed.format_valid:
        return 0.0
    return _focus_attr_value(parsed, gold)


def score_reference(
    parsed: ParsedTrajectory,
    gold: GoldAnnotation,
    config: RefRewardConfig = DEFAULT_REF_CONFIG,
) -> float:
    """Mean of the configured overlap metrics between the extracted answer
    and the reference response; 0 when the gate is closed."""
    if not parsed.format_valid:
        return 0.0
    return _reference_value(parsed, gold, config)


def score_parsed(
    parsed: ParsedTrajectory,
    gold: GoldAnnotation,
    config: RefRewardConfig = DEFAULT_REF_CONFIG,
    apply_gate: bool = True,
) -> RewardVector:
    """Assemble the reward vector for an already-parsed trajectory.

    With apply_gate (the default) an invalid format forces the zero
    vector; apply_gate=False reports the ungated component values, for
    the experimental normalize-before-gate ordering.
    """
    if apply_gate and not parsed.format_valid:
        return RewardVector.zero()
    return RewardVector(
        focus=_focus_value(parsed, gold),
        focus_attr=_focus_attr_value(parsed, gold),
        ref=_reference_value(parsed, gold, config),
        format_valid=parsed.format_valid,
    )


def score_trajectory(
    raw: str | bytes,
    gold: GoldAnnotation,
    config: RefRewardConfig = DEFAULT_REF_CONFIG,
) -> RewardVector:
    """Parse raw output, apply the format gate, and score all components."""
    return score_parsed(parse_trajectory(raw), gold, config)
