"""Shared scoring pipeline: parse -> score -> normalize -> aggregate.

Both the HTTP service and the batch CLI drive this object so their
outputs are equivalent by construction. Group resolution prefers the
fitted model's assignment for a known character and falls back to the
deterministic hash embedding of the character id otherwise (flagged in
the item's diagnostics).
"""

from __future__ import annotations

from dataclasses import dataclass

from .grouping import GroupModel, assign_group, fallback_embedding
from .normalizer import NormalizedRewards, NormalizerState, WeightVector, aggregate
from .rewards import GoldAnnotation, RefRewardConfig, RewardVector, score_parsed
from .trajectory import Diagnostic, DiagnosticCode, Severity, parse_trajectory

__all__ = ["ItemResult", "RewardPipeline", "NoGroupModelError"]


class NoGroupModelError(RuntimeError):
    """Scoring was attempted before a group model was fitted."""


@dataclass(frozen=True)
class ItemResult:
    group: int
    raw: RewardVector
    normalized: NormalizedRewards
    scalar: float
    diagnostics: tuple[Diagnostic, ...]

    def to_wire(self, request_id: str) -> dict:
        return {
            "request_id": request_id,
            "group": self.group,
            "raw": {
                "focus": self.raw.focus,
                "focus_attr": self.raw.focus_attr,
                "ref": self.raw.ref,
                "format_valid": self.raw.format_valid,
            },
            "normalized": [
                self.normalized.focus,
                self.normalized.focus_attr,
                self.normalized.ref,
            ],
            "scalar": self.scalar,
            "diagnostics": [
                {"code": d.code.value, "severity": d.severity.value, "detail": d.detail}
                for d in self.diagnostics
            ],
        }


class RewardPipeline:
    """Stateful scorer bound to one normalizer state and group model.

    Not thread-safe on its own: callers serialize update_stats=True paths
    (the service routes them through a single lock).
    """

    def __init__(
        self,
        weights: WeightVector,
        ref_config: RefRewardConfig,
        normalizer: NormalizerState,
        group_model: GroupModel | None = None,
        gate_before_normalize: bool = True,
    ) -> None:
        self.weights = weights
        self.ref_config = ref_config
        self.normalizer = normalizer
        self.group_model = group_model
        # Experimental ordering toggle: when False, ungated component values
        # flow through the statistics and standardization, and only the
        # reported raw vector and scalar are gated.
        self.gate_before_normalize = gate_before_normalize

    def resolve_group(self, character_id: str) -> tuple[int, bool]:
        """Group index for a character; True in the second slot marks the
        hash-embedding fallback for an unknown character."""
        if self.group_model is None:
            raise NoGroupModelError("no group model fitted")
        known = self.group_model.assignments.get(character_id)
        if known is not None:
            return known, False
        embedding = fallback_embedding(character_id, dim=self.group_model.dim)
        return assign_group(self.group_model, embedding), True

    def score_item(
        self,
        character_id: str,
        raw_output: str,
        gold: GoldAnnotation,
        update_stats: bool,
    ) -> ItemResult:
        group, used_fallback = self.resolve_group(character_id)
        parsed = parse_trajectory(raw_output)
        gated = score_parsed(parsed, gold, self.ref_config, apply_gate=True)
        flowing = (
            gated
            if self.gate_before_normalize
            else score_parsed(parsed, gold, self.ref_config, apply_gate=False)
        )
        if update_stats:
            self.normalizer.update(group, flowing)
        normalized = self.normalizer.normalize(group, flowing)
        if not self.gate_before_normalize and not parsed.format_valid:
            normalized = NormalizedRewards(0.0, 0.0, 0.0, False)
        scalar = aggregate(normalized, self.weights)

        diagnostics = list(parsed.diagnostics)
        if used_fallback:
            diagnostics.append(
                Diagnostic(
                    DiagnosticCode.UNKNOWN_CHARACTER,
                    Severity.WARNING,
                    character_id,
                )
            )
        return ItemResult(
            group=group,
            raw=gated,
            normalized=normalized,
            scalar=scalar,
            diagnostics=tuple(diagnostics),
        )
