"""Overlap-based text metrics and the tokenizer they share.

Tokenization is deliberately simple and deterministic: lowercase,
whitespace split, leading/trailing punctuation stripped per token. The
BLEU implementation uses clipped (modified) n-gram precisions, a weighted
geometric mean and the standard brevity penalty against one reference.
"""

from __future__ import annotations

import math
import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .trajectory import FocusDimension

__all__ = [
    "TokenSequence",
    "BleuConfig",
    "BLEU1_CONFIG",
    "tokenize",
    "bleu",
    "bleu1",
    "exact_match",
    "ngram_precision_config",
]

# Tokens are plain lowercase strings with no whitespace.
TokenSequence = Sequence[str]

_SMOOTHING_MODES = ("none", "add_epsilon")
_SMOOTHING_EPS = 1e-9


@dataclass(frozen=True)
class BleuConfig:
    """n-gram order, geometric-mean weights and smoothing mode.

    weights must have max_n entries, be non-negative and sum to 1 within
    1e-9. smoothing "add_epsilon" replaces zero clipped counts with 1e-9;
    "none" makes any zero precision collapse the score to 0.
    """

    max_n: int
    weights: tuple[float, ...]
    smoothing: str = "none"

    def __post_init__(self) -> None:
        if self.max_n < 1:
            raise ValueError("max_n must be >= 1")
        if len(self.weights) != self.max_n:
            raise ValueError("weights length must equal max_n")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be non-negative")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1 (within 1e-9)")
        if self.smoothing not in _SMOOTHING_MODES:
            raise ValueError(f"unknown smoothing mode: {self.smoothing!r}")


BLEU1_CONFIG = BleuConfig(max_n=1, weights=(1.0,))


def ngram_precision_config(n: int) -> BleuConfig:
    """Config scoring only the order-n precision (with brevity penalty)."""
    return BleuConfig(max_n=n, weights=(0.0,) * (n - 1) + (1.0,))


def _strip_edge_punctuation(token: str) -> str:
    start = 0
    end = len(token)
    while start < end and unicodedata.category(token[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(token[end - 1]).startswith("P"):
        end -= 1
    return token[start:end]


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip edge punctuation, drop empties."""
    tokens = []
    for raw_token in text.lower().split():
        token = _strip_edge_punctuation(raw_token)
        if token:
            tokens.append(token)
    return tokens


def _ngram_counts(tokens: TokenSequence, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _modified_precision(
    candidate: TokenSequence, reference: TokenSequence, n: int, smoothing: str
) -> float:
    counts = _ngram_counts(candidate, n)
    total = sum(counts.values())
    if total == 0:
        # No order-n grams to judge: vacuous, so identity still scores 1.
        return 1.0
    reference_counts = _ngram_counts(reference, n)
    clipped = sum(min(c, reference_counts[g]) for g, c in counts.items())
    if clipped == 0 and smoothing == "add_epsilon":
        return _SMOOTHING_EPS / total
    return clipped / total


def bleu(
    candidate: TokenSequence, reference: TokenSequence, config: BleuConfig = BLEU1_CONFIG
) -> float:
    """Score a candidate against one reference; result in [0, 1].

    Geometric mean of clipped n-gram precisions under config.weights,
    multiplied by the brevity penalty min(1, exp(1 - |ref|/|cand|)). An
    empty candidate scores 0, as does any zero precision when smoothing
    is "none"; orders longer than the candidate contribute vacuously so
    bleu(x, x) stays 1 for every non-empty x.
    """
    if not candidate:
        return 0.0
    log_sum = 0.0
    for n, weight in enumerate(config.weights, start=1):
        precision = _modified_precision(candidate, reference, n, config.smoothing)
        if precision == 0.0:
            return 0.0
        log_sum += weight * math.log(precision)
    brevity = min(1.0, math.exp(1.0 - len(reference) / len(candidate)))
    return brevity * math.exp(log_sum)


def bleu1(candidate: TokenSequence, reference: TokenSequence) -> float:
    """Unigram BLEU (brevity penalty included, no smoothing)."""
    return bleu(candidate, reference, BLEU1_CONFIG)


def exact_match(
    pred_labels: Iterable[FocusDimension], gold_labels: Iterable[FocusDimension]
) -> int:
    """1 iff the deduplicated label sets are equal, else 0."""
    return int(set(pred_labels) == set(gold_labels))
