"""Parsing of tag-structured reasoning trajectories.

A raw model output is expected to carry an internal monologue inside
``<think> </think>`` tags, zero or more focus declarations (a ``<focus>``
label followed by a ``<focus_attr>`` payload), and a final answer,
preferably wrapped in ``\\boxed{}``. Parsing is total over text input:
structural defects never raise; they are collected as diagnostics on the
result and clear ``format_valid``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

__all__ = [
    "FocusDimension",
    "FocusDeclaration",
    "ParsedTrajectory",
    "Diagnostic",
    "DiagnosticCode",
    "Severity",
    "FormatReport",
    "parse_trajectory",
    "render_trajectory",
    "validate_format",
    "build_trajectory",
]


class FocusDimension(Enum):
    """Closed set of cognitive focus labels a trajectory may declare."""

    KNOWLEDGE = "Knowledge"
    STYLE = "Style"
    WORLDVIEW = "Worldview"
    EMOTION = "Emotion"
    EMPATHETIC = "Empathetic"
    ENGAGEMENT = "Engagement"
    HUMAN_LIKE = "Human_Like"
    EXTENSION = "Extension"
    MEMORY = "Memory"
    SAFETY = "Safety"

    @classmethod
    def from_label(cls, label: str) -> "FocusDimension | None":
        """Resolve a raw label, case-insensitively, with spaces and
        underscores unified. Returns None for anything outside the set."""
        return _LABEL_LOOKUP.get(_normalize_label(label))


def _normalize_label(label: str) -> str:
    return re.sub(r"[\s_]+", "_", label.strip().lower())


_LABEL_LOOKUP = {_normalize_label(dim.value): dim for dim in FocusDimension}


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


class DiagnosticCode(str, Enum):
    MISSING_THINK_BLOCK = "missing_think_block"
    MULTIPLE_THINK_BLOCKS = "multiple_think_blocks"
    UNCLOSED_TAG = "unclosed_tag"
    UNKNOWN_FOCUS_LABEL = "unknown_focus_label"
    MISSING_ANSWER = "missing_answer"
    ANSWER_NOT_BOXED = "answer_not_boxed"
    MISSING_FOCUS_ATTR = "missing_focus_attr"
    ORPHAN_FOCUS_ATTR = "orphan_focus_attr"
    # Emitted by the scoring pipeline, not the parser: the character was
    # not in the fitted group model and the hash-embedding fallback applied.
    UNKNOWN_CHARACTER = "unknown_character_fallback"


@dataclass(frozen=True)
class Diagnostic:
    """One structural finding. Error severity clears format_valid;
    warnings are informational."""

    code: DiagnosticCode
    severity: Severity
    detail: str = ""


@dataclass(frozen=True)
class FocusDeclaration:
    """A declared focus dimension with its free-text attribute payload.

    ``position`` is the character offset inside the (tag-stripped) think
    text where the declaration sat; it is rendering metadata and excluded
    from equality. None means "append at the end of the think text".
    """

    dimension: FocusDimension
    attribute: str = ""
    position: int | None = field(default=None, compare=False)


@dataclass(frozen=True)
class ParsedTrajectory:
    """Structured decomposition of a raw output into reasoning + answer.

    think_text is the inner content of the think block with focus tag
    spans removed; foci preserve document order. format_valid is True iff
    no error-severity diagnostic was recorded.
    """

    think_text: str
    foci: tuple[FocusDeclaration, ...]
    answer: str
    answer_was_boxed: bool
    format_valid: bool
    diagnostics: tuple[Diagnostic, ...] = ()


@dataclass(frozen=True)
class FormatReport:
    passed: bool
    diagnostics: tuple[Diagnostic, ...]


_THINK_OPEN = "<think>"
_THINK_CLOSE = "</think>"
_BOXED_MARK = "\\boxed{"
_TAG_RE = re.compile(r"<(/?)(focus_attr|focus)>")


@dataclass
class _FocusRecord:
    dimension: FocusDimension
    attribute: str | None
    position: int


def parse_trajectory(raw: str | bytes) -> ParsedTrajectory:
    """Parse a raw model output into a ParsedTrajectory.

    Never raises on structural defects; every defect becomes a Diagnostic
    and error-severity defects clear format_valid. The answer is the
    brace-balanced content of ``\\boxed{...}`` in the text after the think
    block when present, otherwise that trailing text trimmed.

    Raises:
        UnicodeDecodeError: if ``raw`` is bytes that are not valid UTF-8.
    """
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")

    diags: list[Diagnostic] = []
    think_inner: str | None = None
    tail = ""

    open_idx = raw.find(_THINK_OPEN)
    if open_idx < 0:
        diags.append(Diagnostic(DiagnosticCode.MISSING_THINK_BLOCK, Severity.ERROR))
    else:
        close_idx = raw.find(_THINK_CLOSE, open_idx + len(_THINK_OPEN))
        if close_idx < 0:
            diags.append(Diagnostic(DiagnosticCode.UNCLOSED_TAG, Severity.ERROR, "think"))
        else:
            think_inner = raw[open_idx + len(_THINK_OPEN) : close_idx]
            tail = raw[close_idx + len(_THINK_CLOSE) :]
        if raw.count(_THINK_OPEN) > 1:
            diags.append(Diagnostic(DiagnosticCode.MULTIPLE_THINK_BLOCKS, Severity.ERROR))

    think_text = ""
    foci: list[FocusDeclaration] = []
    if think_inner is not None:
        think_text, foci = _extract_foci(think_inner, diags)

    boxed = _extract_boxed(tail)
    if boxed is not None:
        answer = boxed
        answer_was_boxed = True
        if not answer.strip():
            diags.append(Diagnostic(DiagnosticCode.MISSING_ANSWER, Severity.ERROR))
    else:
        answer = tail.strip()
        answer_was_boxed = False
        if not answer:
            diags.append(Diagnostic(DiagnosticCode.MISSING_ANSWER, Severity.ERROR))
        else:
            diags.append(Diagnostic(DiagnosticCode.ANSWER_NOT_BOXED, Severity.WARNING))

    format_valid = not any(d.severity is Severity.ERROR for d in diags)
    return ParsedTrajectory(
        think_text=think_text,
        foci=tuple(foci),
        answer=answer,
        answer_was_boxed=answer_was_boxed,
        format_valid=format_valid,
        diagnostics=tuple(diags),
    )


def _extract_foci(
    inner: str, diags: list[Diagnostic]
) -> tuple[str, list[FocusDeclaration]]:
    """Strip well-formed focus tag pairs out of the think block, recording
    declarations in document order. Improperly paired tags are reported and
    left in the text verbatim."""
    events = list(_TAG_RE.finditer(inner))
    pieces: list[str] = []
    stripped_len = 0
    cursor = 0
    records: list[_FocusRecord] = []
    pending: _FocusRecord | None = None

    i = 0
    while i < len(events):
        ev = events[i]
        is_close = ev.group(1) == "/"
        name = ev.group(2)
        nxt = events[i + 1] if i + 1 < len(events) else None
        paired = (
            not is_close
            and nxt is not None
            and nxt.group(1) == "/"
            and nxt.group(2) == name
        )
        if not paired:
            diags.append(Diagnostic(DiagnosticCode.UNCLOSED_TAG, Severity.ERROR, name))
            segment = inner[cursor : ev.end()]
            pieces.append(segment)
            stripped_len += len(segment)
            cursor = ev.end()
            i += 1
            continue

        segment = inner[cursor : ev.start()]
        pieces.append(segment)
        stripped_len += len(segment)
        content = inner[ev.end() : nxt.start()]

        if name == "focus":
            if pending is not None:
                diags.append(
                    Diagnostic(
                        DiagnosticCode.MISSING_FOCUS_ATTR,
                        Severity.WARNING,
                        pending.dimension.value,
                    )
                )
                pending = None
            dim = FocusDimension.from_label(content)
            if dim is None:
                diags.append(
                    Diagnostic(
                        DiagnosticCode.UNKNOWN_FOCUS_LABEL,
                        Severity.ERROR,
                        content.strip(),
                    )
                )
            else:
                record = _FocusRecord(dim, None, stripped_len)
                records.append(record)
                pending = record
        else:  # focus_attr
            if pending is None:
                diags.append(
                    Diagnostic(
                        DiagnosticCode.ORPHAN_FOCUS_ATTR,
                        Severity.WARNING,
                        content.strip(),
                    )
                )
            else:
                pending.attribute = content.strip()
                pending = None

        cursor = nxt.end()
        i += 2

    if pending is not None:
        diags.append(
            Diagnostic(
                DiagnosticCode.MISSING_FOCUS_ATTR,
                Severity.WARNING,
                pending.dimension.value,
            )
        )
    pieces.append(inner[cursor:])
    think_text = "".join(pieces)
    foci = [
        FocusDeclaration(r.dimension, r.attribute or "", r.position) for r in records
    ]
    return think_text, foci


def _extract_boxed(text: str) -> str | None:
    """Brace-balanced extraction of the first ``\\boxed{...}`` payload.
    An unbalanced marker counts as absent."""
    start = text.find(_BOXED_MARK)
    if start < 0:
        return None
    depth = 1
    i = start + len(_BOXED_MARK)
    begin = i
    while i < len(text):
        ch = text[i]
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[begin:i]
        i += 1
    return None


def render_trajectory(trajectory: ParsedTrajectory) -> str:
    """Emit the canonical text form of a valid trajectory.

    Focus declarations are inlined at their recorded positions (appended at
    the end of the think text when position is None) and the answer is
    wrapped in ``\\boxed{}``. Re-parsing the output reproduces foci, answer
    and format_valid. The answer must contain balanced braces and neither
    the think text nor attributes may embed tag literals.

    Raises:
        ValueError: if format_valid is False or the answer is empty.
    """
    if not trajectory.format_valid:
        raise ValueError("refusing to render a trajectory with format_valid=False")
    if not trajectory.answer:
        raise ValueError("refusing to render a trajectory with an empty answer")

    n = len(trajectory.think_text)
    for decl in trajectory.foci:
        if decl.position is not None and not 0 <= decl.position <= n:
            raise ValueError(f"focus position {decl.position} outside think text")

    ordered = sorted(
        trajectory.foci, key=lambda d: n if d.position is None else d.position
    )
    parts: list[str] = []
    cursor = 0
    for decl in ordered:
        pos = n if decl.position is None else decl.position
        parts.append(trajectory.think_text[cursor:pos])
        parts.append(
            f"<focus>{decl.dimension.value}</focus>"
            f"<focus_attr>{decl.attribute}</focus_attr>"
        )
        cursor = pos
    parts.append(trajectory.think_text[cursor:])
    body = "".join(parts)
    return f"{_THINK_OPEN}{body}{_THINK_CLOSE}\\boxed{{{trajectory.answer}}}"


def validate_format(trajectory: ParsedTrajectory) -> FormatReport:
    """Report the trajectory's diagnostics; pass mirrors format_valid."""
    return FormatReport(passed=trajectory.format_valid, diagnostics=trajectory.diagnostics)


def build_trajectory(
    think_text: str,
    foci: Sequence[FocusDeclaration | tuple[FocusDimension, str]],
    answer: str,
) -> ParsedTrajectory:
    """Construct a valid trajectory programmatically (test fixtures and
    candidate pools); pair it with render_trajectory to get raw text."""
    declarations: list[FocusDeclaration] = []
    for item in foci:
        if isinstance(item, FocusDeclaration):
            declarations.append(item)
        else:
            dimension, attribute = item
            declarations.append(FocusDeclaration(dimension, attribute))
    return ParsedTrajectory(
        think_text=think_text,
        foci=tuple(declarations),
        answer=answer,
        answer_was_boxed=True,
        format_valid=True,
        diagnostics=(),
    )
