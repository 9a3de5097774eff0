"""Corrupt a reference into a masked pseudo translation with gold tags and score.

A plan places ``t`` non-overlapping token spans over the reference. Each span
is replaced by mask symbols, optionally with extra masks inserted
(over-translation) or with leading tokens deleted (omission).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .corpus import (
    BAD,
    MASK,
    OK,
    ErrorSpan,
    QESample,
    Severity,
    TokenizedText,
    ValidationError,
    from_tokens,
    mqm_score,
    severity_counts,
)
from .stats import CorruptionStats, sample_categorical

MAX_LENGTH_ATTEMPTS = 20
DEFAULT_EDIT_PROBS = (0.15, 0.15)


class EditKind(enum.Enum):
    REPLACE = "replace"
    INSERT = "insert"
    DELETE = "delete"


@dataclass(frozen=True)
class PlannedSpan:
    start_tok: int
    length: int
    severity: Severity
    edit: EditKind = EditKind.REPLACE
    edit_count: int = 0

    @property
    def end_tok(self) -> int:
        return self.start_tok + self.length

    def to_json(self) -> dict:
        return {
            "start": self.start_tok,
            "length": self.length,
            "severity": self.severity.value,
            "edit": self.edit.value,
            "count": self.edit_count,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PlannedSpan":
        return cls(
            int(obj["start"]),
            int(obj["length"]),
            Severity.parse(obj["severity"]),
            EditKind(obj["edit"]),
            int(obj.get("count", 0)),
        )


@dataclass(frozen=True)
class CorruptionPlan:
    spans: tuple[PlannedSpan, ...]
    reference_len: int

    def __post_init__(self) -> None:
        eol = 0
        for span in self.spans:
            if span.length < 1 or span.start_tok < eol:
                raise ValidationError("planned spans overlap, are unsorted, or are empty")
            if span.edit is EditKind.REPLACE and span.edit_count != 0:
                raise ValidationError("replace spans carry no edit count")
            if span.edit is EditKind.INSERT and span.edit_count < 1:
                raise ValidationError("insert spans need at least one extra token")
            if span.edit is EditKind.DELETE and not 1 <= span.edit_count <= span.length:
                raise ValidationError("delete count must be within the span")
            eol = span.end_tok
        if eol > self.reference_len:
            raise ValidationError("planned span runs past the reference")

    def to_json(self) -> dict:
        return {"n": self.reference_len, "spans": [s.to_json() for s in self.spans]}

    @classmethod
    def from_json(cls, obj: dict) -> "CorruptionPlan":
        return cls(tuple(PlannedSpan.from_json(s) for s in obj["spans"]), int(obj["n"]))


@dataclass(frozen=True)
class MaskedTranslation:
    """Output of :func:`apply_corruption`.

    ``mask_positions[i]`` lists the output positions holding masks for plan
    span ``i``; ``span_positions[i]`` adds that span's omission marker.
    ``reference_tokens[pos]`` is the reference token a mask replaced, or
    None for inserted masks and unmasked positions.
    """

    tokens: tuple[str, ...]
    mask_positions: tuple[tuple[int, ...], ...]
    span_positions: tuple[tuple[int, ...], ...]
    reference_tokens: tuple[Optional[str], ...]
    gold_tags: tuple[str, ...]
    pseudo_mqm: float
    severities: tuple[Severity, ...]

    def to_json(self) -> dict:
        return {
            "tokens": list(self.tokens),
            "masks": [list(p) for p in self.mask_positions],
            "span_positions": [list(p) for p in self.span_positions],
            "orig": list(self.reference_tokens),
            "tags": " ".join(self.gold_tags),
            "score": self.pseudo_mqm,
            "severities": [s.value for s in self.severities],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MaskedTranslation":
        return cls(
            tuple(obj["tokens"]),
            tuple(tuple(p) for p in obj["masks"]),
            tuple(tuple(p) for p in obj["span_positions"]),
            tuple(obj["orig"]),
            tuple(obj["tags"].split()),
            float(obj["score"]),
            tuple(Severity.parse(s) for s in obj["severities"]),
        )

    def error_spans(self, translation: TokenizedText) -> tuple[ErrorSpan, ...]:
        """Character spans over ``translation`` (same token layout as ``tokens``).

        A span whose positions are all claimed by an earlier span (possible
        only for a fully deleted span whose marker falls inside a neighbour)
        is folded into that neighbour.
        """
        spans = []
        claimed: set[int] = set()
        for positions, severity in zip(self.span_positions, self.severities):
            own = sorted(set(positions) - claimed)
            if not own:
                continue
            claimed.update(own)
            start = translation.offsets[own[0]][0]
            end = translation.offsets[own[-1]][1]
            spans.append(ErrorSpan(start, end, severity))
        spans.sort(key=lambda s: s.start)
        return tuple(spans)


def plan_corruption(
    n: int,
    stats: CorruptionStats,
    edit_probs: tuple[float, float] = DEFAULT_EDIT_PROBS,
    rng: Optional[np.random.Generator] = None,
) -> CorruptionPlan:
    """Sample span count, lengths, starts, severities and edits for ``n`` reference tokens.

    Draw order is fixed (count, lengths, starts, severities, edits) so a
    seeded generator always yields the same plan.
    """
    if n < 1:
        raise ValueError("reference must have at least one token")
    p_insert, p_delete = edit_probs
    if p_insert < 0 or p_delete < 0 or p_insert + p_delete > 1:
        raise ValueError("edit probabilities must be non-negative and sum to at most 1")
    if rng is None:
        rng = np.random.default_rng()

    # sum of lengths must stay < n and every span has length >= 1
    t = min(sample_categorical(stats.span_count_dist, rng), n - 1)

    lengths: list[int] = []
    total = 0
    for _ in range(t):
        for _attempt in range(MAX_LENGTH_ATTEMPTS):
            length = sample_categorical(stats.span_length_dist, rng)
            if total + length < n:
                break
        else:
            break
        lengths.append(length)
        total += length

    starts = []
    eol = 0
    remaining = total
    for length in lengths:
        hi = n - remaining
        start = int(rng.integers(eol, hi + 1))
        starts.append(start)
        eol = start + length
        remaining -= length

    severities = [sample_categorical(stats.severity_dist, rng) for _ in lengths]

    spans = []
    for start, length, severity in zip(starts, lengths, severities):
        u = rng.random()
        if u < p_insert:
            spans.append(PlannedSpan(start, length, severity, EditKind.INSERT, int(rng.integers(1, length + 1))))
        elif u < p_insert + p_delete and length > 1:
            # leave at least one token so the span never vanishes
            spans.append(PlannedSpan(start, length, severity, EditKind.DELETE, int(rng.integers(1, length))))
        else:
            spans.append(PlannedSpan(start, length, severity))
    return CorruptionPlan(tuple(spans), n)


def apply_corruption(
    reference: Sequence[str] | TokenizedText,
    plan: CorruptionPlan,
    rng: Optional[np.random.Generator] = None,
) -> MaskedTranslation:
    """Mask, insert into, or delete from each planned span and tag the result."""
    ref_tokens = tuple(reference.tokens if isinstance(reference, TokenizedText) else reference)
    if plan.reference_len != len(ref_tokens):
        raise ValidationError(
            f"plan is for {plan.reference_len} tokens but the reference has {len(ref_tokens)}"
        )
    if rng is None:
        rng = np.random.default_rng()

    out: list[str] = []
    orig: list[Optional[str]] = []
    bad: list[bool] = []
    mask_groups: list[list[int]] = []
    span_groups: list[list[int]] = []
    # (span index, side) for omissions whose marker is resolved after layout
    pending_markers: list[tuple[int, int]] = []

    cursor = 0
    for idx, span in enumerate(plan.spans):
        for tok in ref_tokens[cursor:span.start_tok]:
            out.append(tok)
            orig.append(None)
            bad.append(False)
        span_tokens = ref_tokens[span.start_tok:span.end_tok]
        masks: list[int] = []
        if span.edit is EditKind.INSERT:
            slots = span.length + span.edit_count
            inserted = set(rng.choice(slots, size=span.edit_count, replace=False).tolist())
            source = iter(span_tokens)
            for slot in range(slots):
                masks.append(len(out))
                out.append(MASK)
                orig.append(None if slot in inserted else next(source))
                bad.append(True)
        elif span.edit is EditKind.DELETE:
            survivors = span_tokens[span.edit_count:]
            for tok in survivors:
                masks.append(len(out))
                out.append(MASK)
                orig.append(tok)
                bad.append(True)
            if not survivors:
                pending_markers.append((idx, len(out)))
        else:
            for tok in span_tokens:
                masks.append(len(out))
                out.append(MASK)
                orig.append(tok)
                bad.append(True)
        mask_groups.append(masks)
        span_groups.append(list(masks))
        cursor = span.end_tok
    for tok in ref_tokens[cursor:]:
        out.append(tok)
        orig.append(None)
        bad.append(False)

    if not out:
        raise ValidationError("corruption deleted every token")
    for idx, point in pending_markers:
        # token right of the omission, or the left neighbour at sentence end
        marker = point if point < len(out) else point - 1
        bad[marker] = True
        span_groups[idx].append(marker)
        span_groups[idx].sort()

    severities = tuple(s.severity for s in plan.spans)
    return MaskedTranslation(
        tokens=tuple(out),
        mask_positions=tuple(tuple(g) for g in mask_groups),
        span_positions=tuple(tuple(g) for g in span_groups),
        reference_tokens=tuple(orig),
        gold_tags=tuple(BAD if b else OK for b in bad),
        pseudo_mqm=mqm_score(*severity_counts(severities), len(out)),
        severities=severities,
    )


def masked_to_sample(record_id: str, source: str, masked: MaskedTranslation) -> QESample:
    """QESample over the masked tokens themselves (mask symbols left in place)."""
    translation = from_tokens(masked.tokens)
    return QESample(
        id=record_id,
        source=source,
        translation=translation,
        tags=masked.gold_tags,
        mqm_score=masked.pseudo_mqm,
        spans=masked.error_spans(translation),
    )
