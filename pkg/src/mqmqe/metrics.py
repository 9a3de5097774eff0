"""Sentence, word and span-level evaluation."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .corpus import BAD, OK, ErrorSpan, Severity, ValidationError


class UndefinedCorrelation(ValueError):
    pass


def spearman(pred: Sequence[float], gold: Sequence[float]) -> float:
    """Pearson correlation of tie-averaged ranks."""
    if len(pred) != len(gold):
        raise ValueError("pred and gold differ in length")
    if len(pred) < 2:
        raise UndefinedCorrelation("undefined correlation: fewer than two items")
    rp = rankdata(np.asarray(pred, dtype=np.float64), method="average")
    rg = rankdata(np.asarray(gold, dtype=np.float64), method="average")
    rp -= rp.mean()
    rg -= rg.mean()
    denom = np.sqrt((rp * rp).sum() * (rg * rg).sum())
    if denom == 0:
        raise UndefinedCorrelation("undefined correlation: zero rank variance")
    return float(np.clip((rp * rg).sum() / denom, -1.0, 1.0))


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def mcc(self) -> float:
        tp, tn, fp, fn = self.tp, self.tn, self.fp, self.fn
        factors = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
        if factors == 0:
            return 0.0
        return (tp * tn - fp * fn) / np.sqrt(float(factors))


def confusion(pred: Sequence[Sequence[str]], gold: Sequence[Sequence[str]]) -> ConfusionCounts:
    """Pooled token counts with BAD as the positive class."""
    if len(pred) != len(gold):
        raise ValueError(f"{len(pred)} predicted sentences for {len(gold)} gold sentences")
    tp = tn = fp = fn = 0
    for i, (p_tags, g_tags) in enumerate(zip(pred, gold)):
        if len(p_tags) != len(g_tags):
            raise ValueError(f"sentence {i}: {len(p_tags)} predicted tags for {len(g_tags)} gold tags")
        for p, g in zip(p_tags, g_tags):
            if p not in (OK, BAD) or g not in (OK, BAD):
                raise ValidationError(f"sentence {i}: tags must be OK or BAD")
            if p == BAD:
                if g == BAD:
                    tp += 1
                else:
                    fp += 1
            elif g == BAD:
                fn += 1
            else:
                tn += 1
    return ConfusionCounts(tp, tn, fp, fn)


def mcc(pred: Sequence[Sequence[str]], gold: Sequence[Sequence[str]]) -> float:
    return float(confusion(pred, gold).mcc())


class SpanMode(enum.Enum):
    STRICT = "strict"
    LENIENT = "lenient"


@dataclass(frozen=True)
class SpanScore:
    f1: float
    precision: float
    recall: float
    matched: float
    pred_chars: int
    gold_chars: int


def _char_map(spans: Sequence[ErrorSpan], which: str, index: int) -> dict[int, Severity]:
    chars: dict[int, Severity] = {}
    prev_end = None
    for span in sorted(spans, key=lambda s: s.start):
        if span.end <= span.start or span.start < 0:
            raise ValidationError(f"{which} sample {index}: empty or negative span {span.encode()}")
        if prev_end is not None and span.start < prev_end:
            raise ValidationError(f"{which} sample {index}: overlapping spans")
        for c in range(span.start, span.end):
            chars[c] = span.severity
        prev_end = span.end
    return chars


def span_scores(
    pred: Sequence[Sequence[ErrorSpan]],
    gold: Sequence[Sequence[ErrorSpan]],
    mode: SpanMode | str = SpanMode.LENIENT,
) -> SpanScore:
    """Character-level precision/recall/F1 pooled over samples.

    A predicted error character earns 1 when the gold character at the same
    position has the same severity; in lenient mode a severity mismatch
    earns 0.5.
    """
    mode = SpanMode(mode)
    if len(pred) != len(gold):
        raise ValueError(f"{len(pred)} predicted samples for {len(gold)} gold samples")
    mismatch_credit = 0.5 if mode is SpanMode.LENIENT else 0.0
    matched = 0.0
    n_pred = n_gold = 0
    for i, (p_spans, g_spans) in enumerate(zip(pred, gold)):
        p_chars = _char_map(p_spans, "predicted", i)
        g_chars = _char_map(g_spans, "gold", i)
        n_pred += len(p_chars)
        n_gold += len(g_chars)
        for c, sev in p_chars.items():
            g_sev = g_chars.get(c)
            if g_sev is None:
                continue
            matched += 1.0 if g_sev is sev else mismatch_credit
    if n_pred == 0 and n_gold == 0:
        return SpanScore(1.0, 1.0, 1.0, 0.0, 0, 0)
    if n_pred == 0 or n_gold == 0:
        return SpanScore(0.0, 0.0, 0.0, matched, n_pred, n_gold)
    precision = matched / n_pred
    recall = matched / n_gold
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return SpanScore(f1, precision, recall, matched, n_pred, n_gold)


def span_f1(
    pred: Sequence[Sequence[ErrorSpan]],
    gold: Sequence[Sequence[ErrorSpan]],
    mode: SpanMode | str = SpanMode.LENIENT,
) -> float:
    return span_scores(pred, gold, mode).f1
