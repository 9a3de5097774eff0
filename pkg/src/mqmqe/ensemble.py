"""Combine system outputs and turn OK-probabilities into tags and error spans."""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .corpus import BAD, OK, ErrorSpan, Severity, TokenizedText, ValidationError
from .metrics import SpanMode, mcc, span_f1
from .predictions import Prediction


class MergeRule(enum.Enum):
    WORST = "worst"
    MAJORITY = "majority"


@dataclass(frozen=True)
class Thresholds:
    bad: float = 0.5
    minor: float = 0.5
    major: float = 0.1

    def __post_init__(self) -> None:
        for name in ("bad", "minor", "major"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValidationError(f"threshold {name} must lie in [0, 1]")
        if self.major > self.minor:
            raise ValidationError("major threshold must not exceed minor threshold")


def zscore_ensemble(scores: Sequence[Sequence[float]]) -> list[float]:
    """Average of per-system z-scores (population std; constant systems contribute 0)."""
    if not scores:
        raise ValueError("need at least one system")
    lengths = {len(s) for s in scores}
    if len(lengths) != 1:
        raise ValueError(f"systems have mismatched lengths {sorted(lengths)}")
    z = np.zeros((len(scores), lengths.pop()))
    for i, system in enumerate(scores):
        x = np.asarray(system, dtype=np.float64)
        std = x.std()
        if std > 0:
            z[i] = (x - x.mean()) / std
    return z.mean(axis=0).tolist()


def average_ok_probs(systems: Sequence[Sequence[Sequence[float]]]) -> list[list[float]]:
    """Element-wise mean over systems of per-sample OK-probability lists."""
    if not systems:
        raise ValueError("need at least one system")
    n_samples = {len(s) for s in systems}
    if len(n_samples) != 1:
        raise ValueError("systems cover different numbers of samples")
    out = []
    for j in range(n_samples.pop()):
        rows = [system[j] for system in systems]
        if len({len(r) for r in rows}) != 1:
            raise ValueError(f"sample {j}: systems disagree on token count")
        out.append(np.mean(np.asarray(rows, dtype=np.float64), axis=0).tolist())
    return out


def ensemble_predictions(systems: Sequence[Sequence[Prediction]]) -> list[Prediction]:
    """z-score sentence scores and averaged OK-probabilities across systems."""
    if not systems:
        raise ValueError("need at least one system")
    ids = [p.id for p in systems[0]]
    for k, system in enumerate(systems[1:], 1):
        if [p.id for p in system] != ids:
            raise ValidationError(f"system {k} does not cover the same ids in the same order")
    scores = zscore_ensemble([[p.score for p in system] for system in systems])
    probs = average_ok_probs([[p.ok_probs for p in system] for system in systems])
    return [
        Prediction(rid, s, tuple(min(1.0, max(0.0, q)) for q in pr))
        for rid, s, pr in zip(ids, scores, probs)
    ]


def tag_by_threshold(probs: Sequence[float], eps_bad: float) -> tuple[str, ...]:
    return tuple(OK if p > eps_bad else BAD for p in probs)


def fine_tag(probs: Sequence[float], eps_minor: float, eps_major: float) -> tuple[Optional[Severity], ...]:
    """None for OK, else Minor or Major by the two thresholds."""
    if eps_major > eps_minor:
        raise ValueError("eps_major must not exceed eps_minor")
    out: list[Optional[Severity]] = []
    for p in probs:
        if p > eps_minor:
            out.append(None)
        elif p > eps_major:
            out.append(Severity.MINOR)
        else:
            out.append(Severity.MAJOR)
    return tuple(out)


def _merge(severities: list[Severity], rule: MergeRule) -> Severity:
    if rule is MergeRule.WORST:
        return max(severities)
    counts = Counter(severities)
    # most frequent; ties go to the worse severity
    return max(counts, key=lambda s: (counts[s], s.rank))


def assemble_spans(
    fine_tags: Sequence[Optional[Severity]],
    translation: TokenizedText,
    merge_rule: MergeRule | str = MergeRule.WORST,
) -> list[ErrorSpan]:
    """Merge maximal runs of non-OK tokens into character spans."""
    rule = MergeRule(merge_rule)
    if len(fine_tags) != len(translation):
        raise ValueError(f"{len(fine_tags)} tags for {len(translation)} tokens")
    spans = []
    run: list[int] = []
    for i, tag in enumerate(list(fine_tags) + [None]):
        if tag is not None:
            run.append(i)
            continue
        if run:
            sev = _merge([fine_tags[j] for j in run], rule)
            spans.append(ErrorSpan(translation.offsets[run[0]][0], translation.offsets[run[-1]][1], sev))
            run = []
    return spans


def predict_spans(
    probs: Sequence[float],
    translation: TokenizedText,
    eps_minor: float,
    eps_major: float,
    merge_rule: MergeRule | str = MergeRule.WORST,
) -> list[ErrorSpan]:
    return assemble_spans(fine_tag(probs, eps_minor, eps_major), translation, merge_rule)


def threshold_grid(step: float) -> list[float]:
    if not 0 < step <= 1:
        raise ValueError("grid step must lie in (0, 1]")
    n = int(round(1.0 / step))
    if abs(n * step - 1.0) > 1e-9:
        raise ValueError("grid step must divide 1")
    return [i / n for i in range(n + 1)]


def _distinct_points(grid: Sequence[float], probs: Sequence[Sequence[float]]) -> list[float]:
    """Ascending grid points, keeping only the smallest one per tagging outcome.

    Two thresholds tag identically when no probability lies in ``[a, b)``.
    """
    values = np.unique(np.concatenate([np.asarray(p, dtype=np.float64) for p in probs] + [np.empty(0)]))
    kept = []
    last_bucket = None
    for eps in sorted(grid):
        bucket = int(np.searchsorted(values, eps, side="right"))
        if bucket != last_bucket:
            kept.append(eps)
            last_bucket = bucket
    return kept


def search_bad_threshold(
    probs: Sequence[Sequence[float]],
    gold_tags: Sequence[Sequence[str]],
    grid: Sequence[float],
) -> tuple[float, float]:
    """(eps_bad, MCC) maximizing MCC; ties keep the smaller threshold."""
    if not probs:
        raise ValueError("empty dev set")
    best_eps, best = None, -np.inf
    for eps in _distinct_points(grid, probs):
        value = mcc([tag_by_threshold(p, eps) for p in probs], gold_tags)
        if value > best:
            best_eps, best = eps, value
    return best_eps, float(best)


def search_span_thresholds(
    probs: Sequence[Sequence[float]],
    translations: Sequence[TokenizedText],
    gold_spans: Sequence[Sequence[ErrorSpan]],
    grid: Sequence[float],
    mode: SpanMode | str = SpanMode.LENIENT,
    merge_rule: MergeRule | str = MergeRule.WORST,
) -> tuple[float, float, float]:
    """(eps_minor, eps_major, F1) maximizing span F1 over pairs with major <= minor.

    Ties keep the lexicographically smaller (minor, major) pair.
    """
    if not probs:
        raise ValueError("empty dev set")
    grid = _distinct_points(grid, probs)
    best = (None, None, -np.inf)
    for eps_minor in grid:
        for eps_major in grid:
            if eps_major > eps_minor:
                break
            pred = [
                predict_spans(p, t, eps_minor, eps_major, merge_rule)
                for p, t in zip(probs, translations)
            ]
            value = span_f1(pred, gold_spans, mode)
            if value > best[2]:
                best = (eps_minor, eps_major, value)
    return best[0], best[1], float(best[2])


def grid_search_thresholds(
    probs: Sequence[Sequence[float]],
    translations: Sequence[TokenizedText],
    gold_tags: Sequence[Sequence[str]],
    gold_spans: Optional[Sequence[Sequence[ErrorSpan]]] = None,
    step: float = 0.01,
    mode: SpanMode | str = SpanMode.LENIENT,
    merge_rule: MergeRule | str = MergeRule.WORST,
) -> tuple[Thresholds, dict]:
    """Tune eps_bad for MCC and (eps_minor, eps_major) for span F1 on a dev set."""
    if not probs:
        raise ValueError("empty dev set")
    grid = threshold_grid(step)
    eps_bad, best_mcc = search_bad_threshold(probs, gold_tags, grid)
    report = {"mcc": best_mcc}
    if gold_spans is None:
        return Thresholds(bad=eps_bad, minor=eps_bad, major=eps_bad), report
    eps_minor, eps_major, best_f1 = search_span_thresholds(
        probs, translations, gold_spans, grid, mode, merge_rule
    )
    report["span_f1"] = best_f1
    return Thresholds(bad=eps_bad, minor=eps_minor, major=eps_major), report
