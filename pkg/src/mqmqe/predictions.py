"""Per-record model outputs and the prediction / span-submission file formats.

Prediction file: ``id<TAB>score<TAB>p1 p2 ... pn`` per line.
Span file: ``id`` followed by one ``start:end:severity`` field per span, tab-separated.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import ErrorSpan, ValidationError
from .io_utils import atomic_write_text


@dataclass(frozen=True)
class Prediction:
    """Sentence score and per-token OK probabilities for one record."""

    id: str
    score: float
    ok_probs: tuple[float, ...]

    def __post_init__(self) -> None:
        if any(not 0.0 <= p <= 1.0 for p in self.ok_probs):
            raise ValidationError(f"record {self.id}: OK probabilities must lie in [0, 1]")


def format_predictions(preds: Iterable[Prediction]) -> str:
    lines = []
    for p in preds:
        lines.append(f"{p.id}\t{p.score!r}\t{' '.join(repr(q) for q in p.ok_probs)}\n")
    return "".join(lines)


def write_predictions(preds: Iterable[Prediction], path: str | Path) -> None:
    atomic_write_text(path, format_predictions(preds))


def read_predictions(path: str | Path) -> list[Prediction]:
    preds = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValidationError(f"{path}:{lineno}: expected id<TAB>score<TAB>probs")
            try:
                probs = tuple(float(x) for x in parts[2].split())
                preds.append(Prediction(parts[0], float(parts[1]), probs))
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
    return preds


def format_spans(ids: Sequence[str], spans: Sequence[Sequence[ErrorSpan]]) -> str:
    return "".join(
        "\t".join([rid] + [s.encode() for s in sample_spans]) + "\n"
        for rid, sample_spans in zip(ids, spans)
    )


def write_spans(ids: Sequence[str], spans: Sequence[Sequence[ErrorSpan]], path: str | Path) -> None:
    atomic_write_text(path, format_spans(ids, spans))


def read_spans(path: str | Path) -> dict[str, list[ErrorSpan]]:
    out: dict[str, list[ErrorSpan]] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            try:
                out[parts[0]] = [ErrorSpan.decode(p) for p in parts[1:] if p]
            except ValidationError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
    return out
