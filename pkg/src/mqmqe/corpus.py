"""Core records: tokenized text with character offsets, MQM scoring, tags and spans.

Character offsets count Unicode code points (Python ``str`` indices), not
UTF-8 bytes, and spans are end-exclusive: ``raw[start:end]``.
"""

from __future__ import annotations

import enum
import functools
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

OK = "OK"
BAD = "BAD"
MASK = "<mask>"

_TOKEN_RE = re.compile(r"\S+")


class ValidationError(ValueError):
    """Input data violates a record invariant."""


@functools.total_ordering
class Severity(enum.Enum):
    MINOR = "minor"
    MAJOR = "major"
    CRITICAL = "critical"

    @property
    def penalty(self) -> int:
        return _PENALTY[self]

    @property
    def rank(self) -> int:
        return _RANK[self]

    @classmethod
    def parse(cls, name: str) -> "Severity":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValidationError(f"unknown severity {name!r}") from None

    def __lt__(self, other: "Severity") -> bool:
        if not isinstance(other, Severity):
            return NotImplemented
        return self.rank < other.rank


_PENALTY = {Severity.MINOR: 1, Severity.MAJOR: 5, Severity.CRITICAL: 10}
_RANK = {Severity.MINOR: 0, Severity.MAJOR: 1, Severity.CRITICAL: 2}


@dataclass(frozen=True)
class TokenizedText:
    raw: str
    tokens: tuple[str, ...]
    offsets: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.offsets):
            raise ValidationError("tokens and offsets differ in length")
        prev_end = 0
        for tok, (start, end) in zip(self.tokens, self.offsets):
            if start < prev_end or end <= start or self.raw[start:end] != tok:
                raise ValidationError(f"offset ({start}, {end}) does not slice token {tok!r}")
            prev_end = end

    def __len__(self) -> int:
        return len(self.tokens)


def tokenize(text: str) -> TokenizedText:
    """Split on whitespace, keeping code-point offsets into ``text``."""
    tokens = []
    offsets = []
    for m in _TOKEN_RE.finditer(text):
        tokens.append(m.group())
        offsets.append((m.start(), m.end()))
    return TokenizedText(text, tuple(tokens), tuple(offsets))


def detokenize(tokens: Iterable[str]) -> str:
    return " ".join(tokens)


def normalize_whitespace(text: str) -> str:
    return " ".join(_TOKEN_RE.findall(text))


def from_tokens(tokens: Sequence[str]) -> TokenizedText:
    """Build a TokenizedText whose raw text is the single-space join of ``tokens``."""
    for tok in tokens:
        if not tok or _TOKEN_RE.fullmatch(tok) is None:
            raise ValidationError(f"token {tok!r} is empty or contains whitespace")
    return tokenize(detokenize(tokens))


def mqm_score(n_minor: int, n_major: int, n_critical: int, n: int) -> float:
    """Length-normalized MQM score; negative when penalties exceed ``n``."""
    if n <= 0:
        raise ValueError("empty translation")
    if min(n_minor, n_major, n_critical) < 0:
        raise ValueError("severity counts must be non-negative")
    penalty = n_minor + 5 * n_major + 10 * n_critical
    # (n - p) / n rounds once; 1 - p / n would give -0.6000000000000001 for p=16, n=10
    return (n - penalty) / n


def severity_counts(severities: Iterable[Severity]) -> tuple[int, int, int]:
    counts = {s: 0 for s in Severity}
    for s in severities:
        counts[s] += 1
    return counts[Severity.MINOR], counts[Severity.MAJOR], counts[Severity.CRITICAL]


@dataclass(frozen=True)
class ErrorSpan:
    start: int
    end: int
    severity: Severity

    def encode(self) -> str:
        return f"{self.start}:{self.end}:{self.severity.value}"

    @classmethod
    def decode(cls, text: str) -> "ErrorSpan":
        parts = text.split(":")
        if len(parts) != 3:
            raise ValidationError(f"span {text!r} is not start:end:severity")
        try:
            start, end = int(parts[0]), int(parts[1])
        except ValueError:
            raise ValidationError(f"span {text!r} has non-integer bounds") from None
        return cls(start, end, Severity.parse(parts[2]))


def check_spans(spans: Sequence[ErrorSpan], length: int) -> None:
    """Raise unless spans are in bounds, sorted and pairwise disjoint."""
    prev_end = 0
    for span in spans:
        if not 0 <= span.start < span.end <= length:
            raise ValidationError(f"span {span.encode()} out of bounds for text of length {length}")
        if span.start < prev_end:
            raise ValidationError(f"span {span.encode()} overlaps or is out of order")
        prev_end = span.end


def tags_from_spans(translation: TokenizedText, spans: Sequence[ErrorSpan]) -> tuple[str, ...]:
    """BAD for every token whose character range overlaps a span."""
    check_spans(spans, len(translation.raw))
    tags = []
    for start, end in translation.offsets:
        bad = any(start < s.end and s.start < end for s in spans)
        tags.append(BAD if bad else OK)
    return tuple(tags)


def span_token_indices(translation: TokenizedText, span: ErrorSpan) -> list[int]:
    return [
        i for i, (start, end) in enumerate(translation.offsets)
        if start < span.end and span.start < end
    ]


@dataclass(frozen=True)
class QESample:
    id: str
    source: str
    translation: TokenizedText
    tags: Optional[tuple[str, ...]] = None
    mqm_score: Optional[float] = None
    spans: Optional[tuple[ErrorSpan, ...]] = None

    def __post_init__(self) -> None:
        if self.tags is not None:
            if len(self.tags) != len(self.translation):
                raise ValidationError(
                    f"record {self.id}: {len(self.tags)} tags for {len(self.translation)} tokens"
                )
            bad = set(self.tags) - {OK, BAD}
            if bad:
                raise ValidationError(f"record {self.id}: unknown tags {sorted(bad)}")
        if self.spans is not None:
            try:
                check_spans(self.spans, len(self.translation.raw))
            except ValidationError as exc:
                raise ValidationError(f"record {self.id}: {exc}") from None
            if self.tags is not None and self.tags != tags_from_spans(self.translation, self.spans):
                raise ValidationError(f"record {self.id}: tags inconsistent with spans")

    @property
    def mt(self) -> str:
        return self.translation.raw

    def to_json(self) -> dict:
        record: dict = {"id": self.id, "src": self.source, "mt": self.translation.raw}
        if self.tags is not None:
            record["tags"] = " ".join(self.tags)
        if self.mqm_score is not None:
            record["score"] = self.mqm_score
        if self.spans is not None:
            record["spans"] = [s.encode() for s in self.spans]
        return record

    @classmethod
    def from_json(cls, record: dict) -> "QESample":
        try:
            rid = str(record["id"])
            src = record["src"]
            mt = record["mt"]
        except KeyError as exc:
            raise ValidationError(f"missing field {exc.args[0]!r}") from None
        tags = record.get("tags")
        if isinstance(tags, str):
            tags = tuple(tags.split())
        elif tags is not None:
            tags = tuple(tags)
        score = record.get("score")
        spans = record.get("spans")
        if spans is not None:
            spans = tuple(ErrorSpan.decode(s) for s in spans)
        return cls(
            id=rid,
            source=src,
            translation=tokenize(mt),
            tags=tags,
            mqm_score=None if score is None else float(score),
            spans=spans,
        )


def read_jsonl(path: str | Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{lineno}: malformed record ({exc.msg})") from None
            if not isinstance(record, dict):
                raise ValidationError(f"{path}:{lineno}: record is not an object")
            records.append(record)
    return records


def dump_jsonl_lines(records: Iterable[dict]) -> str:
    return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records)


def read_qe_jsonl(path: str | Path) -> list[QESample]:
    samples = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                samples.append(QESample.from_json(json.loads(line)))
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{lineno}: malformed record ({exc.msg})") from None
            except ValidationError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
    return samples


def write_qe_jsonl(samples: Iterable[QESample], path: str | Path) -> None:
    from .io_utils import atomic_write_text

    atomic_write_text(path, dump_jsonl_lines(s.to_json() for s in samples))


def read_parallel_tsv(path: str | Path) -> list[tuple[str, str]]:
    """Read ``source<TAB>target`` lines."""
    pairs = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValidationError(f"{path}:{lineno}: expected source<TAB>target")
            pairs.append((parts[0], parts[1]))
    return pairs
