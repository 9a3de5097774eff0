"""Empirical span-count, span-length and severity distributions.

Seeding: every record gets its own generator, seeded with
``record_seed(base_seed, record_id)`` (a 64-bit BLAKE2b digest of both), so
draws for a record never depend on processing order or worker count.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .corpus import QESample, Severity, ValidationError, span_token_indices
from .io_utils import atomic_write_json

STATS_FORMAT = "mqmqe-corruption-stats"
STATS_VERSION = 1

Value = Union[int, Severity]


def record_seed(base_seed: int, record_id: str) -> int:
    digest = hashlib.blake2b(
        f"{int(base_seed)}\x1f{record_id}".encode("utf-8"), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def record_rng(base_seed: int, record_id: str) -> np.random.Generator:
    return make_rng(record_seed(base_seed, record_id))


@dataclass(frozen=True)
class CategoricalDist:
    support: tuple
    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.support) != len(self.probs):
            raise ValidationError("support and probs differ in length")
        if not self.support:
            raise ValidationError("empty distribution")
        if len(set(self.support)) != len(self.support):
            raise ValidationError("support values must be distinct")
        if any(p < 0 for p in self.probs):
            raise ValidationError("negative probability")
        if abs(sum(self.probs) - 1.0) > 1e-9:
            raise ValidationError(f"probabilities sum to {sum(self.probs)!r}, not 1")

    @classmethod
    def from_counts(cls, counts: Counter) -> "CategoricalDist":
        total = sum(counts.values())
        if total == 0:
            raise ValidationError("no observations")
        support = tuple(sorted(counts, key=_sort_key))
        return cls(support, tuple(counts[v] / total for v in support))

    def as_dict(self) -> dict:
        return dict(zip(self.support, self.probs))


def _sort_key(value: Value):
    return value.rank if isinstance(value, Severity) else value


def sample_categorical(dist: CategoricalDist, rng: np.random.Generator):
    """Inverse-CDF draw using one uniform from ``rng``."""
    u = rng.random()
    acc = 0.0
    for value, p in zip(dist.support, dist.probs):
        acc += p
        if u < acc:
            return value
    # rounding can leave acc slightly below 1
    for value, p in zip(reversed(dist.support), reversed(dist.probs)):
        if p > 0:
            return value
    raise AssertionError("unreachable: distribution has no mass")


@dataclass(frozen=True)
class CorruptionStats:
    span_count_dist: CategoricalDist
    span_length_dist: CategoricalDist
    severity_dist: CategoricalDist

    def __post_init__(self) -> None:
        if any(not isinstance(v, int) or v < 0 for v in self.span_count_dist.support):
            raise ValidationError("span counts must be non-negative integers")
        if any(not isinstance(v, int) or v < 1 for v in self.span_length_dist.support):
            raise ValidationError("span lengths must be positive integers")
        if any(not isinstance(v, Severity) for v in self.severity_dist.support):
            raise ValidationError("severity distribution support must be severities")

    def to_json(self) -> dict:
        return {
            "format": STATS_FORMAT,
            "version": STATS_VERSION,
            "span_count": {str(k): p for k, p in zip(self.span_count_dist.support, self.span_count_dist.probs)},
            "span_length": {str(k): p for k, p in zip(self.span_length_dist.support, self.span_length_dist.probs)},
            "severity": {k.value: p for k, p in zip(self.severity_dist.support, self.severity_dist.probs)},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CorruptionStats":
        if obj.get("format") != STATS_FORMAT:
            raise ValidationError(f"not a stats document (format={obj.get('format')!r})")
        if obj.get("version") != STATS_VERSION:
            raise ValidationError(f"unsupported stats version {obj.get('version')!r}")
        try:
            counts = obj["span_count"]
            lengths = obj["span_length"]
            sevs = obj["severity"]
        except KeyError as exc:
            raise ValidationError(f"stats document lacks {exc.args[0]!r}") from None
        return cls(
            _dist_from_mapping(counts, int),
            _dist_from_mapping(lengths, int),
            _dist_from_mapping(sevs, Severity.parse),
        )


def _dist_from_mapping(mapping: dict, parse) -> CategoricalDist:
    try:
        items = sorted(((parse(k), float(v)) for k, v in mapping.items()), key=lambda kv: _sort_key(kv[0]))
    except ValueError as exc:
        raise ValidationError(f"bad distribution entry: {exc}") from None
    return CategoricalDist(tuple(k for k, _ in items), tuple(v for _, v in items))


def estimate_stats(samples: Sequence[QESample]) -> CorruptionStats:
    """Empirical distributions of spans per sample, span length in tokens, and severity."""
    if not samples:
        raise ValidationError("cannot estimate statistics from an empty sample list")
    n_spans: Counter = Counter()
    lengths: Counter = Counter()
    severities: Counter = Counter()
    for sample in samples:
        if sample.spans is None:
            raise ValidationError(f"record {sample.id} has no span annotation")
        n_spans[len(sample.spans)] += 1
        for span in sample.spans:
            lengths[len(span_token_indices(sample.translation, span))] += 1
            severities[span.severity] += 1
    if not lengths:
        raise ValidationError("no spans to estimate length/severity")
    return CorruptionStats(
        CategoricalDist.from_counts(n_spans),
        CategoricalDist.from_counts(lengths),
        CategoricalDist.from_counts(severities),
    )


def default_stats() -> CorruptionStats:
    """Synthetic defaults shipped with the package (not estimated from real annotations)."""
    text = resources.files("mqmqe").joinpath("data/default_stats.json").read_text(encoding="utf-8")
    return CorruptionStats.from_json(json.loads(text))


def load_stats(path: str | Path) -> CorruptionStats:
    with open(path, encoding="utf-8") as f:
        try:
            obj = json.load(f)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: malformed stats file ({exc.msg})") from None
    return CorruptionStats.from_json(obj)


def save_stats(stats: CorruptionStats, path: str | Path) -> None:
    atomic_write_json(path, stats.to_json())


def empirical_frequencies(values: Iterable) -> dict:
    counts = Counter(values)
    total = sum(counts.values())
    return {k: c / total for k, c in counts.items()}
