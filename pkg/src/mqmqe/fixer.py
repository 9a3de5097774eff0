"""Fill masked positions with plausible wrong tokens.

A sampler returns the top-k candidates for one masked position. Graver
severities draw from a wider top-k pool, so they land on less probable
tokens. Two samplers are provided: a stupid-backoff n-gram LM trained on
target text, and a subprocess speaking a line-delimited JSON protocol.
"""

from __future__ import annotations

import enum
import json
import queue
import shlex
import subprocess
import threading
from collections import Counter, OrderedDict, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol, Sequence

import numpy as np

from .corpus import MASK, QESample, Severity, ValidationError, from_tokens
from .corruptor import CorruptionPlan, MaskedTranslation
from .io_utils import atomic_write_json

BOS = "<s>"
EOS = "</s>"
SPECIAL = frozenset({BOS, EOS, MASK})
BACKOFF = 0.4
LM_FORMAT = "mqmqe-ngram-lm"
LM_VERSION = 1


class SamplerError(RuntimeError):
    """The sampler failed or broke protocol."""


class FillMode(enum.Enum):
    LEFT_TO_RIGHT = "left_to_right"
    PARALLEL = "parallel"


DEFAULT_K = {Severity.MINOR: 2, Severity.MAJOR: 10, Severity.CRITICAL: 100}


@dataclass(frozen=True)
class SeverityKMap:
    ks: dict = field(default_factory=lambda: dict(DEFAULT_K))

    def __post_init__(self) -> None:
        for sev in Severity:
            if sev not in self.ks:
                raise ValidationError(f"no k for severity {sev.value}")
            if self.ks[sev] < 2:
                raise ValidationError(f"k for {sev.value} must be at least 2")

    def __getitem__(self, severity: Severity) -> int:
        return self.ks[severity]

    @classmethod
    def from_values(cls, minor: int = 2, major: int = 10, critical: int = 100) -> "SeverityKMap":
        return cls({Severity.MINOR: minor, Severity.MAJOR: major, Severity.CRITICAL: critical})


@dataclass(frozen=True)
class FillRequest:
    source: str
    context: tuple[str, ...]
    target_position: int
    mode: FillMode = FillMode.LEFT_TO_RIGHT

    def __post_init__(self) -> None:
        if not 0 <= self.target_position < len(self.context):
            raise ValidationError("target position outside the context")
        if self.context[self.target_position] != MASK:
            raise ValidationError("target position does not hold the mask symbol")

    def to_json(self, k: int) -> dict:
        return {
            "src": self.source,
            "ctx": list(self.context),
            "pos": self.target_position,
            "mode": self.mode.value,
            "k": k,
        }


@dataclass(frozen=True)
class CandidateSet:
    tokens: tuple[str, ...]
    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.probs):
            raise SamplerError("candidate tokens and probs differ in length")
        if any(p <= 0 for p in self.probs):
            raise SamplerError("candidate probabilities must be positive")
        if any(a < b for a, b in zip(self.probs, self.probs[1:])):
            raise SamplerError("candidate probabilities must be descending")

    def __len__(self) -> int:
        return len(self.tokens)


class Sampler(Protocol):
    def candidates(self, request: FillRequest, k: int) -> CandidateSet: ...

    def vocabulary(self) -> Optional[Sequence[str]]: ...


def top_k(sampler: Sampler, request: FillRequest, k: int) -> CandidateSet:
    """The sampler's k most probable tokens for the masked position."""
    if k < 1:
        raise ValueError("k must be at least 1")
    cands = sampler.candidates(request, k)
    if len(cands) > k:
        raise SamplerError(f"sampler returned {len(cands)} candidates for k={k}")
    return cands


class NgramLm:
    """Word n-gram LM with stupid backoff, renormalized over the vocabulary.

    Raw stupid-backoff scores are ``c(h w) / c(h)`` when the n-gram was seen
    and ``0.4 * S(w | h')`` otherwise; dividing by their sum over the
    vocabulary makes each conditional a proper distribution.
    """

    def __init__(self, order: int, counts: dict[int, dict[tuple, Counter]]):
        if order < 1:
            raise ValueError("order must be at least 1")
        self.order = order
        self.counts = counts
        unigrams = counts[1][()]
        self.vocab = tuple(sorted(w for w in unigrams if w not in SPECIAL))
        if not self.vocab:
            raise ValidationError("language model has an empty vocabulary")
        self.index = {w: i for i, w in enumerate(self.vocab)}
        uni = np.array([unigrams[w] for w in self.vocab], dtype=np.float64)
        self._unigram = uni / uni.sum()
        self._context_totals = {
            n: {h: sum(c.values()) for h, c in table.items()} for n, table in counts.items()
        }
        self._cache: OrderedDict = OrderedDict()

    def vocabulary(self) -> Sequence[str]:
        return self.vocab

    def distribution(self, context: Sequence[str]) -> np.ndarray:
        """P(w | last ``order - 1`` tokens of ``context``) as a vector over ``vocab``."""
        hist = tuple(context[-(self.order - 1):]) if self.order > 1 else ()
        hist = (BOS,) * (self.order - 1 - len(hist)) + hist
        cached = self._cache.get(hist)
        if cached is not None:
            self._cache.move_to_end(hist)
            return cached
        scores = self._unigram.copy()
        for n in range(2, self.order + 1):
            h = hist[len(hist) - (n - 1):]
            scores *= BACKOFF
            seen = self.counts.get(n, {}).get(h)
            if not seen:
                continue
            total = self._context_totals[n][h]
            for w, c in seen.items():
                i = self.index.get(w)
                if i is not None:
                    scores[i] = c / total
        probs = scores / scores.sum()
        self._cache[hist] = probs
        if len(self._cache) > 50_000:
            self._cache.popitem(last=False)
        return probs

    def candidates(self, request: FillRequest, k: int) -> CandidateSet:
        left = request.context[:request.target_position]
        probs = self.distribution(left)
        # descending probability, ties by token (vocab is sorted, so stable sort keeps lexicographic order)
        order = np.argsort(-probs, kind="stable")[:k]
        return CandidateSet(tuple(self.vocab[i] for i in order), tuple(float(probs[i]) for i in order))

    def to_json(self) -> dict:
        tables = {}
        for n, table in sorted(self.counts.items()):
            rows = []
            for h in sorted(table):
                for w in sorted(table[h]):
                    rows.append([*h, w, table[h][w]])
            tables[str(n)] = rows
        return {"format": LM_FORMAT, "version": LM_VERSION, "order": self.order, "counts": tables}

    @classmethod
    def from_json(cls, obj: dict) -> "NgramLm":
        if obj.get("format") != LM_FORMAT:
            raise ValidationError(f"not a language model file (format={obj.get('format')!r})")
        if obj.get("version") != LM_VERSION:
            raise ValidationError(f"unsupported language model version {obj.get('version')!r}")
        order = int(obj["order"])
        counts: dict[int, dict[tuple, Counter]] = {}
        for n_str, rows in obj["counts"].items():
            n = int(n_str)
            table: dict[tuple, Counter] = defaultdict(Counter)
            for row in rows:
                table[tuple(row[:n - 1])][row[n - 1]] = int(row[n])
            counts[n] = dict(table)
        return cls(order, counts)

    def save(self, path: str | Path) -> None:
        atomic_write_json(path, self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "NgramLm":
        with open(path, encoding="utf-8") as f:
            try:
                return cls.from_json(json.load(f))
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}: malformed language model ({exc.msg})") from None


def train_ngram_lm(corpus: Sequence[Sequence[str]], order: int = 3) -> NgramLm:
    """Count n-grams of every order up to ``order`` with ``<s>``/``</s>`` padding."""
    if not corpus:
        raise ValidationError("cannot train a language model on an empty corpus")
    if order < 1:
        raise ValueError("order must be at least 1")
    counts: dict[int, dict[tuple, Counter]] = {n: defaultdict(Counter) for n in range(1, order + 1)}
    for sentence in corpus:
        padded = [BOS] * (order - 1) + list(sentence) + [EOS]
        for i in range(order - 1, len(padded)):
            for n in range(1, order + 1):
                counts[n][tuple(padded[i - n + 1:i])][padded[i]] += 1
    return NgramLm(order, {n: dict(t) for n, t in counts.items()})


class ExternalSampler:
    """Sampler backed by a child process.

    One JSON request per line goes to the child's stdin
    (``{"src", "ctx", "pos", "mode", "k"}``) and one JSON response per line is
    read back (``{"tokens": [...], "probs": [...]}``). Not shareable across
    workers; each worker starts its own.
    """

    def __init__(self, command: str | Sequence[str], timeout: float = 30.0,
                 vocab: Optional[Sequence[str]] = None):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout
        self._vocab = tuple(vocab) if vocab is not None else None
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise SamplerError(f"cannot start sampler {argv!r}: {exc}") from exc
        self._lines: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self) -> None:
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def vocabulary(self) -> Optional[Sequence[str]]:
        return self._vocab

    def candidates(self, request: FillRequest, k: int) -> CandidateSet:
        if self._proc.poll() is not None:
            raise SamplerError(f"sampler terminated (exit status {self._proc.returncode})")
        try:
            self._proc.stdin.write(json.dumps(request.to_json(k), ensure_ascii=False) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError):
            raise SamplerError("sampler terminated (broken pipe)") from None
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise SamplerError(f"sampler timed out after {self.timeout} s") from None
        if line is None:
            self._proc.wait()
            raise SamplerError(f"sampler terminated (exit status {self._proc.returncode})")
        try:
            obj = json.loads(line)
            tokens = obj["tokens"]
            probs = obj["probs"]
            if not isinstance(tokens, list) or not isinstance(probs, list):
                raise TypeError("tokens and probs must be arrays")
            if any(not isinstance(t, str) or not t or any(ch.isspace() for ch in t) for t in tokens):
                raise TypeError("tokens must be non-empty strings without whitespace")
            cands = CandidateSet(tuple(tokens), tuple(float(p) for p in probs))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError, SamplerError) as exc:
            raise SamplerError(f"sampler protocol error: {exc} in {line.strip()[:200]!r}") from None
        return cands

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self) -> "ExternalSampler":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def external_sampler(command: str | Sequence[str], timeout: float = 30.0,
                     vocab: Optional[Sequence[str]] = None) -> ExternalSampler:
    return ExternalSampler(command, timeout=timeout, vocab=vocab)


@dataclass(frozen=True)
class FillTrace:
    position: int
    severity: Severity
    reference: Optional[str]
    pool: tuple[str, ...]
    chosen: str
    fallback: bool


@dataclass(frozen=True)
class FillResult:
    tokens: tuple[str, ...]
    trace: tuple[FillTrace, ...]


def fill_tokens(
    masked: MaskedTranslation,
    sampler: Sampler,
    kmap: SeverityKMap,
    rng: np.random.Generator,
    source: str = "",
    mode: FillMode = FillMode.LEFT_TO_RIGHT,
) -> FillResult:
    """Replace every mask, recording each choice and its candidate pool."""
    owner: dict[int, Severity] = {}
    for positions, severity in zip(masked.mask_positions, masked.severities):
        for pos in positions:
            owner[pos] = severity
    positions = sorted(owner)
    tokens = list(masked.tokens)
    original_ctx = tuple(masked.tokens)

    pools: dict[int, CandidateSet] = {}
    if mode is FillMode.PARALLEL:
        for pos in positions:
            pools[pos] = top_k(sampler, FillRequest(source, original_ctx, pos, mode), kmap[owner[pos]])

    trace = []
    for pos in positions:
        severity = owner[pos]
        if mode is FillMode.LEFT_TO_RIGHT:
            request = FillRequest(source, tuple(tokens), pos, mode)
            cands = top_k(sampler, request, kmap[severity])
        else:
            cands = pools[pos]
        ref = masked.reference_tokens[pos]
        pool = tuple(t for t in cands.tokens if t != ref and t not in SPECIAL)
        fallback = False
        if pool:
            chosen = pool[int(rng.integers(len(pool)))]
        else:
            vocab = sampler.vocabulary()
            if vocab is None:
                raise SamplerError(f"no candidate other than the reference at position {pos}")
            others = [t for t in vocab if t != ref and t not in SPECIAL]
            if not others:
                raise ValidationError("vocabulary has a single token; cannot sample an error")
            chosen = others[int(rng.integers(len(others)))]
            fallback = True
        tokens[pos] = chosen
        trace.append(FillTrace(pos, severity, ref, pool, chosen, fallback))
    return FillResult(tuple(tokens), tuple(trace))


def fill_masks(
    record_id: str,
    source: str,
    masked: MaskedTranslation,
    plan: Optional[CorruptionPlan],
    sampler: Sampler,
    kmap: SeverityKMap,
    rng: np.random.Generator,
    mode: FillMode = FillMode.LEFT_TO_RIGHT,
) -> QESample:
    """Fill all masks and return the finished pseudo QE record."""
    if plan is not None and len(plan.spans) != len(masked.mask_positions):
        raise ValidationError(f"record {record_id}: plan and masked translation disagree")
    result = fill_tokens(masked, sampler, kmap, rng, source=source, mode=mode)
    translation = from_tokens(result.tokens)
    return QESample(
        id=record_id,
        source=source,
        translation=translation,
        tags=masked.gold_tags,
        mqm_score=masked.pseudo_mqm,
        spans=masked.error_spans(translation),
    )
