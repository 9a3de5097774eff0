"""Synthetic parallel corpora and a planted translation-noise process.

The target language is a sparse bigram Markov chain over generated
pseudo-words; the source side is a word-for-word relabelling. "Real" QE
data is made by replacing token spans of a reference with uniformly random
vocabulary words, which gives a ground truth that no component of the
pseudo-data pipeline has seen.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .corpus import QESample, Severity, from_tokens
from .corruptor import apply_corruption, plan_corruption
from .stats import CategoricalDist, CorruptionStats, make_rng, record_rng

_ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sch", "st"]
_VOWELS = ["a", "e", "i", "o", "u", "ei", "au", "ü", "ö"]

# noise statistics of the planted process; deliberately unlike the shipped defaults
TRUE_STATS = CorruptionStats(
    CategoricalDist((0, 1, 2, 3), (0.25, 0.40, 0.25, 0.10)),
    CategoricalDist((1, 2, 3), (0.55, 0.30, 0.15)),
    CategoricalDist((Severity.MINOR, Severity.MAJOR, Severity.CRITICAL), (0.40, 0.50, 0.10)),
)


def _pseudo_words(rng: np.random.Generator, count: int, prefix: str = "") -> list[str]:
    words: set[str] = set()
    out = []
    while len(out) < count:
        n_syl = int(rng.integers(1, 4))
        w = prefix + "".join(
            _ONSETS[int(rng.integers(len(_ONSETS)))] + _VOWELS[int(rng.integers(len(_VOWELS)))]
            for _ in range(n_syl)
        )
        if w not in words:
            words.add(w)
            out.append(w)
    return out


@dataclass
class ToyWorld:
    """Bigram chain over ``vocab_size`` target words, each with ``branching`` successors."""

    seed: int = 1
    vocab_size: int = 80
    branching: int = 3
    min_len: int = 8
    max_len: int = 18

    def __post_init__(self) -> None:
        rng = make_rng(self.seed)
        self.target_vocab = _pseudo_words(rng, self.vocab_size)
        self.source_vocab = _pseudo_words(rng, self.vocab_size, prefix="q")
        self.to_source = dict(zip(self.target_vocab, self.source_vocab))
        self.index = {w: i for i, w in enumerate(self.target_vocab)}
        self.successors = [
            rng.choice(self.vocab_size, size=self.branching, replace=False) for _ in range(self.vocab_size)
        ]
        self.successor_probs = [rng.dirichlet(np.ones(self.branching)) for _ in range(self.vocab_size)]

    def sentence(self, rng: np.random.Generator) -> list[str]:
        length = int(rng.integers(self.min_len, self.max_len + 1))
        w = int(rng.integers(self.vocab_size))
        out = [w]
        for _ in range(length - 1):
            w = int(rng.choice(self.successors[w], p=self.successor_probs[w]))
            out.append(w)
        return [self.target_vocab[i] for i in out]

    def parallel_corpus(self, n: int, seed: int = 0) -> list[tuple[str, str]]:
        rng = make_rng(seed)
        pairs = []
        for _ in range(n):
            tgt = self.sentence(rng)
            src = [self.to_source[w] for w in tgt]
            pairs.append((" ".join(src), " ".join(tgt)))
        return pairs

    def planted_noise(
        self,
        record_id: str,
        source: str,
        reference: str,
        seed: int = 0,
        stats: Optional[CorruptionStats] = None,
        fluent_rate: float = 0.0,
    ) -> QESample:
        """Replace planned spans with wrong words (no insert/delete).

        With probability ``fluent_rate`` a replacement is a chain successor
        of the preceding output word (fluent but wrong, as MT errors often
        are); otherwise it is uniform over the vocabulary.
        """
        rng = record_rng(seed, record_id)
        ref = reference.split()
        plan = plan_corruption(len(ref), stats or TRUE_STATS, (0.0, 0.0), rng)
        masked = apply_corruption(ref, plan, rng)
        tokens = list(masked.tokens)
        for positions in masked.mask_positions:
            for pos in positions:
                orig = masked.reference_tokens[pos]
                w = None
                if pos > 0 and rng.random() < fluent_rate:
                    prev = self.index[tokens[pos - 1]]
                    options = [self.target_vocab[j] for j in self.successors[prev] if self.target_vocab[j] != orig]
                    if options:
                        w = options[int(rng.integers(len(options)))]
                while w is None or w == orig:
                    w = self.target_vocab[int(rng.integers(self.vocab_size))]
                tokens[pos] = w
        translation = from_tokens(tokens)
        return QESample(
            id=record_id,
            source=source,
            translation=translation,
            tags=masked.gold_tags,
            mqm_score=masked.pseudo_mqm,
            spans=masked.error_spans(translation),
        )

    def qe_dataset(
        self, pairs: list[tuple[str, str]], prefix: str, seed: int = 0, fluent_rate: float = 0.0
    ) -> list[QESample]:
        return [
            self.planted_noise(f"{prefix}{i}", src, tgt, seed, fluent_rate=fluent_rate)
            for i, (src, tgt) in enumerate(pairs)
        ]
