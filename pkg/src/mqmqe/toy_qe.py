"""Desk-scale joint sentence/word QE model.

A fixed hashed-feature encoder stands in for a pretrained cross-lingual
transformer; only the two output heads are trained:

* score head: ``m_hat = sigma(w_s . mean_i(H_i) + b_s)`` with sigma in {sigmoid, none}
* tag head: ``p_i = softmax(W_t H_i + b_t)[OK]``

Training minimizes ``L_CE + alpha * L_MSE + beta * L_Rank`` with plain
mini-batch gradient descent and early stopping on validation Spearman.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels
from .corpus import BAD, OK, QESample, ValidationError
from .ensemble import tag_by_threshold
from .io_utils import atomic_write_json
from .metrics import UndefinedCorrelation, mcc, spearman
from .predictions import Prediction
from .stats import make_rng

CHECKPOINT_FORMAT = "mqmqe-qe-checkpoint"
CHECKPOINT_VERSION = 1
OK_INDEX, BAD_INDEX = 0, 1
PROB_FLOOR = 1e-12
SIGMAS = ("sigmoid", "none")
SELECT_METRICS = ("spearman", "mcc", "sum")


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""


@dataclass(frozen=True)
class EncoderConfig:
    dim: int = 128
    window: int = 1
    hash_seed: int = 0
    char_trigrams: bool = True

    def __post_init__(self) -> None:
        if self.dim < 2:
            raise ValidationError("encoder dim must be at least 2")
        if self.window < 0:
            raise ValidationError("encoder window must be non-negative")


def word_keys(word: str, config: EncoderConfig) -> list[str]:
    """Sub-word keys whose embeddings are averaged into the word vector."""
    if not config.char_trigrams:
        return [f"w:{word}"]
    padded = f"#{word}#"
    return [f"t:{padded[i:i + 3]}" for i in range(len(padded) - 2)]


def context_keys(tokens: Sequence[str], i: int, window: int) -> list[str]:
    """Keys pairing token ``i`` with each neighbour at relative offset ``o``."""
    keys = []
    for o in range(-window, window + 1):
        if o == 0:
            continue
        j = i + o
        if j < 0:
            neighbour = "<s>"
        elif j >= len(tokens):
            neighbour = "</s>"
        else:
            neighbour = tokens[j]
        keys.append(f"n{o}:{neighbour}|{tokens[i]}")
    return keys


class Encoder:
    """Fixed hashed-feature encoder with a per-key embedding cache.

    Every key maps to a sign vector of norm 1. Word vector ``i`` is the mean
    of its trigram embeddings, plus one embedding per (offset, neighbour,
    word) triple within the window, plus the mean of the source word
    embeddings.
    """

    def __init__(self, config: EncoderConfig = EncoderConfig()):
        self.config = config
        self._cache: dict[str, np.ndarray] = {}

    def embed(self, keys: Sequence[str]) -> np.ndarray:
        missing = [k for k in dict.fromkeys(keys) if k not in self._cache]
        if missing:
            rows = kernels.embed_keys([k.encode("utf-8") for k in missing], self.config.hash_seed, self.config.dim)
            for k, row in zip(missing, rows):
                self._cache[k] = row
        if not keys:
            return np.zeros((0, self.config.dim))
        return np.stack([self._cache[k] for k in keys])

    def source_vector(self, source: str) -> np.ndarray:
        words = source.split()
        if not words:
            return np.zeros(self.config.dim)
        return self.embed([f"s:{w}" for w in words]).mean(axis=0)

    def encode_tokens(self, source: str, tokens: Sequence[str]) -> np.ndarray:
        if not tokens:
            raise ValidationError("cannot encode an empty translation")
        cfg = self.config
        out = np.empty((len(tokens), cfg.dim))
        src = self.source_vector(source)
        for i, tok in enumerate(tokens):
            vec = self.embed(word_keys(tok, cfg)).mean(axis=0)
            if cfg.window:
                vec = vec + self.embed(context_keys(tokens, i, cfg.window)).sum(axis=0)
            out[i] = vec + src
        return out

    def encode(self, sample: QESample) -> np.ndarray:
        if len(sample.translation) == 0:
            raise ValidationError(f"record {sample.id}: empty translation")
        return self.encode_tokens(sample.source, sample.translation.tokens)


def encode(sample: QESample, config: EncoderConfig = EncoderConfig()) -> np.ndarray:
    return Encoder(config).encode(sample)


@dataclass
class ModelParams:
    w_s: np.ndarray
    b_s: float
    W_t: np.ndarray
    b_t: np.ndarray
    sigma: str = "sigmoid"
    dropout: float = 0.0

    def __post_init__(self) -> None:
        if self.sigma not in SIGMAS:
            raise ValidationError(f"sigma must be one of {SIGMAS}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValidationError("dropout must lie in [0, 1)")

    @classmethod
    def zeros(cls, dim: int, sigma: str = "sigmoid", dropout: float = 0.0) -> "ModelParams":
        return cls(np.zeros(dim), 0.0, np.zeros((2, dim)), np.zeros(2), sigma, dropout)

    def copy(self) -> "ModelParams":
        return replace(self, w_s=self.w_s.copy(), W_t=self.W_t.copy(), b_t=self.b_t.copy())

    def vector(self) -> np.ndarray:
        return np.concatenate([self.w_s, [self.b_s], self.W_t.ravel(), self.b_t])

    def with_vector(self, v: np.ndarray) -> "ModelParams":
        d = self.w_s.shape[0]
        return replace(
            self,
            w_s=v[:d].copy(),
            b_s=float(v[d]),
            W_t=v[d + 1:d + 1 + 2 * d].reshape(2, d).copy(),
            b_t=v[d + 1 + 2 * d:].copy(),
        )

    def to_json(self) -> dict:
        return {
            "w_s": self.w_s.tolist(),
            "b_s": self.b_s,
            "W_t": self.W_t.tolist(),
            "b_t": self.b_t.tolist(),
            "sigma": self.sigma,
            "dropout": self.dropout,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ModelParams":
        return cls(
            np.asarray(obj["w_s"], dtype=np.float64),
            float(obj["b_s"]),
            np.asarray(obj["W_t"], dtype=np.float64),
            np.asarray(obj["b_t"], dtype=np.float64),
            obj["sigma"],
            float(obj["dropout"]),
        )


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _activate(z, sigma: str):
    return _sigmoid(z) if sigma == "sigmoid" else z


def forward(H_word: np.ndarray, params: ModelParams) -> tuple[float, np.ndarray]:
    """Inference pass for one sentence: (m_hat, OK probabilities)."""
    h_sent = H_word.mean(axis=0)
    m_hat = float(_activate(h_sent @ params.w_s + params.b_s, params.sigma))
    logits = H_word @ params.W_t.T + params.b_t
    return m_hat, _softmax(logits)[:, OK_INDEX]


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def loss_rank(m_hat_i: float, m_hat_j: float, m_i: float, m_j: float, margin: float = 0.03) -> float:
    """Margin ranking hinge for one pair; the pair must have distinct gold scores."""
    if m_i == m_j:
        raise ValueError("pairs with equal gold scores carry no rank label")
    r = 1.0 if m_i > m_j else -1.0
    # one rounding for the whole expression: (0.2, 0.8) gives 0.63, not 0.6300000000000001
    return max(0.0, math.fsum([-r * m_hat_i, r * m_hat_j, margin]))


@dataclass(frozen=True)
class Batch:
    """Stacked encoder outputs for several sentences."""

    X: np.ndarray            # (T, d) all target word vectors
    starts: np.ndarray       # (B,) first row of each sentence in X
    lengths: np.ndarray      # (B,)
    tags: np.ndarray         # (T,) OK_INDEX / BAD_INDEX
    scores: np.ndarray       # (B,) gold, already normalized

    @classmethod
    def build(cls, Hs: Sequence[np.ndarray], tags: Sequence[Sequence[str]], scores: Sequence[float]) -> "Batch":
        lengths = np.array([h.shape[0] for h in Hs])
        starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])
        flat_tags = []
        for t in tags:
            for tag in t:
                if tag == OK:
                    flat_tags.append(OK_INDEX)
                elif tag == BAD:
                    flat_tags.append(BAD_INDEX)
                else:
                    raise ValidationError(f"unknown tag {tag!r}")
        return cls(np.vstack(Hs), starts, lengths, np.array(flat_tags), np.asarray(scores, dtype=np.float64))

    @property
    def size(self) -> int:
        return len(self.starts)


@dataclass(frozen=True)
class LossParts:
    total: float
    ce: float
    mse: float
    rank: float


def loss_qe(
    params: ModelParams,
    batch: Batch,
    alpha: float = 1.0,
    beta: float = 1000.0,
    margin: float = 0.03,
    sent_mask: Optional[np.ndarray] = None,
    word_mask: Optional[np.ndarray] = None,
) -> tuple[LossParts, ModelParams]:
    """Joint loss and its analytic gradient (returned as a ModelParams of gradients).

    ``L_CE`` is the batch mean of per-sentence summed token cross-entropy,
    ``L_MSE`` the batch mean squared score error, ``L_Rank`` the mean hinge
    over ordered pairs with distinct gold scores. The optional masks are
    already-scaled dropout multipliers for the head inputs.
    """
    B = batch.size
    h_sent = np.add.reduceat(batch.X, batch.starts, axis=0) / batch.lengths[:, None]
    X = batch.X
    if sent_mask is not None:
        h_sent = h_sent * sent_mask
    if word_mask is not None:
        X = X * word_mask

    z = h_sent @ params.w_s + params.b_s
    m_hat = _activate(z, params.sigma)
    err = m_hat - batch.scores
    l_mse = float(np.mean(err * err))
    l_rank, g_rank = kernels.rank_hinge(m_hat, batch.scores, margin)

    logits = X @ params.W_t.T + params.b_t
    logp = _log_softmax(logits)
    rows = np.arange(len(batch.tags))
    logp_gold = logp[rows, batch.tags]
    clamped = logp_gold < math.log(PROB_FLOOR)
    l_ce = float(-np.where(clamped, math.log(PROB_FLOOR), logp_gold).sum() / B)

    total = l_ce + alpha * l_mse + beta * l_rank
    if not math.isfinite(total):
        raise DivergenceError(f"non-finite loss (ce={l_ce}, mse={l_mse}, rank={l_rank})")

    d_m = alpha * 2.0 * err / B + beta * g_rank
    d_z = d_m * m_hat * (1.0 - m_hat) if params.sigma == "sigmoid" else d_m
    d_logits = np.exp(logp)
    d_logits[rows, batch.tags] -= 1.0
    d_logits[clamped] = 0.0
    d_logits /= B

    grads = replace(
        params,
        w_s=h_sent.T @ d_z,
        b_s=float(d_z.sum()),
        W_t=d_logits.T @ X,
        b_t=d_logits.sum(axis=0),
    )
    return LossParts(total, l_ce, l_mse, l_rank), grads


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 1.0
    beta: float = 1000.0
    margin: float = 0.03
    lr: float = 0.05
    batch_size: int = 16
    eval_interval: int = 50
    patience: int = 10
    max_epochs: int = 20
    seed: int = 1
    sigma: str = "sigmoid"
    dropout: float = 0.0
    eps_bad: float = 0.5
    select: str = "spearman"

    def __post_init__(self) -> None:
        if self.alpha < 0 or self.beta < 0:
            raise ValidationError("alpha and beta must be non-negative")
        if self.margin < 0:
            raise ValidationError("margin must be non-negative")
        if self.patience < 1:
            raise ValidationError("patience must be at least 1")
        if self.batch_size < 1 or self.eval_interval < 1 or self.max_epochs < 1:
            raise ValidationError("batch size, eval interval and max epochs must be positive")
        if self.sigma not in SIGMAS:
            raise ValidationError(f"sigma must be one of {SIGMAS}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValidationError("dropout must lie in [0, 1)")
        if self.select not in SELECT_METRICS:
            raise ValidationError(f"select must be one of {SELECT_METRICS}")


@dataclass
class Checkpoint:
    params: ModelParams
    encoder: EncoderConfig
    score_min: float = 0.0
    score_max: float = 1.0
    train_config: dict = field(default_factory=dict)

    def normalize(self, scores: Sequence[float]) -> np.ndarray:
        s = np.asarray(scores, dtype=np.float64)
        if self.params.sigma != "sigmoid":
            return s
        span = self.score_max - self.score_min
        return (s - self.score_min) / (span if span > 0 else 1.0)

    def denormalize(self, m_hat: float) -> float:
        if self.params.sigma != "sigmoid":
            return m_hat
        span = self.score_max - self.score_min
        return m_hat * (span if span > 0 else 1.0) + self.score_min

    def to_json(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "params": self.params.to_json(),
            "encoder": asdict(self.encoder),
            "score_min": self.score_min,
            "score_max": self.score_max,
            "train_config": self.train_config,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Checkpoint":
        if obj.get("format") != CHECKPOINT_FORMAT:
            raise ValidationError(f"not a QE checkpoint (format={obj.get('format')!r})")
        if obj.get("version") != CHECKPOINT_VERSION:
            raise ValidationError(f"unsupported checkpoint version {obj.get('version')!r}")
        return cls(
            ModelParams.from_json(obj["params"]),
            EncoderConfig(**obj["encoder"]),
            float(obj["score_min"]),
            float(obj["score_max"]),
            dict(obj.get("train_config", {})),
        )

    def save(self, path: str | Path) -> None:
        atomic_write_json(path, self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "Checkpoint":
        with open(path, encoding="utf-8") as f:
            try:
                return cls.from_json(json.load(f))
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}: malformed checkpoint ({exc.msg})") from None


def predict(
    checkpoint: Checkpoint,
    samples: Sequence[QESample],
    encoder: Optional[Encoder] = None,
) -> list[Prediction]:
    encoder = encoder or Encoder(checkpoint.encoder)
    out = []
    for sample in samples:
        m_hat, p_ok = forward(encoder.encode(sample), checkpoint.params)
        out.append(Prediction(sample.id, m_hat, tuple(float(p) for p in p_ok)))
    return out


def evaluate(
    checkpoint: Checkpoint,
    samples: Sequence[QESample],
    eps_bad: float = 0.5,
    encoder: Optional[Encoder] = None,
    encoded: Optional[Sequence[np.ndarray]] = None,
) -> dict:
    """Validation Spearman (sentence) and MCC (word at ``eps_bad``)."""
    if encoded is None:
        preds = predict(checkpoint, samples, encoder)
        scores = [p.score for p in preds]
        probs = [p.ok_probs for p in preds]
    else:
        scores, probs = [], []
        for H in encoded:
            m_hat, p_ok = forward(H, checkpoint.params)
            scores.append(m_hat)
            probs.append(p_ok)
    try:
        rho = spearman(scores, [s.mqm_score for s in samples])
    except UndefinedCorrelation:
        rho = 0.0
    word = mcc([tag_by_threshold(p, eps_bad) for p in probs], [s.tags for s in samples])
    return {"spearman": rho, "mcc": word}


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    history: list[dict]
    best_metric: float
    updates: int


def _require_labels(samples: Sequence[QESample], what: str) -> None:
    if not samples:
        raise ValidationError(f"{what} set is empty")
    for s in samples:
        if s.tags is None or s.mqm_score is None:
            raise ValidationError(f"{what} record {s.id} lacks tags or score")


def train(
    train_samples: Sequence[QESample],
    valid_samples: Sequence[QESample],
    config: TrainConfig = TrainConfig(),
    encoder_config: EncoderConfig = EncoderConfig(),
    init: Optional[Checkpoint] = None,
    valid_metric: Optional[Callable[[Checkpoint], float]] = None,
    encoder: Optional[Encoder] = None,
) -> TrainResult:
    """Mini-batch gradient descent with early stopping on validation Spearman.

    The initial parameters are evaluated before the first update, so the
    returned checkpoint is never worse on the validation metric than
    ``init``. Passing ``init`` fine-tunes: its encoder settings and score
    normalization are kept.
    """
    _require_labels(train_samples, "training")
    _require_labels(valid_samples, "validation")
    if init is not None:
        encoder_config = init.encoder
        params = init.params.copy()
        params.sigma, params.dropout = config.sigma, config.dropout
        lo, hi = init.score_min, init.score_max
    else:
        params = ModelParams.zeros(encoder_config.dim, config.sigma, config.dropout)
        gold = [s.mqm_score for s in train_samples]
        lo, hi = (min(gold), max(gold)) if config.sigma == "sigmoid" else (0.0, 1.0)
    if encoder is None or encoder.config != encoder_config:
        encoder = Encoder(encoder_config)
    ckpt = Checkpoint(params, encoder_config, lo, hi, asdict(config))

    H_train = [encoder.encode(s) for s in train_samples]
    H_valid = [encoder.encode(s) for s in valid_samples]
    targets = ckpt.normalize([s.mqm_score for s in train_samples])
    rng = make_rng(config.seed)

    def measure() -> dict:
        if valid_metric is not None:
            return {"metric": float(valid_metric(ckpt))}
        metrics = evaluate(ckpt, valid_samples, config.eps_bad, encoded=H_valid)
        if config.select == "spearman":
            metrics["metric"] = metrics["spearman"]
        elif config.select == "mcc":
            metrics["metric"] = metrics["mcc"]
        else:
            metrics["metric"] = metrics["spearman"] + metrics["mcc"]
        return metrics

    history: list[dict] = []
    best = -math.inf
    best_params = params.copy()
    stale = 0
    updates = 0
    last_loss: Optional[float] = None

    def checkpoint_eval() -> bool:
        nonlocal best, best_params, stale
        entry = {"update": updates, "train_loss": last_loss, **measure()}
        history.append(entry)
        if entry["metric"] > best:
            best, best_params, stale = entry["metric"], ckpt.params.copy(), 0
        else:
            stale += 1
        return stale >= config.patience

    stop = checkpoint_eval()
    keep = 1.0 - config.dropout
    for _epoch in range(config.max_epochs):
        if stop:
            break
        order = rng.permutation(len(train_samples))
        for b in range(0, len(order), config.batch_size):
            idx = order[b:b + config.batch_size]
            batch = Batch.build(
                [H_train[i] for i in idx],
                [train_samples[i].tags for i in idx],
                targets[idx],
            )
            sent_mask = word_mask = None
            if config.dropout > 0:
                sent_mask = (rng.random((batch.size, encoder_config.dim)) < keep) / keep
                word_mask = (rng.random(batch.X.shape) < keep) / keep
            parts, grads = loss_qe(
                ckpt.params, batch, config.alpha, config.beta, config.margin, sent_mask, word_mask
            )
            p = ckpt.params
            p.w_s -= config.lr * grads.w_s
            p.b_s -= config.lr * grads.b_s
            p.W_t -= config.lr * grads.W_t
            p.b_t -= config.lr * grads.b_t
            updates += 1
            last_loss = parts.total
            if updates % config.eval_interval == 0:
                stop = checkpoint_eval()
                if stop:
                    break
    if not stop and updates % config.eval_interval != 0:
        checkpoint_eval()

    ckpt.params = best_params
    return TrainResult(ckpt, history, best, updates)
