"""Pre-train-then-fine-tune versus real-data-only, on a synthetic world."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .ensemble import search_bad_threshold, tag_by_threshold, threshold_grid
from .fixer import train_ngram_lm
from .metrics import mcc, spearman
from .pipeline import make_pseudo_data
from .stats import estimate_stats
from .synth import ToyWorld
from .toy_qe import Checkpoint, Encoder, EncoderConfig, TrainConfig, predict, train


@dataclass(frozen=True)
class BenefitConfig:
    n_parallel: int = 2000
    n_real_train: int = 200
    n_valid: int = 200
    n_test: int = 300
    fluent_rate: float = 0.5
    dim: int = 1024
    max_epochs: int = 30


def _held_out(ckpt: Checkpoint, encoder: Encoder, valid, test) -> dict:
    # eps_bad tuned on validation, as for any submitted system
    pv = predict(ckpt, valid, encoder)
    eps, _ = search_bad_threshold([p.ok_probs for p in pv], [s.tags for s in valid], threshold_grid(0.01))
    pt = predict(ckpt, test, encoder)
    return {
        "spearman": spearman([p.score for p in pt], [s.mqm_score for s in test]),
        "mcc": mcc([tag_by_threshold(p.ok_probs, eps) for p in pt], [s.tags for s in test]),
        "eps_bad": eps,
    }


def pseudo_data_benefit(seed: int, config: BenefitConfig = BenefitConfig()) -> dict:
    """Held-out metrics of (pseudo pre-train + real fine-tune) and (real only).

    Real data comes from the world's planted noise; the pseudo pipeline only
    sees the parallel corpus and span statistics estimated from the real
    training split.
    """
    world = ToyWorld(seed=seed)
    parallel = world.parallel_corpus(config.n_parallel, seed=seed)
    n_real = config.n_real_train + config.n_valid + config.n_test
    real = world.qe_dataset(world.parallel_corpus(n_real, seed=seed + 10_000), "real", seed, config.fluent_rate)
    train_real = real[:config.n_real_train]
    valid = real[config.n_real_train:config.n_real_train + config.n_valid]
    test = real[config.n_real_train + config.n_valid:]

    stats = estimate_stats(train_real)
    lm = train_ngram_lm([tgt.split() for _, tgt in parallel], order=3)
    pseudo = make_pseudo_data(parallel, stats, lm, seed=seed)

    encoder = Encoder(EncoderConfig(dim=config.dim))
    train_cfg = TrainConfig(seed=seed, max_epochs=config.max_epochs)
    pre = train(pseudo, valid, train_cfg, encoder.config, encoder=encoder)
    tuned = train(train_real, valid, replace(train_cfg), init=pre.checkpoint, encoder=encoder)
    alone = train(train_real, valid, train_cfg, encoder.config, encoder=encoder)
    return {
        "seed": seed,
        "pretrain_finetune": _held_out(tuned.checkpoint, encoder, valid, test),
        "real_only": _held_out(alone.checkpoint, encoder, valid, test),
    }
