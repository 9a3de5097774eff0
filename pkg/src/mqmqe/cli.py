"""Command-line pipeline: statistics, corruption, filling, QE training and evaluation.

Settings come from three layers, later ones winning: embedded defaults, a
flat JSON config file with namespaced keys (``--config`` or the
``MQMQE_CONFIG`` environment variable), and command-line flags.
"""

from __future__ import annotations

import argparse
import functools
import json
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .corpus import QESample, Severity, ValidationError, read_jsonl, read_parallel_tsv, read_qe_jsonl, tokenize, write_qe_jsonl
from .ensemble import MergeRule, Thresholds, ensemble_predictions, grid_search_thresholds, predict_spans, tag_by_threshold
from .fixer import ExternalSampler, FillMode, NgramLm, SamplerError, SeverityKMap, train_ngram_lm
from .io_utils import atomic_write_json, atomic_write_text, log_event
from .metrics import SpanMode, UndefinedCorrelation, confusion, span_scores, spearman
from .pipeline import corrupt_record, fix_record, parallel_map
from .predictions import read_predictions, read_spans, write_predictions, write_spans
from .stats import CorruptionStats, default_stats, estimate_stats, load_stats, save_stats
from .synth import ToyWorld
from .toy_qe import Checkpoint, DivergenceError, Encoder, EncoderConfig, TrainConfig, predict, train

CONFIG_ENV = "MQMQE_CONFIG"

_TRAIN = TrainConfig()
_ENC = EncoderConfig()
_K = SeverityKMap()
_T = Thresholds()

DEFAULTS: dict = {
    "seed": 1,
    "jobs": 1,
    "output": None,
    "toy.pairs": 50,
    "toy.qe": 0,
    "toy.qe_output": None,
    "toy.fluent_rate": 0.5,
    "stats.data": None,
    "lm.parallel": None,
    "lm.order": 3,
    "corrupt.parallel": None,
    "corrupt.stats": None,
    "corrupt.p_insert": 0.15,
    "corrupt.p_delete": 0.15,
    "fix.input": None,
    "fix.lm": None,
    "fix.external_cmd": None,
    "fix.timeout": 30.0,
    "fix.mode": FillMode.LEFT_TO_RIGHT.value,
    "fix.k_minor": _K[Severity.MINOR],
    "fix.k_major": _K[Severity.MAJOR],
    "fix.k_critical": _K[Severity.CRITICAL],
    "train.pretrain_data": None,
    "train.finetune_data": None,
    "train.valid": None,
    "train.init": None,
    "train.alpha": _TRAIN.alpha,
    "train.beta": _TRAIN.beta,
    "train.margin": _TRAIN.margin,
    "train.lr": _TRAIN.lr,
    "train.batch_size": _TRAIN.batch_size,
    "train.eval_interval": _TRAIN.eval_interval,
    "train.patience": _TRAIN.patience,
    "train.max_epochs": _TRAIN.max_epochs,
    "train.sigma": _TRAIN.sigma,
    "train.dropout": _TRAIN.dropout,
    "train.eps_bad": _TRAIN.eps_bad,
    "train.select": _TRAIN.select,
    "encoder.dim": _ENC.dim,
    "encoder.window": _ENC.window,
    "encoder.hash_seed": _ENC.hash_seed,
    "encoder.char_trigrams": _ENC.char_trigrams,
    "predict.checkpoint": None,
    "predict.data": None,
    "ensemble.inputs": None,
    "spans.predictions": None,
    "spans.data": None,
    "spans.thresholds": None,
    "spans.tags_output": None,
    "spans.e_bad": _T.bad,
    "spans.e_minor": _T.minor,
    "spans.e_major": _T.major,
    "spans.merge": MergeRule.WORST.value,
    "tune.predictions": None,
    "tune.data": None,
    "tune.step": 0.01,
    "tune.mode": SpanMode.LENIENT.value,
    "tune.merge": MergeRule.WORST.value,
    "eval.task": "sentence",
    "eval.gold": None,
    "eval.predictions": None,
    "eval.mode": SpanMode.LENIENT.value,
    "eval.e_bad": _T.bad,
}

# flag spelling for each key, used in "missing setting" messages
_FLAGS: dict[str, str] = {}


class _Settings(dict):
    explicit: frozenset = frozenset()

    def need(self, key: str):
        value = self.get(key)
        if value is None:
            raise ValidationError(f"missing required setting {_FLAGS.get(key, key)} (config key {key!r})")
        return value


def _coerce(key: str, value):
    default = DEFAULTS[key]
    if value is None or default is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ValidationError(f"config key {key!r} expects true/false")
        return value
    try:
        return type(default)(value)
    except (TypeError, ValueError):
        raise ValidationError(f"config key {key!r} expects {type(default).__name__}, got {value!r}") from None


def load_config(path: str | Path) -> dict:
    """Read a flat JSON config; unknown keys are rejected."""
    with open(path, encoding="utf-8") as f:
        try:
            obj = json.load(f)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: malformed config ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise ValidationError(f"{path}: config must be a JSON object")
    unknown = sorted(set(obj) - set(DEFAULTS))
    if unknown:
        raise ValidationError(f"{path}: unknown config keys {unknown}")
    return {k: _coerce(k, v) for k, v in obj.items()}


def effective_config(config_path: Optional[str], overrides: dict) -> _Settings:
    settings = _Settings(DEFAULTS)
    if config_path:
        settings.update(load_config(config_path))
    settings.update({k: _coerce(k, v) for k, v in overrides.items() if v is not None})
    return settings


# ---- argument parsing ----------------------------------------------------

def _opt(parser: argparse.ArgumentParser, flag: str, key: str, help: str, **kw) -> None:
    _FLAGS.setdefault(key, flag)
    shown = DEFAULTS.get(key)
    suffix = f" (default: {shown})" if shown is not None else ""
    if "choices" not in kw:
        kw.setdefault("metavar", key.rsplit(".", 1)[-1].upper())
    parser.add_argument(flag, dest=key, default=None, help=help + suffix, **kw)


def _add_common(parser: argparse.ArgumentParser, top: bool) -> None:
    default = None if top else argparse.SUPPRESS
    parser.add_argument("--config", default=default,
                        help=f"flat JSON config file (default: ${CONFIG_ENV} if set)")
    parser.add_argument("--show-config", action="store_true", default=False if top else argparse.SUPPRESS,
                        help="print the effective config and exit")
    parser.add_argument("--seed", dest="seed", type=int, default=default, help="base random seed (default: 1)")
    parser.add_argument("--jobs", dest="jobs", type=int, default=default, help="worker processes (default: 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mqmqe", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _add_common(parser, top=True)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def command(name: str, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help, description=help)
        _add_common(p, top=False)
        return p

    p = command("toy-corpus", "generate a synthetic parallel corpus (and optionally annotated QE data)")
    _opt(p, "--pairs", "toy.pairs", "number of parallel pairs", type=int)
    _opt(p, "--qe", "toy.qe", "number of annotated QE samples", type=int)
    _opt(p, "--qe-output", "toy.qe_output", "QE JSONL output path")
    _opt(p, "--fluent-rate", "toy.fluent_rate", "share of fluent wrong words in planted noise", type=float)
    _opt(p, "-o", "output", "parallel TSV output path")

    p = command("gen-stats", "estimate corruption statistics from annotated data, or write the defaults")
    _opt(p, "--data", "stats.data", "annotated QE JSONL (omit for the shipped defaults)")
    _opt(p, "-o", "output", "stats JSON output path")

    p = command("train-lm", "train the n-gram sampler on the target side of a parallel corpus")
    _opt(p, "--parallel", "lm.parallel", "parallel TSV (source<TAB>target)")
    _opt(p, "--order", "lm.order", "n-gram order", type=int)
    _opt(p, "-o", "output", "LM JSON output path")

    p = command("corrupt", "plan error spans and mask references")
    _opt(p, "--parallel", "corrupt.parallel", "parallel TSV (source<TAB>reference)")
    _opt(p, "--stats", "corrupt.stats", "corruption stats JSON")
    _opt(p, "--p-insert", "corrupt.p_insert", "per-span insertion probability", type=float)
    _opt(p, "--p-delete", "corrupt.p_delete", "per-span deletion probability", type=float)
    _opt(p, "-o", "output", "masked-record JSONL output path")

    p = command("fix", "fill masks with sampled wrong tokens")
    _opt(p, "--input", "fix.input", "output of corrupt")
    _opt(p, "--lm", "fix.lm", "n-gram LM JSON")
    _opt(p, "--external-cmd", "fix.external_cmd", "sampler subprocess command line")
    _opt(p, "--timeout", "fix.timeout", "per-request sampler timeout in seconds", type=float)
    _opt(p, "--mode", "fix.mode", "fill order", choices=[m.value for m in FillMode])
    _opt(p, "--k-minor", "fix.k_minor", "top-k pool for minor errors", type=int)
    _opt(p, "--k-major", "fix.k_major", "top-k pool for major errors", type=int)
    _opt(p, "--k-critical", "fix.k_critical", "top-k pool for critical errors", type=int)
    _opt(p, "-o", "output", "QE JSONL output path")

    p = command("train-qe", "train the QE model (pre-train, fine-tune, or both)")
    _opt(p, "--pretrain-data", "train.pretrain_data", "pseudo QE JSONL")
    _opt(p, "--finetune-data", "train.finetune_data", "real QE JSONL")
    _opt(p, "--valid", "train.valid", "validation QE JSONL")
    _opt(p, "--init", "train.init", "checkpoint to continue from")
    _opt(p, "--alpha", "train.alpha", "MSE loss weight", type=float)
    _opt(p, "--beta", "train.beta", "ranking loss weight", type=float)
    _opt(p, "--margin", "train.margin", "ranking margin", type=float)
    _opt(p, "--lr", "train.lr", "learning rate", type=float)
    _opt(p, "--batch-size", "train.batch_size", "batch size", type=int)
    _opt(p, "--eval-interval", "train.eval_interval", "updates between validations", type=int)
    _opt(p, "--patience", "train.patience", "validations without improvement before stopping", type=int)
    _opt(p, "--max-epochs", "train.max_epochs", "epoch cap", type=int)
    _opt(p, "--sigma", "train.sigma", "sentence-head activation", choices=["sigmoid", "none"])
    _opt(p, "--dropout", "train.dropout", "dropout on head inputs", type=float)
    _opt(p, "--select", "train.select", "validation metric for early stopping", choices=["spearman", "mcc", "sum"])
    _opt(p, "--dim", "encoder.dim", "feature dimension", type=int)
    _opt(p, "--window", "encoder.window", "neighbour window", type=int)
    _opt(p, "-o", "output", "checkpoint JSON output path")

    p = command("predict", "write sentence scores and per-token OK probabilities")
    _opt(p, "--checkpoint", "predict.checkpoint", "checkpoint JSON")
    _opt(p, "--data", "predict.data", "QE JSONL (labels optional)")
    _opt(p, "-o", "output", "prediction TSV output path")

    p = command("ensemble", "z-score sentence scores and average OK probabilities")
    p.add_argument("inputs", nargs="*", default=None, help="prediction files (one per system)")
    _opt(p, "-o", "output", "prediction TSV output path")

    p = command("spans", "convert OK probabilities into tags and error spans")
    _opt(p, "--predictions", "spans.predictions", "prediction TSV")
    _opt(p, "--data", "spans.data", "QE JSONL holding the translations")
    _opt(p, "--thresholds", "spans.thresholds", "thresholds JSON written by tune")
    _opt(p, "--e-bad", "spans.e_bad", "binary threshold", type=float)
    _opt(p, "--e-minor", "spans.e_minor", "minor threshold", type=float)
    _opt(p, "--e-major", "spans.e_major", "major threshold", type=float)
    _opt(p, "--merge", "spans.merge", "severity of a merged span", choices=[r.value for r in MergeRule])
    _opt(p, "--tags-output", "spans.tags_output", "also write OK/BAD tags here")
    _opt(p, "-o", "output", "span TSV output path")

    p = command("tune", "grid-search thresholds on a dev set")
    _opt(p, "--predictions", "tune.predictions", "prediction TSV")
    _opt(p, "--data", "tune.data", "annotated QE JSONL")
    _opt(p, "--step", "tune.step", "grid step", type=float)
    _opt(p, "--mode", "tune.mode", "span F1 mode", choices=[m.value for m in SpanMode])
    _opt(p, "--merge", "tune.merge", "span merge rule", choices=[r.value for r in MergeRule])
    _opt(p, "-o", "output", "thresholds JSON output path")

    p = command("eval", "score predictions against gold annotations")
    _opt(p, "--task", "eval.task", "evaluation level", choices=["sentence", "word", "span"])
    _opt(p, "--gold", "eval.gold", "annotated QE JSONL")
    _opt(p, "--predictions", "eval.predictions", "prediction TSV (sentence/word) or span TSV (span)")
    _opt(p, "--mode", "eval.mode", "span F1 mode", choices=[m.value for m in SpanMode])
    _opt(p, "--e-bad", "eval.e_bad", "binary threshold for the word task", type=float)
    _opt(p, "-o", "output", "report JSON output path (always printed)")
    return parser


# ---- helpers -----------------------------------------------------------

def _write_run_config(command: str, settings: _Settings, output: Optional[str]) -> None:
    out_dir = Path(output).parent if output else Path.cwd()
    atomic_write_json(out_dir / f"{command}.config.json", {"command": command, **settings})


def _by_id(preds, samples: Sequence[QESample], what: str):
    index = {p.id: p for p in preds}
    out = []
    for s in samples:
        if s.id not in index:
            raise ValidationError(f"record {s.id}: missing from {what}")
        p = index[s.id]
        if len(p.ok_probs) != len(s.translation):
            raise ValidationError(
                f"record {s.id}: {len(p.ok_probs)} probabilities for {len(s.translation)} tokens"
            )
        out.append(p)
    return out


def _corrupt_state(stats_json: dict, edit_probs, seed: int) -> dict:
    return {"stats": CorruptionStats.from_json(stats_json), "edit_probs": edit_probs, "seed": seed}


def _corrupt_item(item, state):
    i, (src, ref) = item
    return corrupt_record(str(i), src, ref, state["stats"], state["edit_probs"], state["seed"])


def _fix_state(lm_path: Optional[str], command: Optional[str], timeout: float) -> dict:
    if lm_path is not None:
        return {"sampler": NgramLm.load(lm_path)}
    sampler = ExternalSampler(command, timeout=timeout)
    return {"sampler": sampler, "close": sampler.close}


def _fix_item(item, state):
    record, kmap, seed, mode = item
    return fix_record(record, state["sampler"], kmap, seed, mode).to_json()


# ---- subcommands -------------------------------------------------------

def cmd_toy_corpus(s: _Settings) -> None:
    out = s.need("output")
    world = ToyWorld(seed=s["seed"])
    pairs = world.parallel_corpus(s["toy.pairs"], seed=s["seed"])
    atomic_write_text(out, "".join(f"{a}\t{b}\n" for a, b in pairs))
    if s["toy.qe"] > 0:
        qe_out = s.need("toy.qe_output")
        real = world.parallel_corpus(s["toy.qe"], seed=s["seed"] + 10_000)
        write_qe_jsonl(world.qe_dataset(real, "real", s["seed"], s["toy.fluent_rate"]), qe_out)


def cmd_gen_stats(s: _Settings) -> None:
    out = s.need("output")
    data = s.get("stats.data")
    stats = estimate_stats(read_qe_jsonl(data)) if data else default_stats()
    save_stats(stats, out)


def cmd_train_lm(s: _Settings) -> None:
    pairs = read_parallel_tsv(s.need("lm.parallel"))
    lm = train_ngram_lm([tokenize(tgt).tokens for _, tgt in pairs], order=s["lm.order"])
    lm.save(s.need("output"))


def cmd_corrupt(s: _Settings) -> None:
    out = s.need("output")
    pairs = read_parallel_tsv(s.need("corrupt.parallel"))
    stats = load_stats(s.need("corrupt.stats"))
    edit_probs = (s["corrupt.p_insert"], s["corrupt.p_delete"])
    if not all(0.0 <= p <= 1.0 for p in edit_probs) or sum(edit_probs) > 1.0:
        raise ValidationError("insert/delete probabilities must lie in [0, 1] and sum to at most 1")
    factory = functools.partial(_corrupt_state, stats.to_json(), edit_probs, s["seed"])
    records = parallel_map(_corrupt_item, list(enumerate(pairs)), s["jobs"], factory)
    atomic_write_text(out, "".join(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n" for r in records))


def cmd_fix(s: _Settings) -> None:
    out = s.need("output")
    records = read_jsonl(s.need("fix.input"))
    lm_path, command = s.get("fix.lm"), s.get("fix.external_cmd")
    if (lm_path is None) == (command is None):
        raise ValidationError("give exactly one of --lm and --external-cmd")
    if lm_path is not None and not Path(lm_path).exists():
        raise FileNotFoundError(2, "No such file or directory", lm_path)
    kmap = SeverityKMap.from_values(s["fix.k_minor"], s["fix.k_major"], s["fix.k_critical"])
    mode = FillMode(s["fix.mode"])
    factory = functools.partial(_fix_state, lm_path, command, s["fix.timeout"])
    items = [(r, kmap, s["seed"], mode) for r in records]
    samples = parallel_map(_fix_item, items, s["jobs"], factory)
    atomic_write_text(out, "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in samples))


def cmd_train_qe(s: _Settings) -> None:
    out = s.need("output")
    valid = read_qe_jsonl(s.need("train.valid"))
    pre_path, fine_path = s.get("train.pretrain_data"), s.get("train.finetune_data")
    if pre_path is None and fine_path is None:
        raise ValidationError("give --pretrain-data, --finetune-data, or both")
    config = TrainConfig(**{k.split(".", 1)[1]: s[k] for k in s if k.startswith("train.")
                            and k.split(".", 1)[1] in TrainConfig.__dataclass_fields__}, seed=s["seed"])
    enc_config = EncoderConfig(**{k.split(".", 1)[1]: s[k] for k in s if k.startswith("encoder.")})
    init = Checkpoint.load(s["train.init"]) if s.get("train.init") else None
    history = []
    for stage, path in (("pretrain", pre_path), ("finetune", fine_path)):
        if path is None:
            continue
        t0 = time.perf_counter()
        data = read_qe_jsonl(path)
        result = train(data, valid, config, enc_config, init=init)
        init = result.checkpoint
        history.append({"stage": stage, "best_metric": result.best_metric,
                        "updates": result.updates, "evals": result.history})
        log_event(f"train-qe.{stage}", records=len(data), updates=result.updates,
                  best_metric=result.best_metric, seconds=round(time.perf_counter() - t0, 3))
    init.save(out)
    atomic_write_json(f"{out}.history.json", history)


def cmd_predict(s: _Settings) -> None:
    ckpt = Checkpoint.load(s.need("predict.checkpoint"))
    samples = read_qe_jsonl(s.need("predict.data"))
    preds = predict(ckpt, samples, Encoder(ckpt.encoder))
    write_predictions(preds, s.need("output"))


def cmd_ensemble(s: _Settings) -> None:
    inputs = s.get("ensemble.inputs") or []
    if not inputs:
        raise ValidationError("ensemble needs at least one prediction file")
    systems = [read_predictions(p) for p in inputs]
    write_predictions(ensemble_predictions(systems), s.need("output"))


def cmd_spans(s: _Settings) -> None:
    out = s.need("output")
    samples = read_qe_jsonl(s.need("spans.data"))
    preds = _by_id(read_predictions(s.need("spans.predictions")), samples, "predictions")
    t = {"bad": s["spans.e_bad"], "minor": s["spans.e_minor"], "major": s["spans.e_major"]}
    if s.get("spans.thresholds"):
        with open(s["spans.thresholds"], encoding="utf-8") as f:
            tuned = json.load(f)
        t.update({k: float(tuned[k]) for k in t if k in tuned})
        # explicit flags still win over the tuned file
        for key, name in (("spans.e_bad", "bad"), ("spans.e_minor", "minor"), ("spans.e_major", "major")):
            if s.explicit and key in s.explicit:
                t[name] = s[key]
    th = Thresholds(**t)
    spans = [predict_spans(p.ok_probs, smp.translation, th.minor, th.major, s["spans.merge"])
             for p, smp in zip(preds, samples)]
    write_spans([smp.id for smp in samples], spans, out)
    if s.get("spans.tags_output"):
        atomic_write_text(s["spans.tags_output"], "".join(
            f"{smp.id}\t{' '.join(tag_by_threshold(p.ok_probs, th.bad))}\n" for p, smp in zip(preds, samples)
        ))


def cmd_tune(s: _Settings) -> None:
    samples = read_qe_jsonl(s.need("tune.data"))
    preds = _by_id(read_predictions(s.need("tune.predictions")), samples, "predictions")
    for smp in samples:
        if smp.tags is None:
            raise ValidationError(f"record {smp.id}: dev data lacks tags")
    gold_spans = None if any(smp.spans is None for smp in samples) else [list(smp.spans) for smp in samples]
    th, report = grid_search_thresholds(
        [p.ok_probs for p in preds], [smp.translation for smp in samples], [smp.tags for smp in samples],
        gold_spans, s["tune.step"], s["tune.mode"], s["tune.merge"],
    )
    atomic_write_json(s.need("output"), {**asdict(th), "report": report})


def cmd_eval(s: _Settings) -> dict:
    gold = read_qe_jsonl(s.need("eval.gold"))
    pred_path = s.need("eval.predictions")
    task = s["eval.task"]
    if task == "span":
        spans = read_spans(pred_path)
        pred_spans, gold_spans = [], []
        for smp in gold:
            if smp.spans is None:
                raise ValidationError(f"record {smp.id}: gold lacks spans")
            if smp.id not in spans:
                raise ValidationError(f"record {smp.id}: missing from span predictions")
            pred_spans.append(spans[smp.id])
            gold_spans.append(list(smp.spans))
        score = span_scores(pred_spans, gold_spans, s["eval.mode"])
        report = {"metric": f"span_f1_{s['eval.mode']}", "value": score.f1, "precision": score.precision,
                  "recall": score.recall, "matched": score.matched, "pred_chars": score.pred_chars,
                  "gold_chars": score.gold_chars, "samples": len(gold)}
    else:
        preds = _by_id(read_predictions(pred_path), gold, "predictions")
        if task == "sentence":
            for smp in gold:
                if smp.mqm_score is None:
                    raise ValidationError(f"record {smp.id}: gold lacks a score")
            try:
                value = spearman([p.score for p in preds], [smp.mqm_score for smp in gold])
            except UndefinedCorrelation as exc:
                raise ValidationError(str(exc)) from None
            report = {"metric": "spearman", "value": value, "samples": len(gold)}
        else:
            for smp in gold:
                if smp.tags is None:
                    raise ValidationError(f"record {smp.id}: gold lacks tags")
            c = confusion([tag_by_threshold(p.ok_probs, s["eval.e_bad"]) for p in preds],
                          [smp.tags for smp in gold])
            report = {"metric": "mcc", "value": float(c.mcc()), "tp": c.tp, "tn": c.tn, "fp": c.fp,
                      "fn": c.fn, "e_bad": s["eval.e_bad"], "samples": len(gold)}
    print(json.dumps(report, sort_keys=True))
    if s.get("output"):
        atomic_write_json(s["output"], report)
    return report


COMMANDS = {
    "toy-corpus": cmd_toy_corpus,
    "gen-stats": cmd_gen_stats,
    "train-lm": cmd_train_lm,
    "corrupt": cmd_corrupt,
    "fix": cmd_fix,
    "train-qe": cmd_train_qe,
    "predict": cmd_predict,
    "ensemble": cmd_ensemble,
    "spans": cmd_spans,
    "tune": cmd_tune,
    "eval": cmd_eval,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    ns = vars(args)
    command = ns.pop("command")
    show = ns.pop("show_config", False)
    config_path = ns.pop("config", None) or os.environ.get(CONFIG_ENV)
    if command == "ensemble":
        ns["ensemble.inputs"] = ns.pop("inputs") or None
    try:
        settings = effective_config(config_path, ns)
        settings.explicit = {k for k, v in ns.items() if v is not None}
        if show:
            print(json.dumps(dict(settings), indent=2, sort_keys=True))
            return 0
        if command is None:
            parser.print_help(sys.stderr)
            return 1
        if settings["jobs"] < 1:
            raise ValidationError("--jobs must be at least 1")
        t0 = time.perf_counter()
        log_event(f"{command}.start", seed=settings["seed"], jobs=settings["jobs"])
        COMMANDS[command](settings)
        _write_run_config(command, settings, settings.get("output"))
        log_event(f"{command}.done", seconds=round(time.perf_counter() - t0, 3))
        return 0
    except (SamplerError, DivergenceError) as exc:
        print(f"mqmqe: runtime error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"mqmqe: file not found: {exc.filename}", file=sys.stderr)
        return 1
    except (ValidationError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"mqmqe: invalid input: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
