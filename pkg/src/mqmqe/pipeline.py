"""Per-record corrupt/fix steps and pseudo-data generation.

Each record draws from its own generator (see ``stats.record_rng``), so
results are identical whether records run serially or across worker
processes.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Optional, Sequence

from .corpus import QESample, ValidationError, tokenize
from .corruptor import DEFAULT_EDIT_PROBS, CorruptionPlan, MaskedTranslation, apply_corruption, plan_corruption
from .fixer import FillMode, NgramLm, Sampler, SeverityKMap, fill_masks
from .stats import CorruptionStats, record_rng

# stream labels keep the corrupt and fix draws of a record independent
CORRUPT_STREAM = "corrupt"
FIX_STREAM = "fix"


def corrupt_record(
    record_id: str,
    source: str,
    reference: str,
    stats: CorruptionStats,
    edit_probs: tuple[float, float] = DEFAULT_EDIT_PROBS,
    seed: int = 1,
) -> dict:
    ref = tokenize(reference)
    if len(ref) == 0:
        raise ValidationError(f"record {record_id}: empty reference")
    rng = record_rng(seed, f"{CORRUPT_STREAM}:{record_id}")
    plan = plan_corruption(len(ref), stats, edit_probs, rng)
    masked = apply_corruption(ref, plan, rng)
    return {
        "id": record_id,
        "src": source,
        "ref": reference,
        "mt": " ".join(masked.tokens),
        "plan": plan.to_json(),
        "masked": masked.to_json(),
    }


def fix_record(
    record: dict,
    sampler: Sampler,
    kmap: SeverityKMap = SeverityKMap(),
    seed: int = 1,
    mode: FillMode = FillMode.LEFT_TO_RIGHT,
) -> QESample:
    try:
        masked = MaskedTranslation.from_json(record["masked"])
        plan = CorruptionPlan.from_json(record["plan"])
        record_id, source = str(record["id"]), record["src"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"record {record.get('id', '?')}: malformed corrupted record ({exc})") from None
    rng = record_rng(seed, f"{FIX_STREAM}:{record_id}")
    return fill_masks(record_id, source, masked, plan, sampler, kmap, rng, mode)


def make_pseudo_data(
    pairs: Sequence[tuple[str, str]],
    stats: CorruptionStats,
    lm: NgramLm,
    kmap: SeverityKMap = SeverityKMap(),
    seed: int = 1,
    edit_probs: tuple[float, float] = DEFAULT_EDIT_PROBS,
    mode: FillMode = FillMode.LEFT_TO_RIGHT,
    prefix: str = "pseudo",
) -> list[QESample]:
    out = []
    for i, (src, tgt) in enumerate(pairs):
        record = corrupt_record(f"{prefix}{i}", src, tgt, stats, edit_probs, seed)
        out.append(fix_record(record, lm, kmap, seed, mode))
    return out


# worker-process state for parallel_map
_WORKER: dict = {}


def _init_worker(factory: Callable[[], dict]) -> None:
    _WORKER.clear()
    _WORKER.update(factory())


def _call_with_state(args):
    fn, item = args
    return fn(item, _WORKER)


def parallel_map(
    fn: Callable[[object, dict], object],
    items: Iterable,
    jobs: int = 1,
    state_factory: Optional[Callable[[], dict]] = None,
) -> list:
    """Map ``fn(item, state)`` preserving input order.

    ``state_factory`` builds per-process state (e.g. a sampler) once per
    worker; with ``jobs == 1`` everything runs in this process.
    """
    items = list(items)
    factory = state_factory or dict
    if jobs <= 1 or len(items) <= 1:
        state = factory()
        try:
            return [fn(item, state) for item in items]
        finally:
            closer = state.get("close")
            if closer is not None:
                closer()
    chunk = max(1, len(items) // (jobs * 4))
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(factory,)) as pool:
        return list(pool.map(_call_with_state, [(fn, item) for item in items], chunksize=chunk))
