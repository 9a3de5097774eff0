import pytest

from mqmqe.corpus import BAD, ValidationError
from mqmqe.fixer import train_ngram_lm
from mqmqe.pipeline import corrupt_record, fix_record, make_pseudo_data, parallel_map
from mqmqe.stats import default_stats
from mqmqe.synth import TRUE_STATS, ToyWorld


def _square(x, state):
    return x * x + state.get("offset", 0)


def _state():
    return {"offset": 1}


def test_parallel_map_keeps_order():
    items = list(range(40))
    assert parallel_map(_square, items, jobs=3, state_factory=_state) == [x * x + 1 for x in items]
    assert parallel_map(_square, items, jobs=1) == [x * x for x in items]


def test_records_are_independent_of_neighbours():
    world = ToyWorld(seed=2)
    pairs = world.parallel_corpus(6, seed=2)
    lm = train_ngram_lm([t.split() for _, t in pairs])
    full = make_pseudo_data(pairs, default_stats(), lm, seed=5)
    record = corrupt_record("pseudo3", *pairs[3], default_stats(), seed=5)
    assert fix_record(record, lm, seed=5) == full[3]


def test_filled_tokens_differ_from_reference():
    world = ToyWorld(seed=3)
    pairs = world.parallel_corpus(30, seed=3)
    lm = train_ngram_lm([t.split() for _, t in pairs])
    for src, ref in pairs:
        record = corrupt_record("r", src, ref, default_stats(), (0.0, 0.0), seed=1)
        sample = fix_record(record, lm)
        for tok, r, tag in zip(sample.translation.tokens, ref.split(), sample.tags):
            if tag == BAD:
                assert tok != r


def test_empty_reference_rejected():
    with pytest.raises(ValidationError, match="r9"):
        corrupt_record("r9", "src", "   ", default_stats())


def test_planted_noise_is_consistent():
    world = ToyWorld(seed=1)
    pairs = world.parallel_corpus(50, seed=1)
    data = world.qe_dataset(pairs, "real", seed=1, fluent_rate=0.5)
    for s, (_, ref) in zip(data, pairs):
        assert len(s.translation) == len(ref.split())
        assert s.spans is not None
    assert sum(len(s.spans) for s in data) > 0
    assert TRUE_STATS.span_count_dist.support == (0, 1, 2, 3)
