import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import REF_MT, REF_SPANS, REF_TAGS
from mqmqe.corpus import BAD, OK, Severity, ValidationError, tags_from_spans, tokenize
from mqmqe.ensemble import (
    MergeRule,
    Thresholds,
    assemble_spans,
    average_ok_probs,
    ensemble_predictions,
    fine_tag,
    grid_search_thresholds,
    search_bad_threshold,
    tag_by_threshold,
    threshold_grid,
    zscore_ensemble,
)
from mqmqe.metrics import mcc, spearman
from mqmqe.predictions import Prediction, read_predictions, read_spans, write_predictions, write_spans


def _z(x):
    x = np.asarray(x, dtype=float)
    return (x - x.mean()) / x.std()


def test_zscore_examples():
    assert zscore_ensemble([[1, 2, 3], [3, 2, 1]]) == [0.0, 0.0, 0.0]
    assert zscore_ensemble([[1, 2, 3]]) == pytest.approx(_z([1, 2, 3]))
    combined = zscore_ensemble([[5, 5, 5], [1, 2, 3]])
    assert combined == pytest.approx(_z([1, 2, 3]) / 2)
    assert spearman(combined, [1, 2, 3]) == 1.0


def test_average_probs_examples():
    assert average_ok_probs([[[0.2]], [[0.8]]]) == [[0.5]]
    assert average_ok_probs([[[0.1, 0.7]]]) == [[0.1, 0.7]]
    out = average_ok_probs([[[1, 0, 1]], [[0, 1, 1]], [[0.5, 0.5, 0.5]]])
    assert out[0] == pytest.approx([0.5, 0.5, 0.8333333333], abs=1e-9)
    with pytest.raises(ValueError):
        average_ok_probs([[[0.1, 0.2]], [[0.3]]])


@given(st.lists(st.integers(-1000, 1000), min_size=3, max_size=15, unique=True), st.integers(1, 5))
def test_identical_systems_keep_ranking(values, k):
    scores = [v / 100 for v in values]
    assert spearman(zscore_ensemble([scores] * k), scores) == pytest.approx(1.0)


@given(st.lists(st.lists(st.floats(0, 1), min_size=4, max_size=4), min_size=2, max_size=4), st.randoms())
def test_average_is_permutation_invariant(systems, random):
    wrapped = [[s] for s in systems]
    shuffled = list(wrapped)
    random.shuffle(shuffled)
    assert average_ok_probs(shuffled)[0] == pytest.approx(average_ok_probs(wrapped)[0], abs=1e-12)


def test_threshold_examples():
    assert tag_by_threshold([0.9, 0.4, 0.95], 0.5) == (OK, BAD, OK)
    assert tag_by_threshold([0.5], 0.5) == (BAD,)
    assert tag_by_threshold([0.1, 0.0], 0.0) == (OK, BAD)
    m, M = Severity.MINOR, Severity.MAJOR
    assert fine_tag([0.9, 0.7, 0.2], 0.8, 0.3) == (None, m, M)
    assert fine_tag([0.3], 0.8, 0.3) == (M,)
    assert m not in fine_tag(np.linspace(0, 1, 21), 0.4, 0.4)


def test_reference_record_span_assembly():
    t = tokenize(REF_MT)
    fine = [None] * len(t)
    fine[1], fine[7] = Severity.MAJOR, Severity.MINOR
    assert tuple(assemble_spans(fine, t)) == REF_SPANS
    assert tags_from_spans(t, assemble_spans(fine, t)) == REF_TAGS


def test_merge_rules():
    t = tokenize("a b c d")
    m, M = Severity.MINOR, Severity.MAJOR
    (span,) = assemble_spans([m, M, None, None], t)
    assert (span.start, span.end, span.severity) == (0, 3, M)
    worst = assemble_spans([m, m, M, None], t, MergeRule.WORST)
    major = assemble_spans([m, m, M, None], t, MergeRule.MAJORITY)
    assert worst[0].severity is M and major[0].severity is m
    assert assemble_spans([m, M, None, None], t, "majority")[0].severity is M


@given(st.lists(st.floats(0, 1), min_size=1, max_size=15), st.floats(0, 1), st.floats(0, 1))
def test_fine_tags_round_trip_through_spans(probs, a, b):
    eps_minor, eps_major = max(a, b), min(a, b)
    t = tokenize(" ".join(f"w{i}" for i in range(len(probs))))
    fine = fine_tag(probs, eps_minor, eps_major)
    tags = tags_from_spans(t, assemble_spans(fine, t))
    assert tags == tuple(BAD if f is not None else OK for f in fine)
    assert tags == tag_by_threshold(probs, eps_minor)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=15), st.floats(0, 1), st.floats(0, 1))
def test_raising_threshold_never_unflags(probs, a, b):
    lo, hi = sorted((a, b))
    for x, y in zip(tag_by_threshold(probs, lo), tag_by_threshold(probs, hi)):
        assert not (x == BAD and y == OK)


def test_grid_search_separable():
    probs = [[0.05, 0.9], [0.2, 0.8, 0.95]]
    gold = [[BAD, OK], [BAD, OK, OK]]
    eps, value = search_bad_threshold(probs, gold, threshold_grid(0.01))
    assert value == 1.0 and eps == 0.2
    assert search_bad_threshold(probs, gold, [0.5]) == (0.5, 1.0)


def test_grid_search_dominates_default():
    rng = np.random.default_rng(0)
    probs, gold, texts = [], [], []
    for _ in range(50):
        n = int(rng.integers(3, 8))
        g = [BAD if u < 0.3 else OK for u in rng.random(n)]
        probs.append([float(np.clip((0.3 if x == BAD else 0.7) + rng.normal(0, 0.25), 0, 1)) for x in g])
        gold.append(g)
        texts.append(tokenize(" ".join("w" * (i + 1) for i in range(n))))
    th, report = grid_search_thresholds(probs, texts, gold)
    assert report["mcc"] >= mcc([tag_by_threshold(p, 0.5) for p in probs], gold)
    assert th.minor == th.major == th.bad


def test_thresholds_validation():
    with pytest.raises(ValidationError):
        Thresholds(minor=0.2, major=0.3)
    with pytest.raises(ValueError):
        threshold_grid(0.3)


def test_prediction_files_round_trip(tmp_path):
    preds = [Prediction("a", 0.123456789, (0.1, 1.0)), Prediction("b", -2.5, (0.0,))]
    write_predictions(preds, tmp_path / "p.tsv")
    assert read_predictions(tmp_path / "p.tsv") == preds
    write_spans(["a", "b"], [list(REF_SPANS), []], tmp_path / "s.tsv")
    assert read_spans(tmp_path / "s.tsv") == {"a": list(REF_SPANS), "b": []}


def test_ensemble_predictions_checks_ids():
    a = [Prediction("x", 1.0, (0.2,)), Prediction("y", 2.0, (0.4,))]
    b = [Prediction("y", 1.0, (0.2,)), Prediction("x", 2.0, (0.4,))]
    with pytest.raises(ValidationError):
        ensemble_predictions([a, b])
    out = ensemble_predictions([a, a])
    assert [p.ok_probs for p in out] == [(0.2,), (0.4,)]
