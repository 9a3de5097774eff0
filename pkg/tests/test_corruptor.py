import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mqmqe.corpus import BAD, MASK, OK, Severity, ValidationError, from_tokens
from mqmqe.corruptor import (
    CorruptionPlan,
    EditKind,
    MaskedTranslation,
    PlannedSpan,
    apply_corruption,
    masked_to_sample,
    plan_corruption,
)
from mqmqe.stats import CategoricalDist, CorruptionStats, default_stats, make_rng


def _degenerate(count, length, severity=Severity.MAJOR):
    return CorruptionStats(
        CategoricalDist((count,), (1.0,)),
        CategoricalDist((length,), (1.0,)),
        CategoricalDist((severity,), (1.0,)),
    )


def _ref(n):
    return [f"w{i}" for i in range(n)]


def test_degenerate_single_span():
    starts = set()
    for seed in range(200):
        plan = plan_corruption(5, _degenerate(1, 2), (0.0, 0.0), make_rng(seed))
        (span,) = plan.spans
        assert (span.length, span.severity, span.edit) == (2, Severity.MAJOR, EditKind.REPLACE)
        starts.add(span.start_tok)
    assert starts == {0, 1, 2, 3}


def test_zero_spans_leaves_reference():
    plan = plan_corruption(6, _degenerate(0, 1), rng=make_rng(0))
    masked = apply_corruption(_ref(6), plan, make_rng(0))
    assert masked.tokens == tuple(_ref(6))
    assert masked.gold_tags == (OK,) * 6
    assert masked.pseudo_mqm == 1.0


def test_infeasible_second_span_dropped():
    for seed in range(50):
        plan = plan_corruption(3, _degenerate(2, 2), (0.0, 0.0), make_rng(seed))
        assert len(plan.spans) == 1


def test_corruption_with_omission_marker():
    # minor replace, major replace over four tokens, critical span deleted at sentence end
    plan = CorruptionPlan(
        (
            PlannedSpan(1, 1, Severity.MINOR),
            PlannedSpan(4, 4, Severity.MAJOR),
            PlannedSpan(10, 1, Severity.CRITICAL, EditKind.DELETE, 1),
        ),
        11,
    )
    masked = apply_corruption(_ref(11), plan, make_rng(0))
    assert " ".join(masked.gold_tags) == "OK BAD OK OK BAD BAD BAD BAD OK BAD"
    assert masked.pseudo_mqm == -0.6
    assert masked.tokens[9] == "w9"


def test_full_delete_marks_right_neighbour():
    plan = CorruptionPlan((PlannedSpan(1, 2, Severity.MINOR, EditKind.DELETE, 2),), 4)
    masked = apply_corruption(_ref(4), plan, make_rng(0))
    assert masked.tokens == ("w0", "w3")
    assert masked.gold_tags == (OK, BAD)


def test_insert_adds_masks():
    plan = CorruptionPlan((PlannedSpan(0, 2, Severity.MAJOR, EditKind.INSERT, 2),), 3)
    masked = apply_corruption(_ref(3), plan, make_rng(0))
    assert masked.tokens == (MASK,) * 4 + ("w2",)
    assert sorted(t for t in masked.reference_tokens if t) == ["w0", "w1"]


def test_plan_validation():
    with pytest.raises(ValidationError):
        CorruptionPlan((PlannedSpan(0, 2, Severity.MINOR), PlannedSpan(1, 1, Severity.MINOR)), 5)
    with pytest.raises(ValidationError):
        CorruptionPlan((PlannedSpan(4, 2, Severity.MINOR),), 5)
    with pytest.raises(ValidationError):
        apply_corruption(_ref(4), CorruptionPlan((), 5))


@given(
    n=st.integers(1, 30),
    seed=st.integers(0, 2**32),
    p_ins=st.floats(0, 0.5),
    p_del=st.floats(0, 0.5),
)
def test_corruption_invariants(n, seed, p_ins, p_del):
    rng = make_rng(seed)
    plan = plan_corruption(n, default_stats(), (p_ins, p_del), rng)
    assert sum(s.length for s in plan.spans) < n
    for a, b in zip(plan.spans, plan.spans[1:]):
        assert a.end_tok <= b.start_tok
    masked = apply_corruption(_ref(n), plan, rng)
    owned = set()
    for positions in masked.span_positions:
        assert not owned & set(positions) or len(positions) == 1
        owned |= set(positions)
    bad = {i for i, t in enumerate(masked.gold_tags) if t == BAD}
    assert bad == owned
    masks = {p for g in masked.mask_positions for p in g}
    assert masks == {i for i, t in enumerate(masked.tokens) if t == MASK}
    assert masked.pseudo_mqm == pytest.approx(
        1 - sum(s.severity.penalty for s in plan.spans) / len(masked.tokens)
    )
    if p_ins == 0 and p_del == 0:
        assert len(masked.tokens) == n
    spans = masked_to_sample("r", "s", masked).spans
    assert all(a.end <= b.start for a, b in zip(spans, spans[1:]))


def test_masked_json_round_trip():
    rng = make_rng(4)
    plan = plan_corruption(15, default_stats(), (0.3, 0.3), rng)
    masked = apply_corruption(_ref(15), plan, rng)
    assert MaskedTranslation.from_json(masked.to_json()) == masked
    assert CorruptionPlan.from_json(plan.to_json()) == plan


def test_error_spans_cover_bad_tokens():
    plan = CorruptionPlan((PlannedSpan(1, 2, Severity.MINOR), PlannedSpan(4, 1, Severity.CRITICAL)), 6)
    masked = apply_corruption(_ref(6), plan, make_rng(0))
    translation = from_tokens([t if t != MASK else "xx" for t in masked.tokens])
    spans = masked.error_spans(translation)
    assert [(s.start, s.end, s.severity) for s in spans] == [(3, 8, Severity.MINOR), (12, 14, Severity.CRITICAL)]
    assert np.array_equal(np.array(masked.gold_tags) == BAD, [False, True, True, False, True, False])
