import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import REF_MT, REF_SPANS, REF_TAGS
from mqmqe.corpus import (
    BAD,
    OK,
    ErrorSpan,
    QESample,
    Severity,
    ValidationError,
    check_spans,
    detokenize,
    mqm_score,
    normalize_whitespace,
    read_parallel_tsv,
    read_qe_jsonl,
    tags_from_spans,
    tokenize,
    write_qe_jsonl,
)
from mqmqe.ensemble import assemble_spans


def test_tokenize_offsets():
    t = tokenize("Regierung zieht 15")
    assert t.tokens == ("Regierung", "zieht", "15")
    assert t.offsets == ((0, 9), (10, 15), (16, 18))
    assert tokenize("").tokens == ()
    t = tokenize("a  b")
    assert t.tokens == ("a", "b")
    assert t.offsets == ((0, 1), (3, 4))


def test_offsets_count_code_points():
    t = tokenize("Vorwürfen ü 😀x")
    for tok, (s, e) in zip(t.tokens, t.offsets):
        assert t.raw[s:e] == tok
    assert t.offsets[2] == (12, 14)


@given(st.text())
def test_tokenize_round_trip(text):
    t = tokenize(text)
    for tok, (s, e) in zip(t.tokens, t.offsets):
        assert t.raw[s:e] == tok
    assert all(a[1] < b[0] for a, b in zip(t.offsets, t.offsets[1:]))
    assert detokenize(t.tokens) == normalize_whitespace(text)


def test_severity_penalties_and_order():
    assert [s.penalty for s in Severity] == [1, 5, 10]
    assert Severity.CRITICAL > Severity.MAJOR > Severity.MINOR
    assert max([Severity.MINOR, Severity.CRITICAL, Severity.MAJOR]) is Severity.CRITICAL
    assert Severity.parse("Major") is Severity.MAJOR
    with pytest.raises(ValidationError):
        Severity.parse("fatal")


def test_mqm_score_examples():
    assert mqm_score(1, 1, 0, 9) == pytest.approx(0.3333, abs=1e-4)
    assert mqm_score(1, 1, 1, 10) == -0.6
    for k in (1, 7, 100):
        assert mqm_score(0, 0, 0, k) == 1.0
    with pytest.raises(ValueError):
        mqm_score(0, 0, 0, 0)


counts = st.integers(0, 20)


@given(counts, counts, counts, st.integers(1, 60), st.sampled_from(range(3)))
def test_mqm_monotone_in_counts(a, b, c, n, which):
    base = [a, b, c]
    more = list(base)
    more[which] += 1
    assert mqm_score(*more, n) <= mqm_score(*base, n)


@given(counts, counts, counts, st.integers(1, 60))
def test_mqm_monotone_in_length(a, b, c, n):
    if a + b + c == 0:
        return
    assert mqm_score(a, b, c, n + 1) >= mqm_score(a, b, c, n)


def test_reference_record_tags():
    t = tokenize(REF_MT)
    assert t.raw[10:15] == "zieht"
    assert t.raw[55:70] == "Graft-Vorwürfen"
    assert tags_from_spans(t, REF_SPANS) == REF_TAGS
    assert tags_from_spans(t, []) == (OK,) * len(t)
    assert tags_from_spans(tokenize("a b"), [ErrorSpan(2, 3, Severity.MINOR)]) == (OK, BAD)


def test_bad_spans_rejected():
    with pytest.raises(ValidationError):
        check_spans([ErrorSpan(3, 3, Severity.MINOR)], 10)
    with pytest.raises(ValidationError):
        check_spans([ErrorSpan(0, 5, Severity.MINOR), ErrorSpan(4, 6, Severity.MAJOR)], 10)
    with pytest.raises(ValidationError):
        check_spans([ErrorSpan(0, 11, Severity.MINOR)], 10)


@st.composite
def text_with_spans(draw):
    words = draw(st.lists(st.text("abcdé-", min_size=1, max_size=5), min_size=1, max_size=10))
    gaps = draw(st.lists(st.integers(1, 3), min_size=len(words), max_size=len(words)))
    raw = "".join(" " * g + w for g, w in zip(gaps, words))
    cuts = sorted(draw(st.sets(st.integers(0, len(raw)), max_size=6)))
    spans = []
    for s, e in zip(cuts[::2], cuts[1::2]):
        if s < e:
            spans.append(ErrorSpan(s, e, draw(st.sampled_from(list(Severity)))))
    return tokenize(raw), spans


@given(text_with_spans())
def test_spans_round_trip_to_token_boundaries(case):
    t, spans = case
    tags = tags_from_spans(t, spans)
    fine = [Severity.MINOR if tag == BAD else None for tag in tags]
    rebuilt = assemble_spans(fine, t)
    assert tags_from_spans(t, rebuilt) == tags
    for span in rebuilt:
        assert span.start in {s for s, _ in t.offsets}
        assert span.end in {e for _, e in t.offsets}


def test_sample_json_round_trip(tmp_path, ref_sample):
    path = tmp_path / "qe.jsonl"
    write_qe_jsonl([ref_sample], path)
    assert read_qe_jsonl(path) == [ref_sample]
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    assert read_qe_jsonl(empty) == []


def test_inconsistent_tags_rejected(tmp_path, ref_sample):
    record = ref_sample.to_json()
    tags = record["tags"].split()
    tags[0] = BAD
    record["tags"] = " ".join(tags)
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps(record) + "\n")
    with pytest.raises(ValidationError, match="bad.jsonl:1"):
        read_qe_jsonl(path)


def test_tag_count_mismatch_rejected():
    with pytest.raises(ValidationError, match="r7"):
        QESample("r7", "x", tokenize("a b"), (OK,))


def test_parallel_tsv(tmp_path):
    path = tmp_path / "p.tsv"
    path.write_text("a b\tc d\n\nx\ty\n")
    assert read_parallel_tsv(path) == [("a b", "c d"), ("x", "y")]
    path.write_text("no tab here\n")
    with pytest.raises(ValidationError, match=":1"):
        read_parallel_tsv(path)
