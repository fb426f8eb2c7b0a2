import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import al_direct, ap_direct, bleu_direct, dal_direct
from simulpolicy.core import CommitRecord
from simulpolicy.errors import EmptyCorpus, EmptyOutput, InvalidParam
from simulpolicy.metrics import (
    DelaySchedule,
    MetricReport,
    average_lagging,
    average_proportion,
    bleu,
    classify_latency,
    dal,
    detokenize,
    group_words,
    report,
    tokenize_for_bleu,
    word_delays,
)

STAIR = DelaySchedule((1000, 2000, 3000, 4000), 4000)
AT_END = DelaySchedule((4000,) * 4, 4000)
ONE = DelaySchedule((4000,), 4000)


@st.composite
def schedules(draw):
    T = draw(st.floats(100, 20000))
    raw = draw(st.lists(st.floats(0, 1), min_size=1, max_size=20))
    return DelaySchedule(tuple(sorted(x * T for x in raw)), T)


def test_al_examples():
    assert average_lagging(AT_END) == pytest.approx(4000)
    assert average_lagging(STAIR) == pytest.approx(1000)
    assert average_lagging(ONE) == pytest.approx(4000)


def test_ap_examples():
    assert average_proportion(AT_END) == pytest.approx(1.0)
    assert average_proportion(STAIR) == pytest.approx(0.625)
    assert average_proportion(ONE) == pytest.approx(1.0)


def test_dal_examples():
    assert dal(STAIR) == pytest.approx(1000)
    assert dal(AT_END) == pytest.approx(4000)
    assert dal(ONE) == pytest.approx(4000)


def test_al_reference_length_variant():
    # gamma = 4000 / 2 on a four-word output
    assert average_lagging(STAIR, target_len=2) == pytest.approx((1000 + 0 - 1000 - 2000) / 4)


@given(schedules())
def test_metrics_match_direct_formulas(s):
    d, T = list(s.delays_ms), s.src_duration_ms
    assert average_lagging(s) == pytest.approx(al_direct(d, T), rel=1e-9, abs=1e-9)
    assert average_proportion(s) == pytest.approx(ap_direct(d, T), rel=1e-9)
    assert dal(s) == pytest.approx(dal_direct(d, T), rel=1e-9, abs=1e-9)


@given(schedules(), st.integers(-7, 7))
def test_time_rescaling(s, k):
    # powers of two scale exactly, so the d_i >= T_src cutoff cannot flip by rounding
    c = 2.0 ** k
    scaled = DelaySchedule(tuple(c * x for x in s.delays_ms), c * s.src_duration_ms)
    assert average_lagging(scaled) == pytest.approx(c * average_lagging(s), rel=1e-9, abs=1e-6)
    assert dal(scaled) == pytest.approx(c * dal(s), rel=1e-9, abs=1e-6)
    assert average_proportion(scaled) == pytest.approx(average_proportion(s), rel=1e-9)


@given(schedules())
def test_dal_lower_bound_and_ap_range(s):
    d, T = s.delays_ms, s.src_duration_ms
    g = T / len(d)
    assert dal(s) >= sum(x - i * g for i, x in enumerate(d)) / len(d) - 1e-6
    if all(x > 0 for x in d):
        assert 0 < average_proportion(s) <= 1 + 1e-12


@given(st.integers(1, 30), st.floats(100, 10000))
def test_al_oracle_schedules(n, T):
    assert average_lagging(DelaySchedule((T,) * n, T)) == pytest.approx(T)
    assert average_lagging(DelaySchedule(tuple(i * T / n for i in range(n)), T)) == pytest.approx(0, abs=1e-6)


def test_schedule_validation():
    with pytest.raises(EmptyOutput):
        DelaySchedule((), 1000)
    with pytest.raises(InvalidParam):
        DelaySchedule((2, 1), 1000)
    with pytest.raises(InvalidParam):
        DelaySchedule((1,), 0)


@pytest.mark.parametrize("al, expected", [(1880, True), (2000, False), (4000, False), (1999.999, True)])
def test_classify_latency(al, expected):
    assert classify_latency(al) is expected


def test_word_delays():
    recs = [CommitRecord(t, d, 1) for t, d in [("a", 100), ("b", 200), ("c", 300)]]
    assert word_delays(recs, 1000).delays_ms == (100, 200, 300)
    sp = [CommitRecord("▁un", 1000, 1), CommitRecord("believ", 1000, 1), CommitRecord("able", 2000, 2)]
    assert word_delays(sp, 3000, "sentencepiece").delays_ms == (2000,)
    bpe = [CommitRecord("un@@", 1000, 1), CommitRecord("real", 2000, 2), CommitRecord("x", 2500, 2)]
    assert word_delays(bpe, 3000, "bpe").delays_ms == (2000, 2500)
    assert word_delays([CommitRecord("w", 3000, 3)], 3000).delays_ms == (3000,)
    with pytest.raises(EmptyOutput):
        word_delays([], 1000)


def test_detokenizers():
    assert detokenize(["▁the", "▁c", "at"], "sentencepiece") == "the cat"
    assert detokenize(["th@@", "e", "cat"], "bpe") == "the cat"
    assert group_words(["a", "b"]) == [("a", [0]), ("b", [1])]
    with pytest.raises(InvalidParam):
        group_words(["a"], "moses")


def test_bleu_examples():
    ref = [["the", "cat", "sat", "on", "the", "mat"], ["a", "b", "c", "d"]]
    assert bleu(ref, ref) == pytest.approx(100.0)
    assert bleu([["x", "y", "z", "w"]], [["a", "b", "c", "d"]]) == 0.0
    assert bleu([["the", "cat", "sat"]], [["the", "cat", "sat", "down"]]) == 0.0
    assert bleu([["the", "cat", "sat"]], [["the", "cat", "sat", "down"]], smooth=True) > 0
    with pytest.raises(EmptyCorpus):
        bleu([], [])


def test_bleu_hand_values():
    # precisions 4/5, 3/4, 2/3, 1/2; no brevity penalty
    assert bleu([list("abcde")], [list("abcdf")]) == pytest.approx(100 * 0.2 ** 0.25, rel=1e-12)
    # perfect precisions, brevity penalty exp(1 - 5/4)
    assert bleu([list("abcd")], [list("abcde")]) == pytest.approx(100 * math.exp(-0.25), rel=1e-12)


words = st.lists(st.sampled_from(["a", "b", "c", "d", "e"]), min_size=4, max_size=12)


@given(st.lists(words, min_size=1, max_size=6))
def test_bleu_self_is_100(corpus):
    assert bleu(corpus, corpus) == pytest.approx(100.0)


@given(st.lists(st.tuples(words, words), min_size=1, max_size=6), st.randoms(use_true_random=False))
def test_bleu_matches_oracle_and_is_order_invariant(pairs, rnd):
    hyps, refs = [p[0] for p in pairs], [p[1] for p in pairs]
    assert bleu(hyps, refs) == pytest.approx(bleu_direct(hyps, refs), rel=1e-12, abs=1e-12)
    rnd.shuffle(pairs)
    assert bleu([p[0] for p in pairs], [p[1] for p in pairs]) == pytest.approx(bleu(hyps, refs), rel=1e-12)


def test_tokenize_for_bleu():
    assert tokenize_for_bleu("Hello, world!") == ["Hello", ",", "world", "!"]
    assert tokenize_for_bleu("我爱你 ok") == ["我", "爱", "你", "ok"]


def test_report_round_trip():
    r = report(STAIR, 42.0)
    assert r == MetricReport(42.0, 1000.0, 0.625, 1000.0, True)
    assert MetricReport.from_dict(r.to_dict()) == r
