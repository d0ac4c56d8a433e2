import itertools
import random
import unicodedata

import pytest
from hypothesis import given, settings, strategies as st

from oracles import edit_distance_recursive
from pinrefine.metrics import EditCounts, cer, corpus_cer, edit_counts

ALPHABET = "abcd"
strings = st.text(alphabet=ALPHABET, max_size=8)


def random_string(rng, max_len=8):
    return "".join(rng.choice(ALPHABET) for _ in range(rng.randint(0, max_len)))


def test_bank_pair():
    c = edit_counts("我想去银行", "我想去银航")
    assert (c.S, c.D, c.I, c.N) == (1, 0, 0, 5)
    assert cer(c) == pytest.approx(0.2)


def test_identity():
    assert edit_counts("今天可能会下雨", "今天可能会下雨") == EditCounts(0, 0, 0, 7)


def test_all_deletions():
    assert edit_counts("abc", "") == EditCounts(0, 3, 0, 3)


def test_all_insertions_flags_empty_reference():
    c = edit_counts("", "ab")
    assert c == EditCounts(0, 0, 2, 0)
    assert c.reference_undefined and cer(c) == 2.0
    assert cer(EditCounts(0, 0, 0, 0)) == 0.0 and not EditCounts(0, 0, 0, 0).reference_undefined


@pytest.mark.parametrize("counts,expected", [((1, 0, 0, 5), 0.2), ((0, 0, 0, 7), 0.0), ((1, 1, 1, 3), 1.0)])
def test_cer_arithmetic(counts, expected):
    assert cer(EditCounts(*counts)) == pytest.approx(expected)


def test_cer_rejects_impossible_counts():
    with pytest.raises(ValueError):
        cer(EditCounts(1, 0, 0, 0))


def test_substitution_preferred_over_indels():
    # "ab" -> "ba" costs 2 either as two substitutions or a delete + insert
    assert edit_counts("ab", "ba") == EditCounts(2, 0, 0, 2)


def test_nfc_normalization():
    composed = unicodedata.normalize("NFC", "lüe")
    decomposed = unicodedata.normalize("NFD", "lüe")
    assert composed != decomposed
    assert edit_counts(composed, decomposed).errors == 0


def test_exhaustive_short_pairs():
    short = ["".join(p) for n in range(4) for p in itertools.product(ALPHABET, repeat=n)]
    for a in short:
        for b in short:
            c = edit_counts(a, b)
            assert c.errors == edit_distance_recursive(a, b)
            assert c.hyp_len == len(b)


def test_sampled_pairs_up_to_length_eight():
    rng = random.Random(0)
    for _ in range(10_000):
        a, b = random_string(rng), random_string(rng)
        c = edit_counts(a, b)
        assert c.errors == edit_distance_recursive(a, b)
        assert c.N == len(a) and c.hyp_len == len(b)


@settings(max_examples=300)
@given(strings, strings)
def test_symmetry(a, b):
    ab, ba = edit_counts(a, b), edit_counts(b, a)
    assert ab.errors == ba.errors


@settings(max_examples=300)
@given(strings, strings, strings)
def test_triangle_inequality(a, b, c):
    assert edit_counts(a, c).errors <= edit_counts(a, b).errors + edit_counts(b, c).errors


def test_corpus_identical_pairs():
    single = corpus_cer([("我想去银行", "我想去银航")])
    double = corpus_cer([("我想去银行", "我想去银航")] * 2)
    assert double.cer == single.cer


def test_corpus_micro_average():
    ref = "abcdefghij"
    report = corpus_cer([(ref, ref), (ref, "XXXXXfghij")])
    assert [cer(c) for c in report.per_utterance] == [0.0, 0.5]
    assert report.cer == pytest.approx(0.25)


def test_corpus_counts_are_sums():
    rng = random.Random(5)
    pairs = [(random_string(rng), random_string(rng)) for _ in range(50)]
    report = corpus_cer(pairs)
    assert report.counts.errors == sum(edit_distance_recursive(a, b) for a, b in pairs)
    assert report.counts.N == sum(len(a) for a, _ in pairs)
    assert report.undefined_references == sum(1 for a, b in pairs if not a and b)


def test_report_dict():
    d = corpus_cer([("ab", "ab")]).to_dict()
    assert d == {"S": 0, "D": 0, "I": 0, "N": 2, "cer": 0.0, "utterances": 1, "undefined_references": 0}


def test_swapped_counts_follow_tie_break_not_mirror():
    # both alignments are minimal; the fixed backtrace order picks different ones
    assert edit_counts("adbdd", "accdbd") == EditCounts(0, 1, 2, 5)
    assert edit_counts("accdbd", "adbdd") == EditCounts(2, 1, 0, 6)
