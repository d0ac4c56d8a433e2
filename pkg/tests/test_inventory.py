import io
import random

import pytest
from hypothesis import given, settings, strategies as st

from oracles import segmentations_bruteforce
from pinrefine.inventory import (
    InventoryError,
    UnsegmentableError,
    load_inventory,
    segment_pinyin,
    validate_sequence,
)


def load(text):
    return load_inventory(io.StringIO(text))


def test_load_small_file():
    inv = load("a\nai\nan\n")
    assert len(inv) == 3
    assert inv.id("ai") == 1


def test_shipped_inventory_has_397_units(inv):
    assert len(inv) == 397


def test_duplicate_reports_line():
    with pytest.raises(InventoryError) as err:
        load("an\nan\n")
    assert err.value.line == 2


@pytest.mark.parametrize("text", ["", "# only a comment\n", "\n\n"])
def test_empty_inventory_rejected(text):
    with pytest.raises(InventoryError):
        load(text)


@pytest.mark.parametrize("bad", ["a1", "zh-i", "ni hao"])
def test_illegal_characters_rejected(bad):
    with pytest.raises(InventoryError):
        load(f"a\n{bad}\n")


def test_normalization_and_comments():
    inv = load("# header\nLÜ\n  nu:e \nba\n")
    assert inv.syllables == ("lv", "nve", "ba")
    assert inv.id("lü") == 0


def test_duplicate_after_normalization():
    with pytest.raises(InventoryError):
        load("lv\nlü\n")


def test_load_is_deterministic(inv):
    text = "\n".join(inv.syllables)
    assert load(text) == load(text)
    assert load(text).index == load(text).index


def test_segment_yinhang(inv):
    seg = segment_pinyin("yinhang", inv)
    assert [s.syllables for s in seg.all] == [["yin", "hang"]]
    assert seg.canonical.syllables == ["yin", "hang"]


def test_segment_xian(inv):
    seg = segment_pinyin("xian", inv)
    assert {tuple(s.syllables) for s in seg.all} == {("xian",), ("xi", "an")}
    assert seg.canonical.syllables == ["xian"]


def test_segment_empty(inv):
    seg = segment_pinyin("", inv)
    assert [s.units for s in seg.all] == [()]
    assert seg.canonical.units == ()


def test_canonical_tie_break_prefers_longer_first(inv):
    # "xianan": xian+an and xi+an+an -> fewest wins; "fanan" -> fan+an vs fa+nan (tie on count)
    seg = segment_pinyin("fanan", inv)
    assert seg.canonical.syllables == ["fan", "an"]
    assert [s.syllables for s in seg.all][:2] == [["fan", "an"], ["fa", "nan"]]


def test_max_results_truncates_in_canonical_order(inv):
    full = segment_pinyin("xianxianxian", inv, max_results=1000).all
    assert len(full) == len(segmentations_bruteforce("xianxianxian", set(inv.syllables)))
    short = segment_pinyin("xianxianxian", inv, max_results=3).all
    assert short == full[:3]


def test_unsegmentable_carries_prefix(inv):
    with pytest.raises(UnsegmentableError) as err:
        segment_pinyin("yinhangq", inv)
    assert err.value.prefix == "yinhang"


def test_validate_sequence(inv):
    assert validate_sequence(["yin", "hang"], inv).valid
    report = validate_sequence(["yin", "zzz"], inv)
    assert not report.valid and report.unknown == [(1, "zzz")]
    assert validate_sequence([], inv).valid


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_segmentation_matches_bruteforce(inv, data):
    sylls = data.draw(st.lists(st.sampled_from(inv.syllables), min_size=0, max_size=6))
    text = "".join(sylls)
    expected = segmentations_bruteforce(text, set(inv.syllables))
    seg = segment_pinyin(text, inv, max_results=10_000)
    got = [tuple(s.syllables) for s in seg.all]
    assert set(got) == expected and len(got) == len(expected)
    for s in seg.all:
        assert s.text("") == text
    assert seg.canonical == seg.all[0]


def test_segmentation_random_strings(inv):
    rng = random.Random(3)
    sylls = set(inv.syllables)
    for _ in range(200):
        text = "".join(rng.choice("aeinoghuxz") for _ in range(rng.randint(1, 8)))
        expected = segmentations_bruteforce(text, sylls)
        if expected:
            assert {tuple(s.syllables) for s in segment_pinyin(text, inv, 10_000).all} == expected
        else:
            with pytest.raises(UnsegmentableError):
                segment_pinyin(text, inv)
