import pytest
from hypothesis import given
from hypothesis import strategies as st

from tempora.cv import GroupedSplitSpec, make_split, preset, walk_forward_presets
from tempora.errors import SplitSpecError
from tempora.panel import date_to_era

from conftest import random_panel


def test_cv1_preset_eras():
    spec = preset("CV-1")
    assert spec.train == (1, 500)
    assert spec.validation == (521, 620)
    assert spec.test == (646, 1030)
    assert (spec.gap1, spec.gap2) == (20, 25)
    assert walk_forward_presets()[0] == spec


@pytest.mark.parametrize("name,train_end,val,test_start", [
    ("CV-2", "2014-06-27", ("2014-11-21", "2016-10-14"), "2017-04-14"),
    ("CV-3", "2016-05-27", ("2016-10-21", "2018-09-14"), "2019-03-15"),
])
def test_later_presets_match_dates(name, train_end, val, test_start):
    spec = preset(name)
    assert spec.train == (1, date_to_era(train_end))
    assert spec.validation == tuple(date_to_era(d) for d in val)
    assert spec.test[0] == date_to_era(test_start)


def test_presets_respect_gap_inequalities():
    for spec in walk_forward_presets():
        assert spec.train[1] + spec.gap1 < spec.validation[0]
        assert spec.validation[1] + spec.gap2 < spec.test[0]


def test_contiguous_split_covers_panel():
    p = random_panel(n_eras=10, n_rows=3)
    spec = GroupedSplitSpec((1, 4), 0, (5, 7), 0, (8, 10))
    s = make_split(p, spec)
    assert s.train.era_ids + s.validation.era_ids + s.test.era_ids == list(range(1, 11))


def test_overlap_rejected():
    with pytest.raises(SplitSpecError):
        GroupedSplitSpec((1, 5), 0, (5, 7), 0, (9, 10))


def test_gap_too_small_rejected():
    with pytest.raises(SplitSpecError):
        GroupedSplitSpec((1, 5), 2, (7, 9), 0, (10, 12))


def test_empty_part_rejected():
    p = random_panel(n_eras=10, n_rows=3)
    with pytest.raises(SplitSpecError):
        make_split(p, GroupedSplitSpec((1, 4), 0, (5, 7), 0, (20, 30)))


def test_unknown_preset():
    with pytest.raises(SplitSpecError):
        preset("CV-9")


@given(st.integers(1, 8), st.integers(0, 3), st.integers(1, 5), st.integers(0, 3), st.integers(1, 5))
def test_split_parts_disjoint_and_ordered(tr, g1, va, g2, te):
    v0 = tr + g1 + 1
    t0 = v0 + va - 1 + g2 + 1
    spec = GroupedSplitSpec((1, tr), g1, (v0, v0 + va - 1), g2, (t0, t0 + te - 1))
    p = random_panel(n_eras=t0 + te - 1, n_rows=2)
    s = make_split(p, spec)
    assert max(s.train.era_ids) + g1 < min(s.validation.era_ids)
    assert max(s.validation.era_ids) + g2 < min(s.test.era_ids)
    assert len(s.train) == tr and len(s.validation) == va and len(s.test) == te
