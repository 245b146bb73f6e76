import itertools

import numpy as np
import pytest

from tempora.errors import ConfigError
from tempora.features import (
    FeatureEngConfig, apply_dropout_mask, dropout_mask, engineer, product_features, sample_pairs,
)
from tempora.panel import PanelEra, PanelSet, validate_panel

from conftest import random_panel


def test_product_values():
    X = np.array([[-2, 2], [0, 1], [0, -2], [1, 1]], dtype=np.int8)
    p = PanelSet((PanelEra(1, list("abcd"), X, {"main": np.zeros(4)}),), ("a", "b"))
    out = product_features(p, FeatureEngConfig(n_products=1, dropout_pct=0.0))
    assert out.feature_names == ("a", "b", "p_0_1")
    assert out[0].features[:, 2].tolist() == [-4, 0, 0, 1]
    assert validate_panel(out) == []


@pytest.mark.parametrize("seed", [0, 1, 17])
def test_all_pairs_when_exhaustive(seed):
    assert sorted(sample_pairs(4, 6, seed)) == list(itertools.combinations(range(4), 2))


def test_too_many_products_rejected():
    with pytest.raises(ConfigError):
        sample_pairs(4, 7, 0)


def test_pairs_distinct_and_seeded():
    a = sample_pairs(30, 50, 3)
    assert len(set(a)) == 50 and a == sample_pairs(30, 50, 3)
    assert a != sample_pairs(30, 50, 4)


def test_dropout_zero_and_one(small_panel):
    assert apply_dropout_mask(small_panel, FeatureEngConfig(0, 0.0)) == small_panel
    out = apply_dropout_mask(small_panel, FeatureEngConfig(0, 1.0))
    assert all(not e.features.any() for e in out)


def test_dropout_rate_against_mask_stream():
    p = random_panel(n_eras=5, n_rows=2000, n_features=10, seed=9)
    cfg = FeatureEngConfig(0, 0.2, seed=11)
    out = apply_dropout_mask(p, cfg)
    hits = total = 0
    for before, after in zip(p, out):
        nonzero = before.features != 0
        zeroed = nonzero & (after.features == 0)
        # oracle: the seeded mask itself, read directly
        expected = nonzero & ~dropout_mask(before.features.shape, 0.2, 11, before.era)
        np.testing.assert_array_equal(zeroed, expected)
        hits += zeroed.sum()
        total += nonzero.sum()
    assert abs(hits / total - 0.2) <= 0.01


def test_dropout_keeps_ids_and_targets(small_panel):
    out = engineer(small_panel, FeatureEngConfig(3, 0.3, seed=2))
    for a, b in zip(small_panel, out):
        assert a.ids == b.ids
        np.testing.assert_array_equal(a.target("main"), b.target("main"))
    assert len(out.feature_names) == len(small_panel.feature_names) + 3


def test_dropout_mask_per_era_vs_fixed(small_panel):
    per_era = apply_dropout_mask(small_panel, FeatureEngConfig(0, 0.5, seed=1))
    fixed = apply_dropout_mask(small_panel, FeatureEngConfig(0, 0.5, seed=1, fixed_mask=True))
    m1 = dropout_mask((20, 4), 0.5, 1, None)
    for a, f in zip(small_panel, fixed):
        np.testing.assert_array_equal(f.features, np.where(m1, a.features, 0))
    assert any((x.features != y.features).any() for x, y in zip(per_era, fixed))


def test_config_validation():
    with pytest.raises(ConfigError):
        FeatureEngConfig(dropout_pct=1.5)
    with pytest.raises(ConfigError):
        FeatureEngConfig(n_products=-1)
