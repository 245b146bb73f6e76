import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tempora.data_io import SyntheticConfig, generate_synthetic
from tempora.errors import ConfigError
from tempora.metrics import era_corr
from tempora.panel import PanelEra, PanelSet
from tempora.projection import (
    DynamicProjector, FeatureCorrStats, ProjectionRule, default_k, dynamic_project, feature_corr_stats,
    fnc, project_linear, random_projection_sets, select_projection_set,
)
from tempora.rolling import EraFeatureCorrs

import oracles


def test_hand_projection():
    y = np.array([1.0, 2.0, 3.0])
    X = np.array([[1.0], [1.0], [0.0]])
    expected = np.array([-0.5, 0.5, 3.0])
    np.testing.assert_allclose(project_linear(y, X), expected, atol=1e-12)
    np.testing.assert_allclose(oracles.least_squares_residual(y, X), expected, atol=1e-12)


def test_beta_zero_and_column_space():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 4))
    y = rng.normal(size=30)
    np.testing.assert_array_equal(project_linear(y, X, 0.0), y)
    inside = X @ np.array([1.0, -2.0, 0.5, 3.0])
    assert np.linalg.norm(project_linear(inside, X)) <= 1e-10 * np.linalg.norm(inside)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(5, 40), st.integers(1, 6), st.floats(0, 1))
def test_projection_properties(seed, n, k, beta):
    rng = np.random.default_rng(seed)
    X = rng.integers(-2, 3, size=(n, k)).astype(float)
    y = rng.normal(size=n)
    full = project_linear(y, X, 1.0)
    assert np.linalg.norm(X.T @ full) <= 1e-8 * np.linalg.norm(X) * np.linalg.norm(y) + 1e-12
    np.testing.assert_allclose(project_linear(full, X), full, atol=1e-10)
    np.testing.assert_allclose(project_linear(y, X, beta), y - beta * (y - full), atol=1e-10)
    np.testing.assert_allclose(full, oracles.least_squares_residual(y, X), atol=1e-9)


def test_rank_deficient_and_zero_columns():
    rng = np.random.default_rng(1)
    a = rng.normal(size=20)
    X = np.column_stack([a, 2 * a, np.zeros(20)])
    y = rng.normal(size=20)
    np.testing.assert_allclose(project_linear(y, X), oracles.least_squares_residual(y, X), atol=1e-10)
    np.testing.assert_array_equal(project_linear(y, np.zeros((20, 3))), y)


def test_fnc_composition():
    y = np.array([0.3, -0.1, 0.8, 0.2])
    X = np.array([[1.0], [-1.0], [1.0], [0.0]])
    t = np.array([0.5, -0.5, 0.0, 0.25])
    proj = oracles.least_squares_residual(y, X)
    assert fnc(project_linear(y, X), t) == pytest.approx(oracles.corr(proj.tolist(), t.tolist()), abs=1e-12)
    assert fnc(project_linear(y, X, 0.0), t) == era_corr(y, t)


def _panel_from_corr_pattern(pattern, n=40):
    """One feature whose sign relative to the target follows ``pattern`` per era."""
    rng = np.random.default_rng(0)
    eras = []
    base = np.repeat([-2, -1, 0, 1, 2], n // 5)
    tgt = np.repeat([-0.5, -0.25, 0.0, 0.25, 0.5], n // 5)
    for e, sign in enumerate(pattern, start=1):
        f = base if sign > 0 else -base
        eras.append(PanelEra(e, [str(i) for i in range(n)], f[:, None].astype(np.int8), {"main": tgt}))
    return PanelSet(tuple(eras), ("a",))


def test_stats_constant_and_alternating():
    const = EraFeatureCorrs(_panel_from_corr_pattern([1] * 60), "main")
    s = feature_corr_stats(const, 60, window=52, lag=6)
    assert s.std[0] == pytest.approx(0.0, abs=1e-12)
    c = s.mean[0]
    alt = EraFeatureCorrs(_panel_from_corr_pattern([1, -1] * 30), "main")
    s2 = feature_corr_stats(alt, 60, window=52, lag=6)
    assert s2.mean[0] == pytest.approx(0.0, abs=1e-12)
    assert s2.std[0] == pytest.approx(c, rel=1e-12)
    assert s2.eras_used.tolist() == list(range(3, 55))


def test_stats_ignore_later_eras():
    cfg = SyntheticConfig(n_eras=40, stocks_per_era=(30, 40), n_features=6, seed=2)
    panel = generate_synthetic(cfg)
    t, lag = 30, 6
    before = feature_corr_stats(EraFeatureCorrs(panel, "main"), t, 10, lag)
    rng = np.random.default_rng(0)
    mutated = []
    for e in panel:
        if e.era > t - lag:
            e = PanelEra(e.era, e.ids, rng.integers(-2, 3, size=e.features.shape).astype(np.int8),
                         {"main": rng.permutation(e.target("main"))})
        mutated.append(e)
    after = feature_corr_stats(EraFeatureCorrs(PanelSet(tuple(mutated), panel.feature_names), "main"), t, 10, lag)
    np.testing.assert_array_equal(before.mean, after.mean)
    np.testing.assert_array_equal(before.std, after.std)


def _stats(mean, std=None, names=None):
    mean = np.asarray(mean, dtype=float)
    std = np.zeros_like(mean) if std is None else np.asarray(std, dtype=float)
    names = names or tuple(f"f{i}" for i in range(len(mean)))
    return FeatureCorrStats(1, tuple(names), mean, std, np.array([1]))


def test_select_forced_extremes():
    s = _stats([0.1, 0.0, -0.05])
    assert select_projection_set(s, ProjectionRule("low_mean", k=1)) == ["f2"]
    assert select_projection_set(s, ProjectionRule("high_mean", k=1)) == ["f0"]


def test_select_ties_by_name():
    s = _stats([0.0, 0.0, 0.0], names=("c", "a", "b"))
    assert select_projection_set(s, ProjectionRule("low_mean", k=2)) == ["a", "b"]


@pytest.mark.parametrize("kind", ["low_mean", "high_mean", "low_vol", "high_vol"])
def test_select_matches_sort_oracle(kind):
    rng = np.random.default_rng(3)
    s = _stats(rng.normal(size=10), rng.random(10))
    vals = s.mean if "mean" in kind else s.std
    ref = sorted(range(10), key=lambda i: vals[i], reverse=kind.startswith("high"))[:4]
    assert select_projection_set(s, ProjectionRule(kind, k=4)) == [s.feature_names[i] for i in ref]


def test_rule_validation():
    with pytest.raises(ConfigError):
        ProjectionRule("fixed")
    with pytest.raises(ConfigError):
        ProjectionRule("median")
    with pytest.raises(ConfigError):
        select_projection_set(_stats([0.1]), ProjectionRule("low_mean", k=2))
    assert default_k(1181) == 393 and default_k(2) == 1


def test_warm_up_fallback():
    panel = generate_synthetic(SyntheticConfig(n_eras=10, stocks_per_era=(20, 20), n_features=4))
    proj = DynamicProjector(panel, "main", window=52, lag=6)
    era = panel.era(3)
    y = np.linspace(-1, 1, era.n_rows)
    out = proj.project(y, era, ProjectionRule("low_mean", k=2))
    assert out.fallback and out.features is None
    np.testing.assert_array_equal(out.scores, y)


def test_fixed_rule_is_static_projection():
    panel = generate_synthetic(SyntheticConfig(n_eras=3, stocks_per_era=(30, 30), n_features=4))
    era = panel.era(1)
    y = np.random.default_rng(0).normal(size=30)
    rule = ProjectionRule("fixed", k=2, fixed_set=("1", "3"))
    out = dynamic_project(y, era, rule, None, panel.feature_names)
    np.testing.assert_allclose(out.scores, project_linear(y, era.features[:, [1, 3]]), atol=0)
    with pytest.raises(ConfigError):
        dynamic_project(y, era, ProjectionRule("fixed", fixed_set=("9",)), None, panel.feature_names)


def test_dynamic_sets_match_from_scratch_oracle():
    panel = generate_synthetic(SyntheticConfig(n_eras=20, stocks_per_era=(30, 40), n_features=6, seed=7))
    proj = DynamicProjector(panel, "main", window=5, lag=2)
    rule = ProjectionRule("low_mean", k=2, window=5, lag=2)
    for era in panel:
        y = np.arange(era.n_rows, dtype=float)
        out = proj.project(y, era, rule)
        past = [e for e in panel if era.era - 2 - 4 <= e.era <= era.era - 2]
        if not past:
            assert out.fallback
            continue
        means = np.mean([[oracles.corr(e.features[:, j].tolist(), e.target("main").tolist())
                          for j in range(6)] for e in past], axis=0)
        order = sorted(range(6), key=lambda j: (round(means[j], 12), panel.feature_names[j]))
        assert out.features == [panel.feature_names[j] for j in order[:2]]


def test_random_sets():
    sets = random_projection_sets([f"f{i}" for i in range(10)], 3, 5, seed=1)
    assert len(sets) == 5 and all(len(set(s)) == 3 for s in sets)
    assert sets == random_projection_sets([f"f{i}" for i in range(10)], 3, 5, seed=1)
