import numpy as np
import pytest

from tempora.errors import AlignmentError, ConfigError, NotReadyError
from tempora.gbdt import BoostConfig
from tempora.metrics import CorrSeries, summarize
from tempora.models import (
    EnsembleSpec, FactorMomentumModel, GBDTModel, RankingModel, average_metrics, average_predictions,
    factor_momentum_predict, member_seed,
)
from tempora.panel import PanelEra, PanelSet

import oracles
from conftest import random_panel

TG = np.array([-0.5, -0.25, 0.0, 0.25, 0.5, 0.0])


def _era(e, X, target=TG):
    X = np.asarray(X, dtype=np.int8)
    if X.ndim == 1:
        X = X[:, None]
    return PanelEra(e, [f"{e}_{i}" for i in range(X.shape[0])], X, {"main": np.asarray(target, float)})


def test_single_feature_sign():
    col = np.array([-2, -1, 0, 1, 2, 0])
    up = PanelSet((_era(1, col), _era(2, col[::-1])), ("a",))
    hist = PanelSet((_era(1, col),), ("a",))
    np.testing.assert_array_equal(factor_momentum_predict(up, up[1], "main", lag=1), col[::-1])
    down = PanelSet((_era(1, -col), _era(2, col)), ("a",))
    np.testing.assert_array_equal(factor_momentum_predict(down, down[1], "main", lag=1), -col)
    assert len(hist) == 1


def test_two_feature_oracle():
    rng = np.random.default_rng(4)
    f1 = [np.array([-2, -1, 0, 1, 2, 1]), np.array([-1, -2, 0, 2, 1, 0]), np.array([-2, 0, -1, 1, 2, 2])]
    f2 = [rng.integers(-2, 3, size=6) for _ in range(3)]
    eras = [_era(e + 1, np.column_stack([f1[e], -f1[e] + f2[e] // 2])) for e in range(3)]
    new = _era(4, rng.integers(-2, 3, size=(6, 2)))
    panel = PanelSet(tuple(eras) + (new,), ("a", "b"))
    means = np.mean([[oracles.corr(e.features[:, j].tolist(), TG.tolist()) for j in range(2)] for e in eras], axis=0)
    assert means[0] > 0 > means[1]
    got = factor_momentum_predict(panel, new, "main", lag=1)
    np.testing.assert_array_equal(got, new.features[:, 0].astype(float) - new.features[:, 1])


def test_model_wrapper_and_not_ready():
    m = FactorMomentumModel(lag=1)
    with pytest.raises(NotReadyError):
        m.predict(_era(1, [0, 1, 2, 0, 1, 2]))
    p = random_panel(4, 10, 3)
    m.fit(p, "main")
    assert isinstance(m, RankingModel) and m.predict(p[3]).shape == (10,)
    with pytest.raises(NotReadyError):
        m.predict(p[0])  # nothing at or before era 0


def test_average_predictions():
    np.testing.assert_array_equal(average_predictions([[1, 2], [3, 4]]), [2, 3])
    np.testing.assert_array_equal(average_predictions([[1, 2]]), [1, 2])
    same = [np.array([0.1, 0.5, 0.3])] * 10
    np.testing.assert_array_equal(average_predictions(same), same[0])
    with pytest.raises(ValueError):
        average_predictions([[1, 2], [1]])


def test_average_metrics():
    a = CorrSeries([1, 2, 3], [0.01, 0.03, 0.02])
    b = CorrSeries([1, 2, 3], [0.03, 0.05, 0.04])
    m = average_metrics([a, b])
    assert m.mean == pytest.approx(0.03)
    assert average_metrics([a, a]) == summarize(a)
    rng = np.random.default_rng(0)
    five = [CorrSeries(np.arange(1, 9), rng.normal(0.02, 0.03, 8)) for _ in range(5)]
    got = average_metrics(five)
    for f in ("mean", "volatility", "max_drawdown", "sharpe", "calmar"):
        assert getattr(got, f) == pytest.approx(np.mean([getattr(summarize(s), f) for s in five]), rel=1e-12)
    with pytest.raises(AlignmentError):
        average_metrics([a, CorrSeries([1, 2, 4], [0.0, 0.1, 0.2])])


def test_ensemble_spec():
    p = random_panel(6, 40, 3, targets=("main", "aux"))
    members = {}
    for s in range(2):
        for t in ("main", "aux"):
            members[(s, t)] = GBDTModel(BoostConfig(n_estimators=5, min_data_in_leaf=5, feature_fraction=0.5)).fit(
                p, t, seed=member_seed(0, s, ("main", "aux").index(t)))
    spec = EnsembleSpec(members, n_seeds=2, targets=("main", "aux"))
    era = p[0]
    per_seed = spec.seed_predictions(era)
    manual = [(members[(s, "main")].predict(era) + members[(s, "aux")].predict(era)) / 2 for s in range(2)]
    np.testing.assert_allclose(per_seed, manual, atol=1e-15)
    np.testing.assert_allclose(spec.predict(era), (manual[0] + manual[1]) / 2, atol=1e-15)
    with pytest.raises(ConfigError):
        EnsembleSpec(mode="stacked")


def test_member_seeds_distinct():
    seeds = {member_seed(7, s, t) for s in range(10) for t in range(3)}
    assert len(seeds) == 30
    assert member_seed(7, 1, 1) == member_seed(7, 1, 1)
