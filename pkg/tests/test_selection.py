import math

import numpy as np
import pytest

from tempora.errors import AlignmentError, ConfigError
from tempora.metrics import era_corr
from tempora.selection import (
    MethodHistory, OnlineSelector, SelectionRule, combine, run_online_ensemble, select_method,
)

import oracles


def _history(scores: dict, warm_up=1, window=52, lag=6):
    h = MethodHistory(list(scores), warm_up=warm_up, window=window, lag=lag)
    n = len(next(iter(scores.values())))
    for i in range(n):
        h.record(i + 1, {m: v[i] for m, v in scores.items()})
    return h


def test_momentum_forced_argmax():
    h = _history({"a": [0.02] * 10, "b": [0.03] * 10}, lag=0)
    np.testing.assert_array_equal(select_method(h, 11, "momentum"), [0.0, 1.0])


def test_average_always_equal():
    h = _history({"a": [0.02] * 10, "b": [0.03] * 10, "c": [0.5] * 10}, lag=0)
    np.testing.assert_allclose(select_method(h, 11, "average"), [1 / 3] * 3)


def test_warm_up_equal_weights():
    h = _history({"a": [0.0] * 10, "b": [1.0] * 10}, warm_up=5, lag=6)
    # eras <= 9 - 6 = 3 are resolved: fewer than the 5 needed
    np.testing.assert_allclose(select_method(h, 9, "momentum"), [0.5, 0.5])
    np.testing.assert_array_equal(select_method(h, 11, "momentum"), [0.0, 1.0])


def test_ties_go_to_first_method():
    h = _history({"a": [0.01, 0.02], "b": [0.01, 0.02]}, lag=0)
    for rule in ("momentum", "sharpe", "calmar"):
        np.testing.assert_array_equal(select_method(h, 3, rule), [1.0, 0.0])


def _oracle_weights(scores, t, rule, window, lag, warm_up):
    methods = list(scores)
    resolved = [e for e in range(1, len(scores[methods[0]]) + 1) if e <= t - lag]
    if rule == "average" or len(resolved) < warm_up:
        return [1 / len(methods)] * len(methods)
    win = [e for e in resolved if e >= t - lag - window + 1]
    stats = []
    for m in methods:
        v = [scores[m][e - 1] for e in win]
        mean = sum(v) / len(v)
        if rule == "momentum":
            stats.append(mean)
        elif rule == "sharpe":
            sd = oracles.pop_std(v)
            stats.append(mean / sd if sd > 0 else math.copysign(math.inf, mean) if mean else 0.0)
        else:
            dd = oracles.max_drawdown(v)
            stats.append(mean / dd if dd > 0 else math.inf)
    best = max(range(len(methods)), key=lambda i: (stats[i], -i))
    return [1.0 if i == best else 0.0 for i in range(len(methods))]


@pytest.mark.parametrize("rule", ["average", "momentum", "sharpe", "calmar"])
def test_rules_match_window_oracle(rule):
    rng = np.random.default_rng(11)
    scores = {f"m{i}": (0.01 * i + 0.05 * rng.normal(size=60)).tolist() for i in range(5)}
    h = _history(scores, warm_up=8, window=12, lag=3)
    for t in range(1, 64):
        # only eras already resolved at t are visible to the rule anyway
        np.testing.assert_allclose(select_method(h, t, rule), _oracle_weights(scores, t, rule, 12, 3, 8))


def test_combine_paths():
    a, b = np.array([1.0, 2.0]), np.array([3.0, 4.0])
    np.testing.assert_array_equal(combine([a, b], np.array([0.5, 0.5])), [2.0, 3.0])
    np.testing.assert_array_equal(combine([a, b], np.array([0.0, 1.0])), b)


def _targets(n_eras, n=50, seed=0):
    rng = np.random.default_rng(seed)
    return {e: rng.choice([-0.5, -0.25, 0.0, 0.25, 0.5], size=n) for e in range(1, n_eras + 1)}


def test_single_method_passthrough():
    tg = _targets(10)
    preds = {"only": {e: np.arange(50.0) * (-1) ** e for e in tg}}
    res = run_online_ensemble(preds, tg, "momentum", warm_up=2, window=3, lag=1)
    assert res.combined == res.method_scores["only"]


@pytest.mark.parametrize("rule", ["average", "momentum", "sharpe", "calmar"])
def test_identical_methods_equal_member(rule):
    tg = _targets(12)
    rng = np.random.default_rng(1)
    p = {e: rng.normal(size=50) for e in tg}
    res = run_online_ensemble({"a": p, "b": dict(p)}, tg, rule, warm_up=2, window=4, lag=1)
    assert res.combined == res.method_scores["a"]


def test_targets_read_only_after_weights_fixed():
    tg = _targets(6)
    events = []

    def get(e):
        events.append(("read", e))
        return tg[e]

    preds = {"a": {e: np.arange(50.0) for e in tg}}
    run_online_ensemble(preds, get, "momentum", warm_up=1, window=2, lag=1,
                        on_score=lambda e: events.append(("score", e)))
    assert events == [x for e in tg for x in (("score", e), ("read", e))]


def test_selector_rejects_out_of_order():
    sel = OnlineSelector(["a"], "momentum")
    sel.step(5, [np.arange(3.0)], lambda e: np.array([0.5, 0.0, -0.5]))
    with pytest.raises(AlignmentError):
        sel.step(5, [np.arange(3.0)], lambda e: np.array([0.5, 0.0, -0.5]))


def test_validation():
    with pytest.raises(ConfigError):
        SelectionRule("best")
    with pytest.raises(ConfigError):
        MethodHistory([])
    with pytest.raises(AlignmentError):
        run_online_ensemble({"a": {1: np.zeros(3)}, "b": {2: np.zeros(3)}}, {}, "average")
