"""Online model selection from lagged rolling performance of prediction streams."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np

from tempora.errors import AlignmentError, ConfigError
from tempora.metrics import CorrSeries, era_corr, windowed_ratio
from tempora.models import average_predictions

SELECTION_RULES = ("average", "momentum", "sharpe", "calmar")
_STAT = {"momentum": "mean", "sharpe": "sharpe", "calmar": "calmar"}


@dataclass(frozen=True)
class SelectionRule:
    kind: str = "momentum"

    def __post_init__(self):
        if self.kind not in SELECTION_RULES:
            raise ConfigError(f"selection rule must be one of {SELECTION_RULES}, got {self.kind!r}")


@dataclass
class MethodHistory:
    """Realised per-era scores of each method, appended as eras resolve."""

    methods: Sequence[str]
    warm_up: int = 52
    window: int = 52
    lag: int = 6
    scores: dict = field(default_factory=dict)

    def __post_init__(self):
        self.methods = list(self.methods)
        if not self.methods:
            raise ConfigError("no methods to select from")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("method names must be unique")
        if self.warm_up < 1 or self.window < 1 or self.lag < 0:
            raise ConfigError("warm_up and window must be >= 1, lag >= 0")
        for m in self.methods:
            self.scores.setdefault(m, {})

    def record(self, era: int, values: Mapping[str, float]) -> None:
        if set(values) != set(self.methods):
            raise AlignmentError(f"era {era}: scores for {sorted(values)} but methods are {self.methods}")
        for m in self.methods:
            self.scores[m][int(era)] = float(values[m])

    def series(self, method: str) -> CorrSeries:
        d = self.scores[method]
        eras = sorted(d)
        return CorrSeries(eras, [d[e] for e in eras])

    def resolved_eras(self, t: int) -> list[int]:
        """Eras scored for every method at or before ``t - lag``."""
        common = set.intersection(*(set(self.scores[m]) for m in self.methods))
        return sorted(e for e in common if e <= t - self.lag)


def _equal(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def select_method(history: MethodHistory, t: int, rule: SelectionRule | str) -> np.ndarray:
    """Weights over ``history.methods`` for era ``t``.

    Equal weights until ``warm_up`` eras are resolved at ``t - lag`` and
    always for the ``average`` rule; otherwise weight 1 on the method with
    the best mean / Sharpe / Calmar over eras ``[t-lag-window+1, t-lag]``.
    Ties go to the earliest registered method.
    """
    rule = SelectionRule(rule) if isinstance(rule, str) else rule
    n = len(history.methods)
    resolved = history.resolved_eras(t)
    if rule.kind == "average" or len(resolved) < history.warm_up:
        return _equal(n)
    first = t - history.lag - history.window + 1
    in_window = [e for e in resolved if e >= first]
    if not in_window:
        return _equal(n)
    stat = _STAT[rule.kind]
    values = [
        windowed_ratio(stat, [history.scores[m][e] for e in in_window]) for m in history.methods
    ]
    weights = np.zeros(n)
    weights[int(np.argmax(values))] = 1.0
    return weights


def combine(predictions: Sequence[np.ndarray], weights: np.ndarray) -> np.ndarray:
    """Weighted prediction; equal weights use the plain mean, one-hot copies the member."""
    weights = np.asarray(weights, dtype=np.float64)
    if np.all(weights == weights[0]):
        return average_predictions(predictions)
    hot = np.flatnonzero(weights == 1.0)
    if hot.size == 1 and np.count_nonzero(weights) == 1:
        return np.asarray(predictions[int(hot[0])], dtype=np.float64).copy()
    return average_predictions(predictions, weights)


class OnlineResult(NamedTuple):
    combined: CorrSeries
    weights: dict  # era -> weight vector
    method_scores: dict  # method -> CorrSeries
    predictions: dict  # era -> combined prediction


class OnlineSelector:
    """Incremental form of :func:`run_online_ensemble` for callers that build
    method predictions lazily, one era at a time."""

    def __init__(self, methods: Sequence[str], rule: SelectionRule | str,
                 warm_up: int = 52, window: int = 52, lag: int = 6):
        self.rule = SelectionRule(rule) if isinstance(rule, str) else rule
        self.history = MethodHistory(methods, warm_up=warm_up, window=window, lag=lag)
        self.last_era: int | None = None

    @property
    def methods(self) -> list[str]:
        return self.history.methods

    def weights(self, t: int) -> np.ndarray:
        return select_method(self.history, t, self.rule)

    def step(self, t: int, preds: Sequence[np.ndarray], target_fn: Callable[[int], np.ndarray],
             on_score: Callable[[int], None] | None = None):
        """Fix weights for era ``t``, combine, then score and record the era.

        Returns ``(weights, combined, combined_corr, method_corrs)``.
        """
        if self.last_era is not None and t <= self.last_era:
            raise AlignmentError(f"eras must increase: {t} after {self.last_era}")
        if len(preds) != len(self.methods):
            raise AlignmentError("one prediction per method required")
        w = self.weights(t)
        combo = combine(preds, w)
        if on_score is not None:
            on_score(t)
        target = target_fn(t)
        method_corrs = {m: era_corr(p, target) for m, p in zip(self.methods, preds)}
        self.history.record(t, method_corrs)
        self.last_era = t
        return w, combo, era_corr(combo, target), method_corrs


def run_online_ensemble(
    predictions: Mapping[str, Mapping[int, np.ndarray]],
    targets: Mapping[int, np.ndarray] | Callable[[int], np.ndarray],
    rule: SelectionRule | str,
    warm_up: int = 52,
    window: int = 52,
    lag: int = 6,
    on_score: Callable[[int], None] | None = None,
) -> OnlineResult:
    """Combine method streams era by era, scoring as each era resolves.

    ``targets`` is a mapping or a callable returning era ``t``'s target; it
    is only consulted when era ``t`` is scored, after its weights are fixed.
    Method scores for ``t`` join the history only after that.
    """
    methods = list(predictions)
    if not methods:
        raise ConfigError("no methods to select from")
    eras = sorted(predictions[methods[0]])
    for m in methods[1:]:
        if sorted(predictions[m]) != eras:
            raise AlignmentError(f"method {m!r} covers different eras")
    get_target = targets if callable(targets) else targets.__getitem__
    selector = OnlineSelector(methods, rule, warm_up, window, lag)
    combined_pairs, weights_out, combined_preds = [], {}, {}
    for t in eras:
        w, combo, corr, _ = selector.step(t, [predictions[m][t] for m in methods], get_target, on_score)
        combined_pairs.append((t, corr))
        weights_out[t] = w
        combined_preds[t] = combo
    return OnlineResult(
        CorrSeries.from_pairs(combined_pairs),
        weights_out,
        {m: selector.history.series(m) for m in methods},
        combined_preds,
    )
