"""Ranking-model contract, the factor-momentum baseline and ensembling helpers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence, runtime_checkable

import numpy as np

from tempora import gbdt
from tempora.errors import AlignmentError, ConfigError, DataError, NotReadyError
from tempora.metrics import CorrSeries, SummaryMetrics, summarize
from tempora.panel import PanelEra, PanelSet
from tempora.rolling import EraFeatureCorrs

MOMENTUM_WINDOW = 52
MOMENTUM_LAG = 6


@runtime_checkable
class RankingModel(Protocol):
    """Anything that can be fit on a panel and score one era.

    ``predict`` must not read the era's targets; only the ordering of its
    output matters.
    """

    def fit(self, train: PanelSet, target: str, seed: int = 0, validation: PanelSet | None = None): ...

    def predict(self, era: PanelEra) -> np.ndarray: ...


def momentum_signs(corrs: EraFeatureCorrs, t: int, window: int = MOMENTUM_WINDOW, lag: int = MOMENTUM_LAG) -> np.ndarray:
    """Sign of each feature's mean Corr over the lagged trailing window."""
    _, mat = corrs.window(t, window, lag)
    return np.sign(mat.mean(axis=0))


class FactorCorrCache(EraFeatureCorrs):
    def momentum_scores(self, era: PanelEra, window: int = MOMENTUM_WINDOW, lag: int = MOMENTUM_LAG) -> np.ndarray:
        signs = momentum_signs(self, era.era, window, lag)
        return era.features.astype(np.float64) @ signs


def factor_momentum_predict(
    history: PanelSet, era: PanelEra, target: str,
    window: int = MOMENTUM_WINDOW, lag: int = MOMENTUM_LAG,
) -> np.ndarray:
    """Sum of features signed by their trailing mean Corr with the target.

    Uses the up-to-``window`` eras of ``history`` ending at ``era - lag``; a
    feature whose mean is exactly zero is left out.
    """
    return FactorCorrCache(history, target).momentum_scores(era, window, lag)


class FactorMomentumModel:
    """Linear factor-momentum baseline.

    ``fit`` only records the history; call :meth:`extend` to make later
    (already resolved) eras available for lagged sign estimates.
    """

    def __init__(self, window: int = MOMENTUM_WINDOW, lag: int = MOMENTUM_LAG):
        self.window = window
        self.lag = lag
        self._cache: FactorCorrCache | None = None

    def fit(self, train: PanelSet, target: str, seed: int = 0, validation: PanelSet | None = None):
        self._cache = FactorCorrCache(train, target)
        return self

    def extend(self, history: PanelSet) -> "FactorMomentumModel":
        if self._cache is None:
            raise NotReadyError("model not fitted")
        self._cache = FactorCorrCache(history, self._cache.target)
        return self

    def signs(self, t: int) -> np.ndarray:
        if self._cache is None:
            raise NotReadyError("model not fitted")
        return momentum_signs(self._cache, t, self.window, self.lag)

    def predict(self, era: PanelEra) -> np.ndarray:
        if self._cache is None:
            raise NotReadyError("model not fitted")
        return self._cache.momentum_scores(era, self.window, self.lag)


class GBDTModel:
    """Ranking model backed by :mod:`tempora.gbdt`."""

    def __init__(self, config: gbdt.BoostConfig | None = None, prune_first: int = 0):
        self.config = config or gbdt.BoostConfig()
        self.prune_first = prune_first
        self.booster: gbdt.Booster | None = None

    def fit(self, train: PanelSet, target: str, seed: int = 0, validation: PanelSet | None = None):
        cfg = self.config.replace(seed=int(seed))
        self.booster = gbdt.train(train, target, cfg, validation)
        return self

    def predict(self, era: PanelEra) -> np.ndarray:
        if self.booster is None:
            raise NotReadyError("model not fitted")
        return gbdt.predict(self.booster, era.features, self.prune_first)


def average_predictions(scores: Sequence, weights=None) -> np.ndarray:
    """Element-wise (optionally weighted) mean of per-model score vectors."""
    arrays = [np.asarray(s, dtype=np.float64) for s in scores]
    if not arrays:
        raise ValueError("no predictions to average")
    shape = arrays[0].shape
    if any(a.shape != shape for a in arrays):
        raise ValueError(f"shape mismatch: {[a.shape for a in arrays]}")
    if len(arrays) == 1:
        return arrays[0].copy()
    stack = np.vstack(arrays)
    if weights is None:
        # identical members average to themselves exactly
        if np.all(stack == stack[0]):
            return arrays[0].copy()
        return stack.mean(axis=0)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (len(arrays),):
        raise ValueError("one weight per model required")
    return weights @ stack


def average_metrics(series: Sequence[CorrSeries]) -> SummaryMetrics:
    """Summarise each member's series, then average every metric across members."""
    if not series:
        raise ValueError("no series to average")
    eras = series[0].eras
    if any(not np.array_equal(s.eras, eras) for s in series):
        raise AlignmentError("member series do not share an era index")
    summaries = [summarize(s) for s in series]
    return SummaryMetrics(
        *(float(np.mean([getattr(m, f) for m in summaries])) for f in
          ("mean", "volatility", "max_drawdown", "sharpe", "calmar"))
    )


def multi_target_average(models: Mapping[str, RankingModel], era: PanelEra, targets: Sequence[str]) -> np.ndarray:
    """Average of the per-target models' predictions for one era."""
    missing = [t for t in targets if t not in models]
    if missing:
        raise ConfigError(f"no fitted model for targets {missing}")
    return average_predictions([models[t].predict(era) for t in targets])


ENSEMBLE_MODES = ("over-predictions", "over-models")


@dataclass
class EnsembleSpec:
    """Fitted members keyed by ``(seed_index, target)``."""

    members: dict = field(default_factory=dict)
    mode: str = "over-predictions"
    n_seeds: int = 10
    targets: tuple = ("main",)

    def __post_init__(self):
        if self.mode not in ENSEMBLE_MODES:
            raise ConfigError(f"ensemble mode must be one of {ENSEMBLE_MODES}")
        if self.n_seeds < 1:
            raise ConfigError("n_seeds must be >= 1")
        if not self.targets:
            raise ConfigError("at least one target required")

    def seed_predictions(self, era: PanelEra) -> list[np.ndarray]:
        """One multi-target-averaged prediction per seed."""
        if not self.members:
            raise DataError("ensemble has no members")
        return [
            multi_target_average({t: self.members[(s, t)] for t in self.targets}, era, self.targets)
            for s in range(self.n_seeds)
        ]

    def predict(self, era: PanelEra) -> np.ndarray:
        return average_predictions(self.seed_predictions(era))


def member_seed(master_seed: int, seed_index: int, target_index: int) -> int:
    """Deterministic 32-bit seed for one ensemble member."""
    ss = np.random.SeedSequence([int(master_seed), int(seed_index), int(target_index)])
    return int(ss.generate_state(1)[0])
