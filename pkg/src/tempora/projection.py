"""Linear feature neutralisation with fixed or per-era (dynamic) feature subsets."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from tempora.errors import ConfigError, DataError
from tempora.metrics import era_corr
from tempora.panel import PanelEra
from tempora.rolling import EraFeatureCorrs

log = logging.getLogger(__name__)

RULE_KINDS = ("fixed", "low_mean", "high_mean", "low_vol", "high_vol")
DYNAMIC_KINDS = RULE_KINDS[1:]
RCOND = 1e-10


def default_k(n_features: int) -> int:
    """Subset size keeping the reference ratio of 420 of 1181 features."""
    return max(1, n_features // 3)


@dataclass(frozen=True)
class ProjectionRule:
    kind: str = "low_mean"
    k: int = 420
    fixed_set: tuple | None = None
    window: int = 52
    lag: int = 6
    beta: float = 1.0

    def __post_init__(self):
        if self.kind not in RULE_KINDS:
            raise ConfigError(f"projection rule must be one of {RULE_KINDS}, got {self.kind!r}")
        if self.kind == "fixed":
            if not self.fixed_set:
                raise ConfigError("fixed projection needs a feature list")
            object.__setattr__(self, "fixed_set", tuple(self.fixed_set))
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.lag < 0 or self.window < 1:
            raise ConfigError("lag must be >= 0 and window >= 1")
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigError("beta must lie in [0, 1]")


def project_linear(y, X, beta: float = 1.0) -> np.ndarray:
    """Remove ``beta`` times the least-squares fit of ``y`` on the columns of ``X``.

    Singular values below ``1e-10 * sigma_max`` are treated as zero, so a
    rank-deficient or all-zero ``X`` is handled.
    """
    y = np.asarray(y, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError(f"shape mismatch: y {y.shape}, X {X.shape}")
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
        raise ValueError("inputs must be finite")
    if X.shape[1] == 0 or beta == 0.0 or not np.any(X):
        return y.copy()
    coef, *_ = np.linalg.lstsq(X, y, rcond=RCOND)
    return y - beta * (X @ coef)


def fnc(projected, target) -> float:
    """Feature-neutral Corr: era Corr of already projected scores."""
    return era_corr(projected, target)


@dataclass(frozen=True, eq=False)
class FeatureCorrStats:
    """Rolling mean / population std of per-era feature Corr for one era."""

    era: int
    feature_names: tuple
    mean: np.ndarray
    std: np.ndarray
    eras_used: np.ndarray


def feature_corr_stats(corrs: EraFeatureCorrs, t: int, window: int = 52, lag: int = 6) -> FeatureCorrStats:
    """Statistics over eras ``[t-lag-window+1, t-lag]`` of the available history.

    ``corrs`` may be built from any panel history; later eras are never read.
    """
    ids, mat = corrs.window(t, window, lag)
    return FeatureCorrStats(t, tuple(corrs.feature_names), mat.mean(axis=0), mat.std(axis=0), ids)


def select_projection_set(stats: FeatureCorrStats, rule: ProjectionRule) -> list[str]:
    """Feature subset chosen by ``rule``; ties broken by feature name."""
    names = list(stats.feature_names)
    if rule.kind == "fixed":
        unknown = [f for f in rule.fixed_set if f not in names]
        if unknown:
            raise ConfigError(f"fixed set names unknown features {unknown[:5]}")
        return list(rule.fixed_set)
    if rule.k > len(names):
        raise ConfigError(f"k={rule.k} exceeds the {len(names)} available features")
    values = stats.mean if rule.kind.endswith("mean") else stats.std
    if rule.kind.startswith("high"):
        values = -values
    order = sorted(range(len(names)), key=lambda i: (values[i], names[i]))
    return [names[i] for i in order[: rule.k]]


class ProjectionOutcome(NamedTuple):
    scores: np.ndarray
    features: list | None  # None when the warm-up fallback was used
    fallback: bool


def _columns(feature_names: Sequence[str], subset: Sequence[str]) -> np.ndarray:
    index = {n: i for i, n in enumerate(feature_names)}
    unknown = [n for n in subset if n not in index]
    if unknown:
        raise ConfigError(f"projection set names unknown features {unknown[:5]}")
    return np.array([index[n] for n in subset], dtype=np.intp)


def dynamic_project(
    y, era: PanelEra, rule: ProjectionRule, stats: FeatureCorrStats | None,
    feature_names: Sequence[str] | None = None,
) -> ProjectionOutcome:
    """Project ``y`` on the complement of the subset chosen for this era.

    Without statistics (warm-up) a dynamic rule returns ``y`` unchanged and
    flags the fallback; the fixed rule needs no statistics.
    """
    y = np.asarray(y, dtype=np.float64)
    if rule.kind == "fixed":
        names = feature_names if feature_names is not None else (stats.feature_names if stats else None)
        if names is None:
            raise ConfigError("feature names needed for fixed projection")
        subset = list(rule.fixed_set)
    elif stats is None:
        log.warning("era %d: no lagged statistics yet, leaving scores unprojected", era.era)
        return ProjectionOutcome(y.copy(), None, True)
    else:
        names = stats.feature_names if feature_names is None else feature_names
        subset = select_projection_set(stats, rule)
    X = era.features[:, _columns(names, subset)]
    return ProjectionOutcome(project_linear(y, X, rule.beta), subset, False)


class DynamicProjector:
    """Applies one or more rules era by era from lagged statistics of ``history``.

    ``history`` may hold eras beyond the one being projected; only eras at or
    before ``t - lag`` are read.
    """

    def __init__(self, history, target: str, window: int = 52, lag: int = 6):
        self.corrs = EraFeatureCorrs(history, target)
        self.window = window
        self.lag = lag

    @property
    def feature_names(self):
        return self.corrs.feature_names

    def stats(self, t: int) -> FeatureCorrStats | None:
        try:
            return feature_corr_stats(self.corrs, t, self.window, self.lag)
        except DataError:
            return None

    def project(self, y, era: PanelEra, rule: ProjectionRule, stats=None) -> ProjectionOutcome:
        if rule.kind != "fixed" and stats is None:
            stats = self.stats(era.era)
        return dynamic_project(y, era, rule, stats, self.feature_names)


def random_projection_sets(feature_names: Sequence[str], k: int, n_sets: int, seed: int) -> list[list[str]]:
    """Random fixed subsets used as a control for the statistical rules."""
    if k > len(feature_names):
        raise ConfigError("k exceeds number of features")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    out = []
    for _ in range(n_sets):
        idx = np.sort(rng.choice(len(feature_names), size=k, replace=False))
        out.append([feature_names[i] for i in idx])
    return out
