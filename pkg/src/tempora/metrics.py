"""Era scoring, portfolio summary metrics and volatility-regime labelling."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from tempora.errors import AlignmentError, DataError, UndefinedMetricError

NRVIX_WINDOW = 52
NRVIX_THRESHOLD = 0.025


def rank_normalize(scores) -> np.ndarray:
    """Average ranks mapped to ``(r - 0.5) / N``."""
    scores = np.asarray(scores, dtype=np.float64)
    return (rankdata(scores, method="average") - 0.5) / scores.shape[0]


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    da = a - a.mean()
    db = b - b.mean()
    denom = math.sqrt(float(np.dot(da, da)) * float(np.dot(db, db)))
    return float(np.dot(da, db)) / denom


def era_corr(scores, target) -> float:
    """Correlation of rank-normalised ``scores`` with the raw ``target``.

    Constant scores carry no ordering and score 0.0.  A constant target makes
    the correlation undefined.
    """
    scores = np.asarray(scores, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if scores.shape != target.shape or scores.ndim != 1:
        raise ValueError(f"shape mismatch: scores {scores.shape}, target {target.shape}")
    if scores.shape[0] < 2:
        raise ValueError("need at least two rows to score an era")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    if np.all(target == target[0]):
        raise UndefinedMetricError("constant target: correlation undefined")
    if np.all(scores == scores[0]):
        return 0.0
    value = _pearson(rank_normalize(scores), target)
    return min(1.0, max(-1.0, value))


def column_corrs(X, target) -> np.ndarray:
    """``era_corr`` of every column of ``X`` against ``target`` (vectorised)."""
    X = np.asarray(X, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    n = X.shape[0]
    if np.all(target == target[0]):
        raise UndefinedMetricError("constant target: correlation undefined")
    ranks = (rankdata(X, method="average", axis=0) - 0.5) / n
    ranks -= ranks.mean(axis=0)
    t = target - target.mean()
    num = t @ ranks
    den = np.sqrt((ranks * ranks).sum(axis=0) * float(t @ t))
    out = np.zeros(X.shape[1])
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    return np.clip(out, -1.0, 1.0)


@dataclass(frozen=True, eq=False)
class CorrSeries:
    """Per-era score sequence, strictly increasing in era id."""

    eras: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        eras = np.asarray(self.eras, dtype=np.int64).reshape(-1)
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if eras.shape != values.shape:
            raise ValueError("eras and values must have equal length")
        if eras.size > 1 and np.any(np.diff(eras) <= 0):
            raise ValueError("era ids must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError("corr values must be finite")
        eras.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "eras", eras)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_pairs(cls, pairs) -> "CorrSeries":
        pairs = list(pairs)
        return cls([p[0] for p in pairs], [p[1] for p in pairs])

    def __len__(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other):
        if not isinstance(other, CorrSeries):
            return NotImplemented
        return np.array_equal(self.eras, other.eras) and np.array_equal(self.values, other.values)

    __hash__ = None

    def as_dict(self) -> dict[int, float]:
        return {int(e): float(v) for e, v in zip(self.eras, self.values)}

    def subset(self, keep) -> "CorrSeries":
        mask = np.isin(self.eras, np.asarray(list(keep), dtype=np.int64))
        return CorrSeries(self.eras[mask], self.values[mask])

    def window(self, first: int, last: int) -> "CorrSeries":
        mask = (self.eras >= first) & (self.eras <= last)
        return CorrSeries(self.eras[mask], self.values[mask])


@dataclass(frozen=True)
class SummaryMetrics:
    mean: float
    volatility: float
    max_drawdown: float
    sharpe: float
    calmar: float

    @classmethod
    def from_moments(cls, mean: float, volatility: float, max_drawdown: float) -> "SummaryMetrics":
        """Build the two ratios from reported moments.

        Zero volatility raises; zero drawdown gives ``calmar = +inf``.
        """
        if volatility < 0 or max_drawdown < 0:
            raise ValueError("volatility and max_drawdown must be non-negative")
        if volatility == 0:
            raise UndefinedMetricError("zero volatility: Sharpe ratio undefined")
        calmar = math.inf if max_drawdown == 0 else mean / max_drawdown
        return cls(float(mean), float(volatility), float(max_drawdown), mean / volatility, calmar)

    def as_dict(self) -> dict[str, float]:
        return {
            "mean": self.mean,
            "volatility": self.volatility,
            "max_drawdown": self.max_drawdown,
            "sharpe": self.sharpe,
            "calmar": self.calmar,
        }


def max_drawdown(values) -> float:
    """Largest peak-to-trough fall of the cumulative sum path (starting at 0)."""
    values = np.asarray(values, dtype=np.float64)
    path = np.concatenate([[0.0], np.cumsum(values)])
    return float(np.max(np.maximum.accumulate(path) - path))


def summarize(series: CorrSeries | Sequence[float]) -> SummaryMetrics:
    values = series.values if isinstance(series, CorrSeries) else np.asarray(series, dtype=np.float64)
    if values.shape[0] < 2:
        raise DataError("need at least two eras to summarize")
    return SummaryMetrics.from_moments(
        float(values.mean()), float(values.std()), max_drawdown(values)
    )


def windowed_ratio(kind: str, values) -> float:
    """Mean, Sharpe or Calmar of a short window, never raising.

    Degenerate denominators map to signed infinity (Sharpe) or ``+inf``
    (Calmar, zero drawdown) so that windows can always be ranked.
    """
    values = np.asarray(values, dtype=np.float64)
    mean = float(values.mean())
    if kind == "mean":
        return mean
    if kind == "sharpe":
        vol = float(values.std())
        if vol > 0:
            return mean / vol
        return math.copysign(math.inf, mean) if mean != 0 else 0.0
    if kind == "calmar":
        dd = max_drawdown(values)
        return math.inf if dd == 0 else mean / dd
    raise ValueError(f"unknown statistic {kind!r}")


class Regime(str, enum.Enum):
    HIGH = "high"
    LOW = "low"
    UNDEFINED = "undefined"


@dataclass(frozen=True)
class RegimeLabel:
    era: int
    label: Regime


def nmi_series(panel, target: str, window: int = 52, lag: int = 6) -> CorrSeries:
    """Per-era Corr of the factor-momentum baseline ("market index").

    Eras where the baseline has no lagged history, or that lack the target,
    are omitted.
    """
    from tempora.models import FactorCorrCache

    cache = FactorCorrCache(panel, target)
    pairs = []
    for era in panel:
        if not era.has_target(target):
            continue
        try:
            scores = cache.momentum_scores(era, window=window, lag=lag)
        except DataError:
            continue
        pairs.append((era.era, era_corr(scores, era.target(target))))
    return CorrSeries.from_pairs(pairs)


@dataclass(frozen=True, eq=False)
class NrvixSeries:
    """Rolling volatility of the market index; ``nan`` marks undefined eras."""

    eras: np.ndarray
    values: np.ndarray

    def __iter__(self):
        return iter(zip(self.eras.tolist(), self.values.tolist()))


def nrvix(nmi: CorrSeries, window: int = NRVIX_WINDOW) -> NrvixSeries:
    """Population std of the trailing ``window`` index values at each era."""
    v = nmi.values
    out = np.full(v.shape[0], np.nan)
    for i in range(window - 1, v.shape[0]):
        out[i] = v[i - window + 1 : i + 1].std()
    return NrvixSeries(nmi.eras.copy(), out)


def classify_regime(value, threshold: float = NRVIX_THRESHOLD) -> Regime:
    """``high`` strictly above the threshold, ``low`` at or below it."""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return Regime.UNDEFINED
    return Regime.HIGH if value > threshold else Regime.LOW


def classify_series(index: NrvixSeries, threshold: float = NRVIX_THRESHOLD) -> list[RegimeLabel]:
    return [RegimeLabel(int(e), classify_regime(float(v), threshold)) for e, v in index]


def regime_report(
    series: CorrSeries, labels: Sequence[RegimeLabel] | Mapping[int, Regime]
) -> dict[str, SummaryMetrics]:
    """Summary over all eras and over the high/low subsets.

    A subset with fewer than two eras is omitted.  Each subset's drawdown is
    taken along its own cumulative path.
    """
    if not isinstance(labels, Mapping):
        labels = {lab.era: lab.label for lab in labels}
    missing = [int(e) for e in series.eras if int(e) not in labels]
    if missing:
        raise AlignmentError(f"no regime label for eras {missing[:5]}")
    report = {"all": summarize(series)}
    for regime in (Regime.HIGH, Regime.LOW):
        keep = [int(e) for e in series.eras if Regime(labels[int(e)]) is regime]
        if len(keep) >= 2:
            report[regime.value] = summarize(series.subset(keep))
    return report
