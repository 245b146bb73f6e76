from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

from tempora.errors import ConfigError

MODES = ("gbdt", "dart", "goss")

# Search ranges for the boosting hyperparameters.  ``min_data_in_leaf`` is
# widened below the full-size range so desk-scale panels can be swept.
SEARCH_BOUNDS = {
    "n_estimators": (1, 1000),
    "learning_rate": (0.005, 0.1),
    "min_data_in_leaf": (1, 40000),
    "lambda_l1": (0.0, 1.0),
    "lambda_l2": (0.0, 1.0),
    "feature_fraction": (0.1, 1.0),
    "bagging_fraction": (0.5, 1.0),
    "bagging_freq": (0, 50),
    "drop_rate": (0.1, 0.5),
    "skip_drop": (0.1, 0.8),
    "top_rate": (0.1, 0.4),
    "other_rate": (0.05, 0.2),
    "num_leaves": (2, 4096),
    "max_depth": (-1, 64),
}


@dataclass(frozen=True)
class BoostConfig:
    """Hyperparameters for :func:`tempora.gbdt.train`.

    ``min_data_in_leaf=None`` resolves to ``max(20, ceil(0.001 * n_rows))``.
    ``max_depth <= 0`` means unlimited depth.  ``bagging_freq=0`` disables
    bagging; bagging only runs in gbdt mode unless ``bagging_all_modes``.
    ``early_stopping_patience`` applies to gbdt mode with a validation set.
    """

    mode: str = "gbdt"
    n_estimators: int = 100
    learning_rate: float = 0.1
    num_leaves: int = 16
    max_depth: int = 5
    min_data_in_leaf: int | None = None
    lambda_l1: float = 0.01
    lambda_l2: float = 0.01
    feature_fraction: float = 1.0
    bagging_fraction: float = 1.0
    bagging_freq: int = 10
    bagging_all_modes: bool = False
    drop_rate: float = 0.1
    skip_drop: float = 0.5
    top_rate: float = 0.2
    other_rate: float = 0.1
    early_stopping_patience: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n_estimators < 0:
            raise ConfigError("n_estimators must be >= 0")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if self.num_leaves < 2:
            raise ConfigError("num_leaves must be >= 2")
        if self.min_data_in_leaf is not None and self.min_data_in_leaf < 1:
            raise ConfigError("min_data_in_leaf must be >= 1")
        if self.lambda_l1 < 0 or self.lambda_l2 < 0:
            raise ConfigError("regularisation strengths must be >= 0")
        for name in ("feature_fraction", "bagging_fraction"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ConfigError(f"{name} must lie in (0, 1], got {v}")
        if self.bagging_freq < 0:
            raise ConfigError("bagging_freq must be >= 0")
        for name in ("drop_rate", "skip_drop"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if not (self.top_rate > 0 and self.other_rate > 0):
            raise ConfigError("top_rate and other_rate must be > 0")
        if self.top_rate + self.other_rate > 1 + 1e-12:
            raise ConfigError("top_rate + other_rate must be <= 1")
        if self.early_stopping_patience is not None and self.early_stopping_patience < 1:
            raise ConfigError("early_stopping_patience must be >= 1 or None")

    def resolved_min_data(self, n_rows: int) -> int:
        if self.min_data_in_leaf is not None:
            return self.min_data_in_leaf
        return max(20, math.ceil(0.001 * n_rows))

    def replace(self, **changes) -> "BoostConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "BoostConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown boosting keys: {sorted(unknown)}")
        return cls(**data)
