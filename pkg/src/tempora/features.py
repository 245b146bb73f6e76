"""Per-era feature augmentation: pairwise products and random dropout masks."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from tempora.errors import ConfigError
from tempora.panel import PanelSet

_PAIRS, _MASK = 0, 1


@dataclass(frozen=True)
class FeatureEngConfig:
    """``fixed_mask`` reuses one random stream for every era instead of a
    fresh per-era stream."""

    n_products: int = 50
    dropout_pct: float = 0.1
    seed: int = 0
    fixed_mask: bool = False

    def __post_init__(self):
        if self.n_products < 0:
            raise ConfigError("n_products must be >= 0")
        if not 0.0 <= self.dropout_pct <= 1.0:
            raise ConfigError("dropout_pct must lie in [0, 1]")


def sample_pairs(n_features: int, n_products: int, seed: int) -> list[tuple[int, int]]:
    """``n_products`` distinct unordered feature pairs, uniformly without replacement."""
    total = n_features * (n_features - 1) // 2
    if n_products > total:
        raise ConfigError(f"{n_products} products requested but only {total} feature pairs exist")
    pairs = list(itertools.combinations(range(n_features), 2))
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(_PAIRS,)))
    chosen = np.sort(rng.choice(total, size=n_products, replace=False))
    return [pairs[i] for i in chosen]


def product_features(panel: PanelSet, cfg: FeatureEngConfig) -> PanelSet:
    """Append ``p_<i>_<j>`` = feature i times feature j columns (same pairs in every era)."""
    m = len(panel.feature_names)
    pairs = sample_pairs(m, cfg.n_products, cfg.seed)
    if not pairs:
        return panel
    left = np.array([i for i, _ in pairs])
    right = np.array([j for _, j in pairs])
    names = panel.feature_names + tuple(f"p_{i}_{j}" for i, j in pairs)
    eras = []
    for era in panel:
        X = era.features.astype(np.int8)
        prod = X[:, left] * X[:, right]
        eras.append(era.replace_features(np.hstack([X, prod])))
    return PanelSet(tuple(eras), names)


def dropout_mask(shape, pct: float, seed: int, era: int | None) -> np.ndarray:
    """Boolean keep-mask; each entry dropped with probability ``pct``."""
    key = (_MASK,) if era is None else (_MASK, int(era))
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))
    return rng.random(shape) >= pct


def apply_dropout_mask(panel: PanelSet, cfg: FeatureEngConfig) -> PanelSet:
    """Zero each feature entry independently with probability ``dropout_pct``."""
    if cfg.dropout_pct == 0.0:
        return panel
    eras = []
    for era in panel:
        keep = dropout_mask(era.features.shape, cfg.dropout_pct, cfg.seed,
                            None if cfg.fixed_mask else era.era)
        eras.append(era.replace_features(np.where(keep, era.features, 0).astype(np.int8)))
    return PanelSet(tuple(eras), panel.feature_names)


def engineer(panel: PanelSet, cfg: FeatureEngConfig) -> PanelSet:
    """Products first, then dropout on the augmented matrix."""
    return apply_dropout_mask(product_features(panel, cfg), cfg)
