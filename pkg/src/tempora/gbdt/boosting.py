"""Gradient boosting under squared-error loss with gbdt, dart and goss modes."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from tempora.errors import ConfigError, DataError, PruneCapError
from tempora.gbdt.config import BoostConfig
from tempora.gbdt.tree import Tree, grow_tree, to_bins

log = logging.getLogger(__name__)

# Named sub-streams of the booster seed.
_BAGGING, _FEATURES, _GOSS, _DART = range(4)


def _stream(seed: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(purpose,)))


@dataclass(frozen=True, eq=False)
class Booster:
    """A fitted additive tree model.

    Prediction is ``f0 + sum_k learning_rate * tree_weights[k] * trees[k](x)``.
    ``history`` holds per-round training (and validation) L2 losses, index 0
    being the loss of ``f0`` alone.
    """

    f0: float
    trees: tuple
    tree_weights: tuple
    mode: str
    learning_rate: float
    history: dict = field(default_factory=dict, compare=False)

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def __eq__(self, other):
        if not isinstance(other, Booster):
            return NotImplemented
        return (
            self.f0 == other.f0
            and self.mode == other.mode
            and self.learning_rate == other.learning_rate
            and self.tree_weights == other.tree_weights
            and self.trees == other.trees
        )

    __hash__ = None

    def predict(self, X, prune_first: int = 0) -> np.ndarray:
        return predict(self, X, prune_first=prune_first)


def predict(booster: Booster, X, prune_first: int = 0) -> np.ndarray:
    """Scores with the first ``prune_first`` trees left out.

    At most half of the trees (``floor(K / 2)``) may be pruned.
    """
    if hasattr(X, "features"):
        X = X.features
    X = np.asarray(X)
    k = booster.n_trees
    if prune_first < 0 or prune_first > k // 2:
        raise PruneCapError(f"prune_first={prune_first} exceeds half of {k} trees")
    out = np.full(X.shape[0], booster.f0, dtype=np.float64)
    for tree, w in zip(booster.trees[prune_first:], booster.tree_weights[prune_first:]):
        out += booster.learning_rate * w * tree.predict(X)
    return out


def goss_sample(gradients, top_rate: float, other_rate: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Gradient-based one-side sampling.

    Keeps the ``ceil(a n)`` rows with largest ``|g|`` at weight 1 and draws
    ``ceil(b n)`` of the rest uniformly at weight ``(1 - a) / b``.  When the
    two groups do not fit in ``n`` rows every row is kept at weight 1.
    Returns sorted row indices and their weights.
    """
    g = np.asarray(gradients, dtype=np.float64)
    n = g.shape[0]
    if not (top_rate > 0 and other_rate > 0) or top_rate + other_rate > 1 + 1e-12:
        raise ConfigError("goss needs a, b > 0 with a + b <= 1")
    n_top = math.ceil(top_rate * n - 1e-9)
    n_other = math.ceil(other_rate * n - 1e-9)
    if n_top + n_other >= n:
        return np.arange(n), np.ones(n)
    order = np.argsort(-np.abs(g), kind="stable")
    top = order[:n_top]
    rest = order[n_top:]
    other = rng.choice(rest, size=n_other, replace=False)
    rows = np.concatenate([top, other])
    weights = np.concatenate([np.ones(n_top), np.full(n_other, (1.0 - top_rate) / other_rate)])
    idx = np.argsort(rows, kind="stable")
    return rows[idx], weights[idx]


def dart_select(n_trees: int, drop_rate: float, skip_drop: float, rng) -> np.ndarray:
    """Indices of trees dropped for one dart round (empty for a plain round).

    With probability ``skip_drop`` nothing is dropped; otherwise each tree is
    dropped independently with probability ``drop_rate``, at least one.
    """
    if n_trees == 0:
        return np.empty(0, dtype=np.intp)
    if rng.random() < skip_drop:
        return np.empty(0, dtype=np.intp)
    dropped = np.flatnonzero(rng.random(n_trees) < drop_rate)
    if dropped.size == 0:
        dropped = np.array([rng.integers(n_trees)], dtype=np.intp)
    return dropped


def dart_normalize(tree_weights, dropped) -> tuple[list, float]:
    """Rescale after a dart round: dropped trees by ``k/(k+1)``, new tree ``1/(k+1)``."""
    weights = list(tree_weights)
    k = len(dropped)
    if k == 0:
        return weights, 1.0
    for i in dropped:
        weights[i] *= k / (k + 1.0)
    return weights, 1.0 / (k + 1.0)


def _grow(bins, grad, rows, cfg, min_data, features, weights=None) -> Tree:
    return grow_tree(
        bins, grad, rows,
        num_leaves=cfg.num_leaves, max_depth=cfg.max_depth, min_data_in_leaf=min_data,
        lambda_l1=cfg.lambda_l1, lambda_l2=cfg.lambda_l2, features=features, weights=weights,
    )


def dart_step(booster: Booster, X, y, cfg: BoostConfig, rng) -> tuple[Booster, np.ndarray]:
    """Append one dart tree to ``booster``; returns the new booster and the drop set.

    The new tree is fit to the residuals of the ensemble without the dropped
    trees, using every row and feature.
    """
    X = np.asarray(X)
    y = np.asarray(y, dtype=np.float64)
    dropped = dart_select(booster.n_trees, cfg.drop_rate, cfg.skip_drop, rng)
    keep = [i for i in range(booster.n_trees) if i not in set(dropped.tolist())]
    base = np.full(X.shape[0], booster.f0)
    for i in keep:
        base += booster.learning_rate * booster.tree_weights[i] * booster.trees[i].predict(X)
    bins = to_bins(X)
    tree = _grow(bins, y - base, np.arange(X.shape[0]), cfg,
                 cfg.resolved_min_data(X.shape[0]), np.arange(X.shape[1]))
    weights, new_w = dart_normalize(booster.tree_weights, dropped)
    out = Booster(booster.f0, booster.trees + (tree,), tuple(weights) + (new_w,),
                  booster.mode, booster.learning_rate)
    return out, dropped


def train(train_set, target: str | None = None, cfg: BoostConfig | None = None, validation=None) -> Booster:
    """Fit a booster on a panel (with ``target``) or on an ``(X, y)`` pair.

    ``validation`` has the same form and drives early stopping in gbdt mode.
    """
    cfg = cfg or BoostConfig()
    X, y = _xy(train_set, target)
    valid = None if validation is None else _xy(validation, target)
    return train_arrays(X, y, cfg, valid)


def _xy(data, target):
    if isinstance(data, tuple):
        X, y = data
        return np.asarray(X), np.asarray(y, dtype=np.float64)
    if target is None:
        raise ConfigError("target name required when training on a panel")
    return data.stack(target)


def _l2(y, f) -> float:
    r = y - f
    return float(np.dot(r, r) / r.shape[0])


def train_arrays(X, y, cfg: BoostConfig, valid=None) -> Booster:
    X = np.ascontiguousarray(X)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("empty training data")
    if y.shape != (X.shape[0],):
        raise DataError("target length does not match feature rows")
    if not np.all(np.isfinite(y)):
        raise DataError("target contains non-finite values")
    n, m = X.shape
    bins = to_bins(X)
    lr = cfg.learning_rate
    min_data = cfg.resolved_min_data(n)
    f0 = float(np.mean(y))
    F = np.full(n, f0)

    rng_bag = _stream(cfg.seed, _BAGGING)
    rng_feat = _stream(cfg.seed, _FEATURES)
    rng_goss = _stream(cfg.seed, _GOSS)
    rng_dart = _stream(cfg.seed, _DART)

    bagging = (
        (cfg.mode == "gbdt" or cfg.bagging_all_modes)
        and cfg.bagging_freq > 0
        and cfg.bagging_fraction < 1.0
    )
    n_bag = max(1, int(round(cfg.bagging_fraction * n)))
    n_feat = max(1, int(round(cfg.feature_fraction * m)))
    all_rows = np.arange(n)
    all_feats = np.arange(m)
    bag_rows = all_rows

    Xv = yv = Fv = None
    if valid is not None:
        Xv, yv = np.asarray(valid[0]), np.asarray(valid[1], dtype=np.float64)
        Fv = np.full(yv.shape[0], f0)
    early = cfg.mode == "gbdt" and valid is not None and cfg.early_stopping_patience is not None

    trees: list[Tree] = []
    weights: list[float] = []
    contrib: list[np.ndarray] = []
    contrib_v: list[np.ndarray] = []
    train_loss = [_l2(y, F)]
    valid_loss = [] if valid is None else [_l2(yv, Fv)]
    best_loss, best_iter, stale = (valid_loss[0] if valid_loss else None), 0, 0

    for k in range(cfg.n_estimators):
        if bagging and k % cfg.bagging_freq == 0:
            bag_rows = np.sort(rng_bag.choice(n, size=n_bag, replace=False))
        feats = all_feats if n_feat == m else np.sort(rng_feat.choice(m, size=n_feat, replace=False))

        dropped = np.empty(0, dtype=np.intp)
        base = F
        if cfg.mode == "dart":
            dropped = dart_select(len(trees), cfg.drop_rate, cfg.skip_drop, rng_dart)
            if dropped.size:
                base = F - lr * sum(weights[i] * contrib[i] for i in dropped)
        grad = y - base

        rows, row_w = bag_rows, None
        if cfg.mode == "goss":
            rows, w = goss_sample(grad[bag_rows], cfg.top_rate, cfg.other_rate, rng_goss)
            rows = bag_rows[rows]
            row_w = np.zeros(n)
            row_w[rows] = w
        tree = _grow(bins, grad, rows, cfg, min_data, feats, row_w)
        out = tree.predict(X)
        out_v = tree.predict(Xv) if valid is not None else None

        if dropped.size:
            new_weights, new_w = dart_normalize(weights, dropped)
            F = base + lr * sum(new_weights[i] * contrib[i] for i in dropped) + lr * new_w * out
            if valid is not None:
                Fv = Fv + lr * sum((new_weights[i] - weights[i]) * contrib_v[i] for i in dropped)
                Fv = Fv + lr * new_w * out_v
            weights = new_weights
        else:
            new_w = 1.0
            F = F + lr * out
            if valid is not None:
                Fv = Fv + lr * out_v
        trees.append(tree)
        weights.append(new_w)
        if cfg.mode == "dart":
            contrib.append(out)
            if valid is not None:
                contrib_v.append(out_v)
        train_loss.append(_l2(y, F))
        if valid is not None:
            valid_loss.append(_l2(yv, Fv))
            if early:
                if valid_loss[-1] < best_loss:
                    best_loss, best_iter, stale = valid_loss[-1], k + 1, 0
                else:
                    stale += 1
                    if stale >= cfg.early_stopping_patience:
                        log.debug("early stop at round %d, best %d", k + 1, best_iter)
                        break

    if early:
        trees, weights = trees[:best_iter], weights[:best_iter]
    history = {"train_loss": train_loss, "valid_loss": valid_loss}
    if early:
        history["best_iteration"] = best_iter
    return Booster(f0, tuple(trees), tuple(float(w) for w in weights), cfg.mode, lr, history)
