"""From-scratch gradient-boosted regression trees for integer-binned panels."""

from tempora.gbdt.boosting import (
    Booster,
    dart_normalize,
    dart_select,
    dart_step,
    goss_sample,
    predict,
    train,
    train_arrays,
)
from tempora.gbdt.config import MODES, SEARCH_BOUNDS, BoostConfig
from tempora.gbdt.io import dumps, load, loads, save
from tempora.gbdt.tree import Split, Tree, find_best_split, grow_tree, leaf_value, to_bins

__all__ = [
    "BoostConfig", "Booster", "MODES", "SEARCH_BOUNDS", "Split", "Tree",
    "dart_normalize", "dart_select", "dart_step", "dumps", "find_best_split",
    "goss_sample", "grow_tree", "leaf_value", "load", "loads", "predict", "save",
    "to_bins", "train", "train_arrays",
]
