"""Lagged rolling statistics of per-era feature correlations."""

from __future__ import annotations

import numpy as np

from tempora.errors import NotReadyError
from tempora.metrics import column_corrs


class EraFeatureCorrs:
    """Lazily computed per-era ``Corr(feature, target)`` vectors for a panel.

    Only eras inside a requested window are ever touched, so statistics for
    era ``t`` never read data later than ``t - lag``.
    """

    def __init__(self, panel, target: str):
        self.panel = panel
        self.target = target
        self._cache: dict[int, np.ndarray] = {}
        self._by_id = {e.era: e for e in panel}
        self._ids = np.array(sorted(self._by_id), dtype=np.int64)

    @property
    def feature_names(self):
        return self.panel.feature_names

    def era_corrs(self, era_id: int) -> np.ndarray:
        if era_id not in self._cache:
            era = self._by_id[era_id]
            self._cache[era_id] = column_corrs(era.features, era.target(self.target))
        return self._cache[era_id]

    def window(self, t: int, window: int, lag: int) -> tuple[np.ndarray, np.ndarray]:
        """Era ids and stacked corr vectors for eras in ``[t-lag-window+1, t-lag]``.

        Eras lacking the target are skipped.  Raises :class:`NotReadyError`
        when nothing usable remains.
        """
        last = t - lag
        first = last - window + 1
        lo, hi = np.searchsorted(self._ids, [first, last + 1])
        ids = [int(i) for i in self._ids[lo:hi] if self._by_id[int(i)].has_target(self.target)]
        if not ids:
            raise NotReadyError(f"no usable eras in [{first}, {last}] for era {t}")
        return np.array(ids, dtype=np.int64), np.vstack([self.era_corrs(i) for i in ids])
