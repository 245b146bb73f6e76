"""Data model for era-grouped panels.

An era is one weekly cross-section: opaque row ids, a small-integer feature
matrix and zero or more target vectors.  Features are stored centred
(``-2..2``), targets centred (``-0.5..0.5``).  Eras are numbered from 1 with
era 1 falling on 2003-01-03.
"""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from tempora.errors import DataError, MissingTargetError, SchemaError

ERA_ONE = _dt.date(2003, 1, 3)

FEATURE_VALUES = (-2, -1, 0, 1, 2)
PRODUCT_VALUES = (-4, -2, -1, 0, 1, 2, 4)
TARGET_VALUES = (-0.5, -0.25, 0.0, 0.25, 0.5)
RAW_TARGET_VALUES = (0.0, 0.25, 0.5, 0.75, 1.0)
PRODUCT_PREFIX = "p_"

# Callables ``(era, target_name)`` notified on every resolved target read;
# used by access audits.
target_observers: list = []


def era_to_date(era: int) -> _dt.date:
    """Calendar date of an era (weekly spacing, era 1 = 2003-01-03)."""
    era = int(era)
    if era < 1:
        raise ValueError(f"era must be >= 1, got {era}")
    return ERA_ONE + _dt.timedelta(days=7 * (era - 1))


def date_to_era(date: _dt.date | str) -> int:
    """Inverse of :func:`era_to_date`; the date must fall on an era boundary."""
    if isinstance(date, str):
        date = _dt.date.fromisoformat(date)
    days = (date - ERA_ONE).days
    if days < 0 or days % 7:
        raise ValueError(f"{date} is not an era date")
    return days // 7 + 1


def normalize_features(raw) -> np.ndarray:
    """Map raw feature bins ``0..4`` to ``-2..2``."""
    raw = np.asarray(raw)
    if raw.ndim != 2:
        raise SchemaError(f"expected a 2-D feature matrix, got shape {raw.shape}")
    bad = ~np.isin(raw, (0, 1, 2, 3, 4))
    if bad.any():
        row, col = (int(i) for i in np.argwhere(bad)[0])
        raise SchemaError(
            f"feature value {raw[row, col]!r} at row {row}, column {col} is not a bin in 0..4"
        )
    return (raw.astype(np.int16) - 2).astype(np.int8)


def normalize_targets(raw) -> np.ndarray:
    """Map raw target bins ``{0, .25, .5, .75, 1}`` to ``{-.5, ..., .5}``."""
    raw = np.asarray(raw, dtype=np.float64)
    bad = ~np.isin(raw, RAW_TARGET_VALUES)
    if bad.any():
        idx = int(np.flatnonzero(bad.ravel())[0])
        raise SchemaError(f"target value {raw.ravel()[idx]!r} at position {idx} is not a valid bin")
    return raw - 0.5


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class PanelEra:
    """One era of the panel.

    ``targets`` maps target name to a vector, or to ``None`` when the label is
    not yet resolved (live eras).
    """

    era: int
    ids: tuple
    features: np.ndarray
    targets: Mapping[str, np.ndarray | None] = field(default_factory=dict)

    def __post_init__(self):
        feats = np.asarray(self.features)
        if feats.ndim != 2:
            raise SchemaError(f"era {self.era}: features must be 2-D, got shape {feats.shape}")
        if not np.issubdtype(feats.dtype, np.integer):
            raise SchemaError(f"era {self.era}: features must be integers, got {feats.dtype}")
        object.__setattr__(self, "era", int(self.era))
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))
        object.__setattr__(self, "features", _frozen(np.asfortranarray(feats, dtype=np.int8)))
        targets = {}
        for name, vec in dict(self.targets).items():
            targets[str(name)] = None if vec is None else _frozen(np.array(vec, dtype=np.float64))
        object.__setattr__(self, "targets", MappingProxyType(targets))

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def has_target(self, name: str) -> bool:
        return self.targets.get(name) is not None

    def target(self, name: str) -> np.ndarray:
        vec = self.targets.get(name)
        if vec is None:
            raise MissingTargetError(f"era {self.era} has no resolved target {name!r}")
        for observer in target_observers:
            observer(self.era, name)
        return vec

    def replace_features(self, features: np.ndarray) -> "PanelEra":
        return PanelEra(self.era, self.ids, features, self.targets)

    def __eq__(self, other):
        if not isinstance(other, PanelEra):
            return NotImplemented
        if (self.era, self.ids) != (other.era, other.ids):
            return False
        if not np.array_equal(self.features, other.features):
            return False
        if set(self.targets) != set(other.targets):
            return False
        for name, vec in self.targets.items():
            o = other.targets[name]
            if (vec is None) != (o is None):
                return False
            if vec is not None and not np.array_equal(vec, o):
                return False
        return True

    __hash__ = None


@dataclass(frozen=True, eq=False)
class PanelSet:
    """Ordered sequence of eras sharing one feature schema."""

    eras: tuple
    feature_names: tuple

    def __post_init__(self):
        object.__setattr__(self, "eras", tuple(self.eras))
        object.__setattr__(self, "feature_names", tuple(str(n) for n in self.feature_names))

    def __len__(self) -> int:
        return len(self.eras)

    def __iter__(self) -> Iterator[PanelEra]:
        return iter(self.eras)

    def __getitem__(self, i) -> PanelEra:
        return self.eras[i]

    def __eq__(self, other):
        if not isinstance(other, PanelSet):
            return NotImplemented
        return self.feature_names == other.feature_names and self.eras == other.eras

    __hash__ = None

    @property
    def era_ids(self) -> list[int]:
        return [e.era for e in self.eras]

    @property
    def target_names(self) -> list[str]:
        names: list[str] = []
        for e in self.eras:
            for n in e.targets:
                if n not in names:
                    names.append(n)
        return names

    @property
    def n_rows(self) -> int:
        return sum(e.n_rows for e in self.eras)

    def era(self, era_id: int) -> PanelEra:
        for e in self.eras:
            if e.era == era_id:
                return e
        raise KeyError(era_id)

    def select(self, keep: Iterable[int]) -> "PanelSet":
        keep = set(int(k) for k in keep)
        return PanelSet(tuple(e for e in self.eras if e.era in keep), self.feature_names)

    def between(self, first: int, last: int) -> "PanelSet":
        """Eras with ``first <= era <= last``."""
        return PanelSet(tuple(e for e in self.eras if first <= e.era <= last), self.feature_names)

    def before(self, last: int) -> "PanelSet":
        return PanelSet(tuple(e for e in self.eras if e.era <= last), self.feature_names)

    def with_eras(self, eras: Sequence[PanelEra], feature_names: Sequence[str] | None = None) -> "PanelSet":
        return PanelSet(tuple(eras), self.feature_names if feature_names is None else feature_names)

    def stack(self, target: str | None = None):
        """Concatenate eras into one row-major matrix (and target vector).

        Raises :class:`MissingTargetError` if any era lacks ``target``.
        """
        if not self.eras:
            raise DataError("empty panel")
        X = np.concatenate([np.ascontiguousarray(e.features) for e in self.eras], axis=0)
        if target is None:
            return X
        y = np.concatenate([e.target(target) for e in self.eras])
        return X, y


@dataclass(frozen=True)
class Violation:
    """One broken panel invariant with its coordinates (``None`` when n/a)."""

    rule: str
    message: str
    era: int | None = None
    row: int | None = None
    column: str | None = None


def _allowed_values(name: str):
    return PRODUCT_VALUES if name.startswith(PRODUCT_PREFIX) else FEATURE_VALUES


def validate_panel(panel: PanelSet) -> list[Violation]:
    """Return every invariant violation in ``panel`` (empty list when valid)."""
    out: list[Violation] = []
    m = len(panel.feature_names)
    if len(set(panel.feature_names)) != m:
        out.append(Violation("schema", "duplicate feature names"))
    prev = None
    seen: set[int] = set()
    for e in panel.eras:
        if e.era < 1:
            out.append(Violation("era_id", f"era id {e.era} < 1", era=e.era))
        if e.era in seen:
            out.append(Violation("era_order", f"duplicate era {e.era}", era=e.era))
        elif prev is not None and e.era <= prev:
            out.append(Violation("era_order", f"era {e.era} follows era {prev}", era=e.era))
        seen.add(e.era)
        prev = e.era

        n = len(e.ids)
        if e.features.shape[0] != n:
            out.append(Violation("shape", f"{e.features.shape[0]} feature rows for {n} ids", era=e.era))
        if e.features.shape[1] != m:
            out.append(Violation("shape", f"{e.features.shape[1]} feature columns, schema has {m}", era=e.era))

        if len(set(e.ids)) != n:
            first: dict[str, int] = {}
            for r, i in enumerate(e.ids):
                if i in first:
                    out.append(Violation("duplicate_id", f"id {i!r} repeats row {first[i]}", era=e.era, row=r))
                else:
                    first[i] = r

        for c in range(min(m, e.features.shape[1])):
            name = panel.feature_names[c]
            bad = np.flatnonzero(~np.isin(e.features[:, c], _allowed_values(name)))
            for r in bad:
                out.append(Violation(
                    "feature_value", f"value {int(e.features[r, c])} not allowed",
                    era=e.era, row=int(r), column=name,
                ))

        for tname, vec in e.targets.items():
            if vec is None:
                continue
            if vec.shape != (n,):
                out.append(Violation("shape", f"target length {vec.shape} for {n} rows", era=e.era, column=tname))
                continue
            for r in np.flatnonzero(~np.isin(vec, TARGET_VALUES)):
                out.append(Violation(
                    "target_value", f"value {vec[r]!r} not allowed", era=e.era, row=int(r), column=tname,
                ))
    return out
