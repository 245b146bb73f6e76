"""Grouped time-series splits over eras with leakage gaps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from tempora.errors import SplitSpecError
from tempora.panel import PanelSet, date_to_era

# Last era of the reference test period (2022-09-23).
REFERENCE_TEST_END = 1030


@dataclass(frozen=True)
class GroupedSplitSpec:
    """Inclusive era ranges separated by gaps of at least ``gap1``/``gap2`` eras.

    Validity requires ``train.end + gap1 < validation.start`` and
    ``validation.end + gap2 < test.start``.  Eras inside the gaps belong to
    no output.
    """

    train: tuple
    gap1: int
    validation: tuple
    gap2: int
    test: tuple
    name: str = ""

    def __post_init__(self):
        for attr in ("train", "validation", "test"):
            object.__setattr__(self, attr, tuple(int(v) for v in getattr(self, attr)))
        object.__setattr__(self, "gap1", int(self.gap1))
        object.__setattr__(self, "gap2", int(self.gap2))
        for attr in ("train", "validation", "test"):
            rng = getattr(self, attr)
            if len(rng) != 2:
                raise SplitSpecError(f"{attr} must be a (first, last) pair")
            if rng[0] < 1 or rng[1] < rng[0]:
                raise SplitSpecError(f"{attr} range {rng} is empty or reversed")
        if self.gap1 < 0 or self.gap2 < 0:
            raise SplitSpecError("gaps must be >= 0")
        if not self.train[1] + self.gap1 < self.validation[0]:
            raise SplitSpecError(
                f"validation starts at {self.validation[0]}, needs > train end {self.train[1]} + gap {self.gap1}"
            )
        if not self.validation[1] + self.gap2 < self.test[0]:
            raise SplitSpecError(
                f"test starts at {self.test[0]}, needs > validation end {self.validation[1]} + gap {self.gap2}"
            )

    def to_dict(self) -> dict:
        return {
            "train": list(self.train), "gap1": self.gap1,
            "validation": list(self.validation), "gap2": self.gap2, "test": list(self.test),
        }


class Split(NamedTuple):
    train: PanelSet
    validation: PanelSet
    test: PanelSet


def make_split(panel: PanelSet, spec: GroupedSplitSpec) -> Split:
    """Partition ``panel`` by the split's era ranges.

    Ranges may extend past the panel's last era (the test range of a preset
    is clipped that way); each part must still contain at least one era.
    """
    if not isinstance(spec, GroupedSplitSpec):
        raise SplitSpecError("spec must be a GroupedSplitSpec")
    parts = []
    for attr in ("train", "validation", "test"):
        first, last = getattr(spec, attr)
        part = panel.between(first, last)
        if not len(part):
            raise SplitSpecError(f"{attr} range {first}-{last} holds no eras of the panel")
        parts.append(part)
    return Split(*parts)


def _spec(name, train_end, val_start, val_end, test_start, test_end=REFERENCE_TEST_END):
    tr_end, v0, v1, t0 = (date_to_era(d) for d in (train_end, val_start, val_end, test_start))
    return GroupedSplitSpec(
        train=(1, tr_end), gap1=v0 - tr_end - 1,
        validation=(v0, v1), gap2=t0 - v1 - 1,
        test=(t0, test_end), name=name,
    )


def walk_forward_presets() -> list[GroupedSplitSpec]:
    """The three walk-forward splits CV-1, CV-2, CV-3 (training from era 1)."""
    return [
        _spec("CV-1", "2012-07-27", "2012-12-21", "2014-11-14", "2015-05-15"),
        _spec("CV-2", "2014-06-27", "2014-11-21", "2016-10-14", "2017-04-14"),
        _spec("CV-3", "2016-05-27", "2016-10-21", "2018-09-14", "2019-03-15"),
    ]


def preset(name: str) -> GroupedSplitSpec:
    for spec in walk_forward_presets():
        if spec.name.lower() == name.lower():
            return spec
    raise SplitSpecError(f"unknown split preset {name!r}")
