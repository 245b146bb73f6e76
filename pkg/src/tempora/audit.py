"""Target-access auditing for leakage checks."""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field

from tempora import panel as _panel


@dataclass
class AccessLog:
    """Ordered record of target reads and scoring events.

    Events are ``("read", era, target)`` and ``("score", era, None)``.
    """

    events: list = field(default_factory=list)

    def read(self, era: int, name: str) -> None:
        self.events.append(("read", era, name))

    def scored(self, era: int) -> None:
        self.events.append(("score", era, None))

    def early_reads(self, eras) -> list:
        """Reads of a target in ``eras`` that happened before the era was scored."""
        watch = set(eras)
        done: set[int] = set()
        bad = []
        for kind, era, name in self.events:
            if kind == "score":
                done.add(era)
            elif era in watch and era not in done:
                bad.append((era, name))
        return bad


@contextlib.contextmanager
def record_target_reads(log: AccessLog | None = None):
    """Log every :meth:`PanelEra.target` call made inside the block."""
    log = AccessLog() if log is None else log
    _panel.target_observers.append(log.read)
    try:
        yield log
    finally:
        _panel.target_observers.remove(log.read)
