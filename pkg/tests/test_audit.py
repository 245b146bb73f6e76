from tempora.audit import AccessLog, record_target_reads
from tempora.panel import target_observers

from conftest import random_panel


def test_reads_logged_inside_block_only(small_panel):
    with record_target_reads() as log:
        small_panel[0].target("main")
        log.scored(2)
        small_panel[1].target("main")
    small_panel[2].target("main")
    assert log.events == [("read", 1, "main"), ("score", 2, None), ("read", 2, "main")]
    assert target_observers == []


def test_early_reads():
    log = AccessLog()
    log.read(5, "main")
    log.scored(5)
    log.read(5, "main")
    log.read(6, "main")
    log.read(1, "main")
    assert log.early_reads([5, 6]) == [(5, "main"), (6, "main")]
