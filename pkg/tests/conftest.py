import numpy as np
import pytest

from tempora.panel import TARGET_VALUES, PanelEra, PanelSet


def random_panel(n_eras=5, n_rows=20, n_features=4, targets=("main",), seed=0, first_era=1):
    rng = np.random.default_rng(seed)
    names = tuple(f"{j:02d}" for j in range(n_features))
    eras = []
    for k in range(n_eras):
        e = first_era + k
        X = rng.integers(-2, 3, size=(n_rows, n_features)).astype(np.int8)
        tg = {t: rng.choice(TARGET_VALUES, size=n_rows) for t in targets}
        eras.append(PanelEra(e, [f"r{e}_{i}" for i in range(n_rows)], X, tg))
    return PanelSet(tuple(eras), names)


@pytest.fixture
def small_panel():
    return random_panel()


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one pass/fail line for an acceptance criterion, then assert it."""

    def record(number: int, title: str, ok: bool, detail: str = "") -> None:
        line = f"AC{number:<2d} {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s[2:4])):
            terminalreporter.write_line(line)
