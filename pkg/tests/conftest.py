import time

import pytest

_VERDICTS: list[str] = []


class Criterion:
    """Times one acceptance criterion and records a single PASS/FAIL line."""

    def __init__(self, number: int, title: str, limit: float):
        self.number, self.title, self.limit = number, title, limit
        self.t0 = time.perf_counter()

    def verdict(self, ok: bool, detail: str = "") -> None:
        elapsed = time.perf_counter() - self.t0
        in_time = elapsed < self.limit
        status = "PASS" if ok and in_time else "FAIL"
        line = (f"{status} criterion {self.number:>2} {self.title}: {detail} "
                f"[{elapsed:.2f}s / limit {self.limit:g}s]")
        _VERDICTS.append(line)
        print(line)
        assert ok, line
        assert in_time, line


@pytest.fixture
def criterion():
    return Criterion


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
