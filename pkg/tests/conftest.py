import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_criteria: dict[int, tuple[str, bool, str]] = {}


@pytest.fixture
def criterion():
    """``criterion(number, title, ok, detail)`` records one acceptance line."""

    def record(number: int, title: str, ok: bool, detail: str = "") -> bool:
        _criteria[number] = (title, bool(ok), detail)
        print(f"criterion {number} ({title}): {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, ok, detail = _criteria[number]
        terminalreporter.write_line(f"criterion {number} ({title}): {'PASS' if ok else 'FAIL'}  {detail}")
