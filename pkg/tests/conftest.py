import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE: list[tuple[str, str, str]] = []


def _line(name: str, status: str, detail: str) -> str:
    return f"[{status}] {name}" + (f": {detail}" if detail else "")


class AcceptanceRecorder:
    """Collects one pass/fail line per acceptance criterion."""

    def record(self, name: str, passed: bool, detail: str = "") -> bool:
        status = "PASS" if passed else "FAIL"
        _ACCEPTANCE.append((name, status, detail))
        print(_line(name, status, detail))
        return bool(passed)

    def skip(self, name: str, detail: str) -> None:
        _ACCEPTANCE.append((name, "SKIP", detail))
        print(_line(name, "SKIP", detail))


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceRecorder()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, detail in _ACCEPTANCE:
        terminalreporter.write_line(_line(name, status, detail))
