import pytest

_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance verdict line; the test itself still asserts."""

    def record(tag: str, ok: bool, detail: str) -> None:
        _LINES.append(f"{'PASS' if ok else 'FAIL'}  criterion {tag:<3} {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
