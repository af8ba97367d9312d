import contextlib

import pytest

_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Context manager that records one PASS/FAIL line for an acceptance criterion."""

    @contextlib.contextmanager
    def check(number: int, text: str):
        try:
            yield
        except BaseException:
            line = f"criterion {number}: FAIL  {text}"
            _LINES.append(line)
            print(line)
            raise
        line = f"criterion {number}: PASS  {text}"
        _LINES.append(line)
        print(line)

    return check


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
