import time
from contextlib import contextmanager

import pytest

CRITERIA = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion."""
    @contextmanager
    def record(number, title):
        t0 = time.time()
        info = {}
        try:
            yield info
        except BaseException as exc:
            line = f"criterion {number:>2} FAIL  {title}  ({time.time() - t0:.2f}s): {str(exc).splitlines()[0][:120] if str(exc) else type(exc).__name__}"
            CRITERIA.append((number, line))
            print(line)
            raise
        line = f"criterion {number:>2} PASS  {title}  ({time.time() - t0:.2f}s)"
        if info.get("note"):
            line += "  " + info["note"]
        CRITERIA.append((number, line))
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(CRITERIA):
            terminalreporter.write_line(line)
