import contextlib
import time

import pytest

_RESULTS = []


@pytest.fixture
def criterion():
    """Context manager recording one PASS/FAIL line for an acceptance criterion."""

    @contextlib.contextmanager
    def record(number, title):
        t0 = time.perf_counter()
        notes = []
        try:
            yield notes
        except BaseException:
            status = "FAIL"
            raise
        else:
            status = "PASS"
        finally:
            detail = "; ".join(notes)
            line = f"criterion {number:>2} {status}  {title} ({time.perf_counter() - t0:.1f}s)"
            if detail:
                line += f"  [{detail}]"
            _RESULTS.append((number, line))
            print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_RESULTS):
        terminalreporter.write_line(line)
