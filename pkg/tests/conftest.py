import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from vibdiag.signal_io import synthetic_benchmark  # noqa: E402


@pytest.fixture(scope="session")
def benchmark_segments():
    """200 segments per class, the synthetic benchmark used end to end."""
    return synthetic_benchmark(200, seed=7)


@pytest.fixture(scope="session")
def small_segments():
    return synthetic_benchmark(30, seed=11)


ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record the outcome line of one acceptance criterion."""
    def record(number, passed, detail, skipped=False):
        status = "SKIPPED" if skipped else ("PASS" if passed else "FAIL")
        line = f"criterion {number}: {status} - {detail}"
        ACCEPTANCE[number] = line
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
