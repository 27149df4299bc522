import numpy as np
import pytest

from exchange_lab.model import WealthDistribution

ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report():
    """Record one pass/fail line per acceptance criterion, then assert."""
    def report(number, name, ok, detail=""):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {name} {detail}".rstrip())
        assert ok, f"criterion {number} failed: {detail}"
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_truncated(rng, window=(-30, 40), margin=2, mu=None):
    """Random distribution on ``window`` with exact zeros in ``margin`` bins at each edge."""
    lo, hi = window
    probs = np.zeros(hi - lo + 1)
    inner = rng.exponential(size=probs.size - 2 * margin)
    probs[margin:-margin] = inner / inner.sum()
    return WealthDistribution(lo, probs)
