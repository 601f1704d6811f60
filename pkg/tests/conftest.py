import numpy as np
import pytest

from blockprior.numerics import make_stream


@pytest.fixture
def rng():
    return make_stream(20240611, 1)


def ks_stat(draws, cdf):
    """One-sample Kolmogorov-Smirnov statistic against a vectorized CDF."""
    x = np.sort(np.asarray(draws, dtype=float))
    f = np.asarray(cdf(x), dtype=float)
    m = x.shape[0]
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - f), np.max(f - (i - 1) / m)))


ACCEPTANCE_LINES = {}


def record(criterion, passed, detail):
    """Keep one PASS/FAIL line per acceptance criterion (printed at the end)."""
    line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES[criterion] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
