import numpy as np
import pytest

from cfcpd import multivariate_data, regression_data


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def step_series(levels, lengths, noise=0.0, seed=0):
    rng = np.random.default_rng(seed)
    z = np.concatenate([np.full(m, float(v)) for v, m in zip(levels, lengths)])
    return multivariate_data((z + noise * rng.standard_normal(z.size))[:, None])


def linear_data(n, p, f, noise=0.0, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    y = X @ np.asarray(f, dtype=float) + noise * rng.standard_normal(n)
    return regression_data(X, y)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
