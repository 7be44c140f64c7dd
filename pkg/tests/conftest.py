import numpy as np
import pytest

from fptmc.model import DiffusionMatrix, FirmSpec, PortfolioSpec

SIGMA_A = 0.09000984
LAMBDA_A = 0.10001559
JUMP_MEAN_A = -0.20003641
JUMP_SD_A = 0.50000485
PAIR_ROWS = [[0.06963755, 0.02993134], [0.03387809, 0.06691001]]


def a_rated_firm(**kw):
    args = dict(x0=2.0, mu=-0.001, kappa_log=0.0, gamma=-0.001, jump_mean=JUMP_MEAN_A, jump_sd=JUMP_SD_A)
    args.update(kw)
    return FirmSpec(**args)


@pytest.fixture
def single_a():
    return PortfolioSpec((a_rated_firm(),), DiffusionMatrix([[SIGMA_A]]), LAMBDA_A, 1.0, 10.0)


@pytest.fixture
def pair_aa():
    f = a_rated_firm()
    return PortfolioSpec((f, f), DiffusionMatrix(PAIR_ROWS), LAMBDA_A, 1.0, 10.0)


def first_passage_probability(a, mu, sigma, T):
    """P(min of drifted Brownian motion started at a > 0 hits 0 by T)."""
    from scipy.special import ndtr

    s = sigma * np.sqrt(T)
    return ndtr((-a - mu * T) / s) + np.exp(-2 * mu * a / sigma ** 2) * ndtr((-a + mu * T) / s)


ACCEPTANCE_LINES = []


def record_criterion(number, passed, detail):
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print("\n" + line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
