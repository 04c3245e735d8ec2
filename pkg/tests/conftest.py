import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.linalg import expm


def laguerre_series(nu, k, x):
    """Explicit sum_j (-1)^j C(nu+k, nu-j) x^j / j!, in exact rational arithmetic."""
    x = Fraction(x)
    return float(sum(Fraction((-1) ** j * math.comb(nu + k, nu - j), math.factorial(j)) * x**j
                     for j in range(nu + 1)))


def expm_displacement(alpha, dim=120):
    """D(alpha) from the matrix exponential on a large truncated basis."""
    a = np.diag(np.sqrt(np.arange(1, dim)), 1)
    return expm(alpha * a.conj().T - np.conj(alpha) * a)


def poisson(lam, N):
    n = np.arange(N + 1)
    return np.exp(-lam + n * math.log(lam) - np.array([math.lgamma(j + 1) for j in n])) if lam > 0 else (n == 0) * 1.0


def random_density(rng, dim, rank=None):
    rank = dim if rank is None else rank
    A = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = A @ A.conj().T
    return rho / np.trace(rho).real


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
