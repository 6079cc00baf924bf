import itertools

import numpy as np
import pytest

from specrad.dynsys import finite_map, sft


def random_sft(rng, n_symbols, word_depth=1, density=0.6):
    """Random 0/1 matrix that keeps at least one cycle (a diagonal entry)."""
    A = (rng.random((n_symbols, n_symbols)) < density).astype(int)
    k = rng.integers(n_symbols)
    A[k, k] = 1
    return sft(A, word_depth)


def random_finite_map(rng, n, p_undefined=0.2):
    phi = [None if rng.random() < p_undefined else int(rng.integers(n)) for _ in range(n)]
    return finite_map(phi)


def all_finite_maps(n):
    """Every partial map on n states (n + 1 choices per state)."""
    for choice in itertools.product([None] + list(range(n)), repeat=n):
        yield finite_map(list(choice))


def complex_gaussian(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_unitary(rng, k):
    q, r = np.linalg.qr(complex_gaussian(rng, k, k))
    return q * (np.diag(r) / np.abs(np.diag(r)))


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
