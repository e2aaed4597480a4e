import numpy as np
import pytest
import scipy.sparse as sp

from mnir.corpus import SparseCorpus

ACCEPTANCE_LINES = []


def record_criterion(number, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def tiny_corpus():
    """docs {y=0: [1,2]}, {y=1: [3,4]}, {y=0: [0,5]}"""
    return SparseCorpus.from_dense(np.array([[1, 2], [3, 4], [0, 5]]), [0, 1, 0])


def random_corpus(rng, n, p, max_count=6, binary=True):
    x = rng.integers(0, max_count, size=(n, p))
    # every document needs at least one word
    empty = x.sum(axis=1) == 0
    x[empty, rng.integers(0, p, size=empty.sum())] = 1
    y = rng.integers(0, 2, size=n) if binary else rng.normal(size=n)
    if binary and n >= 2:
        y[0], y[1] = 0, 1
    return SparseCorpus(sp.csr_matrix(x), y.astype(float))
