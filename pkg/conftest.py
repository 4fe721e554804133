"""
Shared fixtures for the test suite.
"""

from pathlib import Path

import numpy as np
import pytest

from mr_prioritizer.core_model import CoverageProfile, KillMatrix

DATA_DIR = Path(__file__).parent / "data"


def matrix(kills_by_mr, faults):
    """KillMatrix from {mr: set of killed faults}, rows in dict order"""
    mrs = tuple(kills_by_mr)
    table = np.array([[f in kills_by_mr[mr] for f in faults] for mr in mrs], dtype=bool)
    return KillMatrix(mrs, tuple(faults), table.reshape(len(mrs), len(faults)))


def random_matrix(rng, max_mrs=8, max_faults=30, density=None):
    num_mrs = int(rng.integers(1, max_mrs + 1))
    num_faults = int(rng.integers(1, max_faults + 1))
    p = rng.uniform(0.05, 0.6) if density is None else density
    kills = rng.random((num_mrs, num_faults)) < p
    return KillMatrix(tuple(f"MR{i}" for i in range(1, num_mrs + 1)),
                      tuple(f"f{j}" for j in range(1, num_faults + 1)), kills)


def write_text(path, text):
    path.write_bytes(text.encode("utf-8"))
    return path


@pytest.fixture
def data_dir():
    return DATA_DIR


@pytest.fixture
def three_mr_matrix():
    """A kills {f1,f2,f3}, B kills {f3,f4}, C kills {f4}"""
    return matrix({"A": {"f1", "f2", "f3"}, "B": {"f3", "f4"}, "C": {"f4"}}, ["f1", "f2", "f3", "f4"])


@pytest.fixture
def tie_free_matrix():
    """Unique best MR at every greedy step: A +4, B +2, C +1"""
    return matrix({"A": {"f1", "f2", "f3", "f4"}, "B": {"f4", "f5", "f6"}, "C": {"f1", "f7"}},
                  ["f1", "f2", "f3", "f4", "f5", "f6", "f7"])


@pytest.fixture
def coverage_profile():
    return CoverageProfile(
        ("A", "B", "C"),
        statements={"A": {"s1", "s2", "s3"}, "B": {"s3", "s4"}, "C": {"s4"}},
        branches={"A": set(), "B": {"b1"}, "C": {"b1", "b2"}},
    )
