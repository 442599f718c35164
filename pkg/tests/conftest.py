"""Pytest configuration and fixtures."""

import numpy as np
import pytest

from relaygap.codes import repetition_problem
from relaygap.f2core import SparseBitMatrix
from relaygap.problem import DecodingProblem
from relaygap.relaybp import RelayConfig


@pytest.fixture
def rep3():
    """3-bit repetition code at p=0.1, observable on bit 0."""
    return repetition_problem(3, 0.1)


@pytest.fixture
def rep3_dem():
    """Detector error model text equivalent to ``rep3``."""
    return """
# repetition code, 3 bits
error(0.1) D0 L0
error(0.1) D0 D1
error(0.1) D1
"""


@pytest.fixture
def two_observable_problem():
    """Five faults, three detectors, two observables with unequal priors."""
    h = SparseBitMatrix.from_dense(
        [
            [1, 1, 0, 0, 0],
            [0, 1, 1, 1, 0],
            [0, 0, 0, 1, 1],
        ]
    )
    a = SparseBitMatrix.from_dense(
        [
            [1, 0, 1, 0, 0],
            [0, 0, 0, 1, 1],
        ]
    )
    return DecodingProblem(h, a, np.array([0.05, 0.1, 0.2, 0.08, 0.15]))


@pytest.fixture
def small_config():
    """Relay parameters small enough for unit tests."""
    return RelayConfig(num_sets=20, stop_nconv=5, pre_iter=30, set_max_iter=30)
