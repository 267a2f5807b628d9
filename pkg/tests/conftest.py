"""Shared pytest fixtures for repository tests."""

from fractions import Fraction
from typing import Callable

import numpy as np
import pytest

from adaptest.bitcore import SystematicCode, make_systematic_code, ones, word, zeros
from adaptest.config import full_trials
from adaptest.dists import Dist, uniform


@pytest.fixture
def rng() -> np.random.Generator:
    """A seeded generator for tests that draw random instances."""

    return np.random.default_rng(20240611)


@pytest.fixture
def small_code() -> SystematicCode:
    """The relaxed (m=4, n=3) code {000, 011, 101, 110}."""

    return make_systematic_code(4, 3, relaxed=True)


@pytest.fixture
def zero_one_dist() -> Dist:
    """uniform{0000, 1111}, half of its mass on the all-zero string."""

    return uniform([zeros(4), ones(4)])


@pytest.fixture
def four_constants() -> Dist:
    """Four constant strings of length 32 over {0,1,2,3}; 1/2-far from support size 2."""

    return uniform([word([v] * 32, 4) for v in range(4)])


@pytest.fixture
def trial_count() -> Callable[[int, int], int]:
    """Pick the full acceptance count under ADAPTEST_FULL=1, the reduced one otherwise."""

    def pick(full: int, reduced: int) -> int:
        return full if full_trials() else reduced

    return pick


@pytest.fixture
def majority() -> Fraction:
    return Fraction(1, 2)
