import itertools
from collections import Counter
from fractions import Fraction
from typing import Dict

import hypothesis
import pytest

hypothesis.settings.register_profile("default", max_examples=40, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=500, deadline=None)
hypothesis.settings.load_profile("default")


def brute_force_survivors(n: int) -> Dict[int, Fraction]:
    """pmf of S_n by enumerating all (n-1)^n target assignments"""
    counts = Counter()
    choices = [[j for j in range(n) if j != i] for i in range(n)]
    for targets in itertools.product(*choices):
        counts[n - len(set(targets))] += 1
    total = (n - 1) ** n
    return {k: Fraction(v, total) for k, v in sorted(counts.items())}


def brute_force_empty_boxes(balls: int, boxes: int) -> Dict[int, Fraction]:
    """pmf of the number of empty boxes by enumerating all boxes^balls placements"""
    counts = Counter()
    for placement in itertools.product(range(boxes), repeat=balls):
        counts[boxes - len(set(placement))] += 1
    total = boxes**balls
    return {k: Fraction(v, total) for k, v in sorted(counts.items())}


def brute_force_p(n_max: int) -> Dict[int, Fraction]:
    """Extinction probabilities p_0..p_{n_max} from the enumerated survivor pmfs"""
    p = {0: Fraction(1), 1: Fraction(0)}
    for n in range(2, n_max + 1):
        p[n] = sum((mass * p[k] for k, mass in brute_force_survivors(n).items()), Fraction(0))
    return p


@pytest.fixture(scope="session")
def survivor_oracle():
    return brute_force_survivors


@pytest.fixture(scope="session")
def occupancy_oracle():
    return brute_force_empty_boxes


@pytest.fixture(scope="session")
def extinction_oracle():
    return brute_force_p


@pytest.fixture
def cache_dir(tmp_path, monkeypatch):
    """Empty cache directory, also exported through the environment override"""
    directory = tmp_path / "cache"
    monkeypatch.setenv("GROUPROULETTE_CACHE_DIR", str(directory))
    return directory
