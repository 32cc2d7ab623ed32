import numpy as np
import pytest

from submeta import GroundSet, ModularObjective, SyntheticCoverageObjective


@pytest.fixture
def modular_abc():
    """Weights a=3, b=2, c=1 on elements 0, 1, 2."""
    return ModularObjective([3.0, 2.0, 1.0])


def random_coverage(seed: int, n: int = 10, n_items: int = 20, density: float = 0.3):
    """Small weighted-coverage objective, reproducible by seed."""
    rng = np.random.default_rng(seed)
    ground = GroundSet(n)
    weights = rng.uniform(0.5, 1.5, size=n_items)
    incidence = rng.random((n_items, n)) < density
    covers = [np.flatnonzero(incidence[:, e]) for e in range(n)]
    return SyntheticCoverageObjective(ground, covers, n_items, weights)
