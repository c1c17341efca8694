import numpy as np
import pytest


def random_probs(rng, n_rows: int, n_classes: int, alpha: float = 1.0) -> np.ndarray:
    """Random probability vectors; small alpha makes them more peaked."""
    return rng.dirichlet(np.full(n_classes, alpha), size=n_rows)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
