import numpy as np
import pytest

from sleepload import ClusteredConfig, SyntheticConfig, generate_clustered, generate_synthetic


@pytest.fixture(scope="session")
def clustered_grid():
    """Noiseless grid with three planted profile clusters."""
    grid, labels = generate_clustered(ClusteredConfig(num_clusters=3, seed=2))
    return grid, labels


@pytest.fixture(scope="session")
def synthetic_grid():
    """Default spatially correlated synthetic grid."""
    return generate_synthetic(SyntheticConfig(seed=11))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
