import numpy as np
import pytest

from powplay.model import (
    BITCOIN_POOLS,
    BITCOIN_POOLS_MERGED,
    bundled_pool_file,
    load_pool_file,
)


@pytest.fixture(scope="session")
def btc_pools():
    """The published 16-pool snapshot, normalized, no adversary designated."""
    return load_pool_file(bundled_pool_file(BITCOIN_POOLS))


@pytest.fixture(scope="session")
def btc_pools_merged():
    """The 9-pool merged snapshot used for solver-sized populations."""
    return load_pool_file(bundled_pool_file(BITCOIN_POOLS_MERGED))


@pytest.fixture
def rng():
    return np.random.default_rng(20240814)
