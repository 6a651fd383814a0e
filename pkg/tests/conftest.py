import pytest

from atypical import corpus
from atypical.sampling import ScanConfig


@pytest.fixture(scope="session")
def broughton():
    return corpus.load_real("broughton")


@pytest.fixture(scope="session")
def exfair():
    return corpus.load_real("exfair")


@pytest.fixture(scope="session")
def linear():
    return corpus.load_real("linear")


@pytest.fixture(scope="session")
def cube():
    return corpus.load_real("cube")


@pytest.fixture(scope="session")
def quasihom():
    return corpus.load_real("quasihom")


@pytest.fixture(scope="session")
def trimmed_cfg():
    """Smaller sweep for unit tests: 3 radii, 64 directions, narrow window."""
    return ScanConfig(radii_count=3, n_dirs=64, value_window=2.0, seed=7)
