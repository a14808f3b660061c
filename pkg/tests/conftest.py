import numpy as np
import pytest

import kds_cfg


@pytest.fixture(autouse=True)
def no_progress_bars(monkeypatch):
    monkeypatch.setattr(kds_cfg, "SHOW_PROGRESS", False)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def line_atoms():
    """d = 1 dictionary with atoms 0 and 1."""
    return np.array([[0.0, 1.0]])


@pytest.fixture
def chain_codes():
    """Three atoms, four points: (1,0,0), (.5,.5,0), (0,.5,.5), (0,0,1)."""
    return np.array([[1.0, 0.5, 0.0, 0.0],
                     [0.0, 0.5, 0.5, 0.0],
                     [0.0, 0.0, 0.5, 1.0]])


@pytest.fixture
def two_block_codes(rng):
    X = np.zeros((6, 40))
    X[:3, :20] = rng.dirichlet(np.ones(3), size=20).T
    X[3:, 20:] = rng.dirichlet(np.ones(3), size=20).T
    return X, np.repeat([0, 1], 20)
