import numpy as np
import pytest

from app.services.state_engine import StateEngine


@pytest.fixture
def engine():
    return StateEngine()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
