import numpy as np
import pytest

from vlcpos.config import ExperimentConfig
from vlcpos.geometry import ReceiverSpec, Vec3, default_scene


@pytest.fixture(scope="session")
def scene():
    return default_scene()


@pytest.fixture
def rng():
    return np.random.default_rng(0xBEEF)


def receiver_at(x: float, y: float, z: float = 1.2, **kwargs) -> ReceiverSpec:
    return ReceiverSpec(position=Vec3(x, y, z), **kwargs)


@pytest.fixture(scope="session")
def default_config():
    return ExperimentConfig()
