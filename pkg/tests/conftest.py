import numpy as np
import pytest

from remede.cell import RemedeCell
from remede.data import generate_dataset
from remede.schemas import GenConfig, TaskId


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run end-to-end reproduction tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long end-to-end reproduction runs")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_cell(rng):
    return RemedeCell.init(rng, n_x=2, n_m=2, n_classes=3, depth=3)


@pytest.fixture
def poc1_data():
    return generate_dataset(TaskId.poc1, GenConfig(n_sequences=200, seed=3))


@pytest.fixture
def poc3_data():
    return generate_dataset(TaskId.poc3, GenConfig(n_sequences=200, seed=5))
