"""
Shared fixtures: tiny datasets and seeded models
"""
import pytest
from guard.tensors import Rng
from guard.datasets import load_dataset
from guard.models import ModelSpec, Model


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help='Run the multi-seed experiments')


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: multi-seed directional experiment (needs --runslow)')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def moons():
    """
    Two-moons train and test splits (160 / 40 samples)
    """
    return load_dataset('two-moons', {'n': 200, 'noise': 0.1}, Rng(0, 'dataset'))


@pytest.fixture
def digits():
    """
    8x8 tiny-digits with three classes (96 / 24 samples)
    """
    return load_dataset('tiny-digits', {'n': 120, 'classes': 3}, Rng(0, 'dataset'))


@pytest.fixture
def mlp():
    """
    Seeded softplus mlp over 2-d inputs
    """
    return Model(ModelSpec.mlp([2, 8, 2], activation='softplus'), Rng(0, 'init'))


@pytest.fixture
def convnet():
    """
    Seeded convnet-s with batch norm over 1x8x8 inputs and three classes
    """
    spec = ModelSpec('convnet-s', channels=[4, 8], batch_norm=True, input_shape=(1, 8, 8), num_classes=3)
    return Model(spec, Rng(0, 'init'))
