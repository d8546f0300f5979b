import numpy as np
import pytest

from vceclf.catalog import ClassCatalog
from vceclf.synthetic import make_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def synthetic_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("synthetic")
    train, val = make_dataset(root, seed=0)
    return root, train, val


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("tiny")
    train, val = make_dataset(root, train_counts=(12, 8, 4), val_counts=(6, 6, 6), seed=3, size=16)
    return root, train, val


@pytest.fixture
def three_classes():
    return ClassCatalog(("Bleeding", "Normal", "Ulcer"))
