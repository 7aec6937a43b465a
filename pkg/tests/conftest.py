"""Shared fixtures for the ghostkit test suite."""

import numpy as np
import pytest

from ghostkit.acquisition import AcquisitionSet, NoiseModel, apply_poisson, forward_project, generate_masks
from ghostkit.acquisition.phantoms import generate_phantom


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow reconstruction studies")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_phantom():
    return generate_phantom("disks", 12, 12, seed=3)


@pytest.fixture
def small_acquisition(small_phantom):
    """12x12 disks phantom, 96 masks, 200 photons."""
    masks = generate_masks(96, 12, 12, seed=5)
    buckets = apply_poisson(forward_project(masks, small_phantom), NoiseModel(200.0, seed=5))
    return AcquisitionSet(masks, buckets, phantom=small_phantom)
