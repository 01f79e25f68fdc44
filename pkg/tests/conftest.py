"""Shared fixtures"""

import numpy as np
import pytest

from kernel import GammaKernel, KernelSpec
from simulate import GridSpec, PathBundle


@pytest.fixture
def single_spec():
    return KernelSpec.uniform(1, 0.25, 1.0)


@pytest.fixture
def diagonal_spec():
    return KernelSpec.uniform(2, 0.25, 1.0, diagonal=True)


@pytest.fixture
def full_spec():
    return KernelSpec(2, (
        (GammaKernel(0.1, 1.0), GammaKernel(0.2, 2.0)),
        (GammaKernel(-0.1, 1.5), GammaKernel(0.3, 1.0)),
    ))


@pytest.fixture
def small_grid():
    return GridSpec(T=1.0, n=40)


@pytest.fixture
def random_bundle(small_grid):
    """Two-component Gaussian random walk tagged as ingested data"""
    rng = np.random.default_rng(7)
    levels = np.cumsum(rng.standard_normal((small_grid.N, 2)), axis=0)
    return PathBundle(small_grid, levels, ["C1", "C2"], {"variant": "ingested"})
