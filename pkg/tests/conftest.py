import numpy as np
import pytest

import rosspuf as rp


@pytest.fixture(scope="session")
def small_nominal():
    """Two nodes of two rings: fast enough for per-test simulation."""
    return rp.NominalConfig(n_nodes=2, mrrs_per_node=2, splitter_ways=2)


@pytest.fixture(scope="session")
def small_device(small_nominal):
    return rp.fabricate(small_nominal, fab_seed=11)


@pytest.fixture(scope="session")
def small_det():
    return rp.DetectionConfig(adc_bits=8, samples_per_symbol=8, noise_seed=1)


@pytest.fixture(scope="session")
def small_ridge():
    return rp.RidgeConfig(taps=3, washout=5)


@pytest.fixture(scope="session")
def small_challenge():
    return rp.make_challenge(7, 300)
