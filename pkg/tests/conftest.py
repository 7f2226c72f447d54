import numpy as np
import pytest

from cgsws import load_filters, make_rng, make_test_signal, rescale_snr


@pytest.fixture(scope="session")
def filters():
    return load_filters("scd3")


@pytest.fixture()
def rng():
    return make_rng(20240817, 0)


def noisy_signal(name, n, snr, seed, stream=0):
    """Rescaled test function plus unit-variance Gaussian noise."""
    truth = rescale_snr(make_test_signal(name, n), snr)
    return truth, truth + make_rng(seed, stream).standard_normal(n)
