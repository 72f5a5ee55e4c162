import numpy as np
import pytest

from xlsim.channel import upa_geometry
from xlsim.numerology import build_numerology


@pytest.fixture
def small_num():
    """64-FFT toy numerology: slot = 960 samples at 3.84 MS/s."""
    return build_numerology(60e3, 64, 48, 3.84e6)


@pytest.fixture
def geo16():
    return upa_geometry(4, 4, reference_freq_hz=6.8e9)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
