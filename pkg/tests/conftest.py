import numpy as np
import pytest

from muskat.spectral import SpectralField


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_field(n_modes, rng, p=2.0, amplitude=1.0):
    """Mean-zero random field with |k|^-p magnitudes and random phases."""
    k = np.arange(1, n_modes + 1, dtype=float)
    mag = amplitude * k ** (-p) * rng.uniform(0.5, 1.0, size=n_modes)
    c = np.zeros(n_modes + 1, dtype=complex)
    c[1:] = mag * np.exp(2j * np.pi * rng.random(n_modes))
    return SpectralField(c, copy=False)


def a0_dist(f, g):
    return 2.0 * float(np.abs(f.coeffs - g.coeffs)[1:].sum()) + float(
        abs(f.coeffs[0] - g.coeffs[0])
    )
