import math

import numpy as np
import pytest

from grushin.errors import DomainError
from grushin.extension import (ExtensionConfig, dtn_constant, dtn_fractional_laplacian,
                               fourier_oracle, gaussian_closed_form, literal_dtn_constant,
                               poisson_extension, solve_extension)

S_VALUES = (0.25, 0.5, 0.75)


@pytest.mark.parametrize("s", S_VALUES)
def test_fourier_oracle_confirms_closed_form(s):
    assert fourier_oracle(s) == pytest.approx(gaussian_closed_form(s), rel=1e-10)


def test_closed_form_values():
    assert gaussian_closed_form(0.5) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-15)
    # frozen from a 30-digit evaluation of the Fourier integral
    assert gaussian_closed_form(0.25) == pytest.approx(0.8221789586624586, rel=1e-14)


def test_dtn_constant_at_half():
    # s = 1/2 is the harmonic extension: U_z(0) = -(-Delta)**(1/2) u exactly
    assert dtn_constant(0.5) == pytest.approx(1.0, rel=1e-15)
    assert literal_dtn_constant(0.5) == pytest.approx(0.5, rel=1e-15)


@pytest.mark.parametrize("s", S_VALUES)
def test_dtn_matches_oracle(s):
    res = dtn_fractional_laplacian(ExtensionConfig(s, n_z=48, n_sigma=96), [0.0])
    assert res.values[0] == pytest.approx(fourier_oracle(s), rel=0.05)
    assert res.order[0] > 0.5


def test_poisson_kernel_at_half():
    sol = solve_extension(ExtensionConfig(0.5, L=100.0, sigma_stretch=5.0, n_z=192, n_sigma=384))
    zs = np.array([0.5, 1.0, 2.0])
    got = sol.at(zs, np.zeros(3))
    ref = np.array([poisson_extension(z) for z in zs])
    np.testing.assert_allclose(got, ref, atol=1e-3)
    assert poisson_extension(1.0, 0.0, lambda y: 1.0 + 0 * y) == pytest.approx(1.0, rel=1e-10)


def test_maximum_principle_and_zero_datum():
    sol = solve_extension(ExtensionConfig(0.3, n_z=24, n_sigma=48))
    assert sol.values.min() >= 0.0 and sol.values.max() <= 1.0
    neg = solve_extension(ExtensionConfig(0.7, datum=lambda x: -np.exp(-np.asarray(x) ** 2),
                                          n_z=24, n_sigma=48))
    assert neg.values.max() <= 0.0
    zero = solve_extension(ExtensionConfig(0.5, datum=lambda x: 0 * np.asarray(x), n_z=16, n_sigma=32))
    assert np.all(zero.values == 0.0)


def test_extension_even_in_sigma():
    sol = solve_extension(ExtensionConfig(0.5, n_z=16, n_sigma=32))
    assert sol.at(np.array([0.7]), np.array([-1.3]))[0] == sol.at(np.array([0.7]), np.array([1.3]))[0]


def test_config_validation():
    with pytest.raises(DomainError):
        ExtensionConfig(1.0)
    with pytest.raises(ValueError):
        ExtensionConfig(0.5, L=-1.0)
    cfg = ExtensionConfig(0.25)
    assert cfg.alpha == pytest.approx(1.0)
    assert cfg.height == pytest.approx(math.sqrt(2 * 30.0))
    with pytest.raises(DomainError):
        dtn_fractional_laplacian(ExtensionConfig(0.5, n_z=16, n_sigma=32), [0.123456])
