"""Normal quantile routine against scipy and textbook values."""

import numpy as np
import pytest
from scipy.special import ndtri

from prevtrial.quantiles import normal_quantile
from prevtrial.errors import ValidationError


def test_reference_points():
    assert normal_quantile(0.975) == pytest.approx(1.959963984540054, abs=1e-12)
    assert normal_quantile(0.90) == pytest.approx(1.2815515655446004, abs=1e-12)
    assert normal_quantile(0.5) == 0.0


def test_matches_scipy_across_range():
    ps = np.concatenate(
        [
            np.array([1e-12, 1e-9, 1e-6, 1e-4]),
            np.linspace(0.001, 0.999, 1999),
            1.0 - np.array([1e-12, 1e-9, 1e-6, 1e-4]),
        ]
    )
    for p in ps:
        assert normal_quantile(float(p)) == pytest.approx(float(ndtri(p)), abs=1e-10)


def test_symmetry():
    for p in (0.01, 0.1, 0.3):
        assert normal_quantile(p) == pytest.approx(-normal_quantile(1.0 - p), abs=1e-13)


def test_monotone():
    ps = np.linspace(1e-6, 1.0 - 1e-6, 4001)
    values = [normal_quantile(float(p)) for p in ps]
    assert all(a < b for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("p", [0.0, 1.0, -0.2, 1.5])
def test_domain(p):
    with pytest.raises(ValidationError):
        normal_quantile(p)
