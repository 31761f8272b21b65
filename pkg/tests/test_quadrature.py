import math

import numpy as np
import pytest

from pmelab.errors import QuadratureError
from pmelab.quadrature import adaptive_simpson, gauss_integral, gauss_panel_sums


def test_polynomial_exact():
    assert adaptive_simpson(lambda x: x * x, 0.0, 1.0, tol=1e-12) == pytest.approx(1.0 / 3.0, abs=1e-14)
    assert adaptive_simpson(lambda x: x**3 - x, -1.0, 2.0, tol=1e-12) == pytest.approx(2.25, abs=1e-12)


def test_sine_oracle():
    assert adaptive_simpson(math.sin, 0.0, math.pi, tol=1e-12) == pytest.approx(2.0, abs=1e-12)


def test_mild_log_singularity():
    # x log x integrates to -1/4 on [0,1]; the x factor tames the endpoint
    f = lambda x: x * math.log(x) if x > 0 else 0.0
    assert adaptive_simpson(f, 0.0, 1.0, tol=1e-12) == pytest.approx(-0.25, abs=1e-10)


def test_reversed_interval():
    val = adaptive_simpson(math.sin, math.pi, 0.0, tol=1e-12)
    assert val == pytest.approx(-2.0, abs=1e-12)


def test_nonconvergent_raises():
    f = lambda x: x ** -0.99 if x > 0 else 0.0
    with pytest.raises(QuadratureError):
        adaptive_simpson(f, 0.0, 1.0, tol=1e-12, max_depth=12)


def test_gauss_panels_match_simpson():
    edges = np.concatenate(([0.0], np.geomspace(1e-6, math.pi, 200)))
    total = float(np.sum(gauss_panel_sums(np.sin, edges)))
    assert total == pytest.approx(2.0, abs=1e-13)


def test_gauss_integral_composite():
    assert gauss_integral(np.exp, 0.0, 1.0, 8) == pytest.approx(math.e - 1.0, rel=1e-14)


def test_gauss_panels_polynomial_degree():
    # 7-point Gauss is exact through degree 13
    edges = np.linspace(0.3, 1.7, 4)
    total = float(np.sum(gauss_panel_sums(lambda x: x**13, edges)))
    exact = (1.7**14 - 0.3**14) / 14.0
    assert total == pytest.approx(exact, rel=1e-14)
