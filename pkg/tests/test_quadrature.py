import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from renewalab.errors import SingularityError
from renewalab.quadrature import TensorGrid, box_fourier, composite_gl, panel_breaks, singular_fourier


def _gauss(v):
    return np.exp(-0.5 * np.sum(v * v, axis=1))


@given(st.integers(0, 31), st.floats(-3, 3), st.floats(0.1, 4))
def test_composite_rule_is_exact_for_polynomials(p, a, length):
    x, w = composite_gl(panel_breaks(a, a + length, 0.7), 16)
    b = a + length
    exact = (b ** (p + 1) - a ** (p + 1)) / (p + 1)
    assert w @ x ** p == pytest.approx(exact, rel=1e-11, abs=1e-11 * max(1, abs(b) ** (p + 1)))


@pytest.mark.parametrize("b", [(0.0, 0.0), (1.3, -0.4), (4.0, 2.5)])
def test_graded_rule_on_smooth_gaussian(b):
    b = np.array(b)
    res = singular_fourier(lambda v: _gauss(v) + 0j, b, R1=9.0, R2=9.0, feature=0.5)
    assert res.converged
    assert abs(res.value - 2 * math.pi * math.exp(-0.5 * b @ b)) < 1e-9


def test_graded_rule_in_three_dimensions():
    b = np.array([0.5, 1.0, -0.7])
    res = singular_fourier(lambda v: _gauss(v) + 0j, b, R1=9.0, R2=9.0, feature=0.5)
    assert abs(res.value - (2 * math.pi) ** 1.5 * math.exp(-0.5 * b @ b)) < 1e-8


def test_graded_rule_rejects_non_integrable_singularity():
    # 1/|w|^2 has the same mass on every parabolic shell, so shells never settle
    g = lambda v: 1.0 / (v[:, 0] ** 2 + np.sum(v[:, 1:] ** 2, axis=1) ** 2) + 0j
    with pytest.raises(SingularityError):
        singular_fourier(g, np.zeros(2), R1=1.0, R2=1.0, k_max=12)


def test_node_refinement_agrees_on_singular_integrand():
    g = lambda v: np.exp(-0.5 * (v[:, 0] ** 2 + np.sum(v[:, 1:] ** 2, axis=1) ** 2)) / (
        -1j * v[:, 0] + np.sum(v[:, 1:] ** 2, axis=1))
    b = np.array([7.0, 1.5])
    one = singular_fourier(g, b, R1=9.0, R2=2.6, feature=0.5).value
    two = singular_fourier(g, b, R1=9.0, R2=2.6, feature=0.5, refine=2).value
    assert abs(one - two) < 1e-7 * abs(two)


def test_tensor_grid_matches_closed_form():
    grid = TensorGrid([-9.0, -9.0], [9.0, 9.0], 0.5)
    vals = grid.sample(_gauss)
    for b in ([0.0, 0.0], [2.0, -1.0], [5.0, 3.0]):
        b = np.array(b)
        assert abs(grid.fourier(vals, b) - 2 * math.pi * math.exp(-0.5 * b @ b)) < 1e-10
    ones = grid.sample(lambda x: np.ones(len(x)))
    assert grid.integral(ones).real == pytest.approx(18.0 ** 2, rel=1e-13)


def test_box_fourier_matches_closed_form():
    a = np.array([3.0, -2.0])
    assert abs(box_fourier(_gauss, a, 9.0) - 2 * math.pi * math.exp(-0.5 * a @ a)) < 1e-10
