import cmath
import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from renewalab import catalog
from renewalab.markov_models import DegenerateCovarianceWarning, FiniteChain, longrun_sigma, stationary_dist
from renewalab.spectral import (decomposition_check, dominant_eig, eigenvalue, fourier_expectations,
                                fourier_operator, grad_lambda_zero, hess_lambda_zero, taylor_check,
                                v0_band_constants)


def _two_state_lambda(chain, t):
    """Larger root of the characteristic polynomial of the 2x2 Fourier operator."""
    M = fourier_operator(chain, t).M
    tr, det = M[0, 0] + M[1, 1], M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    disc = cmath.sqrt(tr * tr - 4 * det)
    roots = [(tr + disc) / 2, (tr - disc) / 2]
    return max(roots, key=abs)


def test_operator_at_zero_is_transition_matrix():
    chain = catalog.model("chain-3state-2d")
    np.testing.assert_array_equal(fourier_operator(chain, np.zeros(2)).M, chain.P)


def test_single_state_chain():
    v = np.array([0.7, -0.2])
    chain = FiniteChain([[1.0]], [v])
    t = np.array([0.3, 0.9])
    E = fourier_expectations(chain, t, 6)
    np.testing.assert_allclose(E, np.exp(1j * np.arange(7) * (t @ v)), atol=1e-14)
    rep = decomposition_check(chain, t=t, n_max=10)
    assert np.all(np.abs(rep.remainders) < 1e-14)
    np.testing.assert_allclose(grad_lambda_zero(chain), v, atol=1e-8)


def test_two_step_expectation_matches_path_sum():
    chain = catalog.model("chain-2state-2d")
    t = np.array([0.4, -1.1])
    mu = np.array([0.25, 0.75])
    f = np.array([2.0, 0.5])
    total = 0j
    for x0, x1, x2 in itertools.product(range(2), repeat=3):
        p = mu[x0] * chain.P[x0, x1] * chain.P[x1, x2]
        total += p * np.exp(1j * t @ (chain.xi[x1] + chain.xi[x2])) * f[x2]
    assert abs(fourier_expectations(chain, t, 2, f=f, mu=mu)[2] - total) < 1e-14


def test_perron_data_at_zero():
    chain = catalog.model("chain-3state-2d")
    eig = dominant_eig(fourier_operator(chain, np.zeros(2)))
    assert abs(eig.lam - 1) < 1e-12
    np.testing.assert_allclose(eig.right, np.ones(3), atol=1e-10)
    np.testing.assert_allclose(eig.left, stationary_dist(chain), atol=1e-10)


@given(st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))
def test_two_state_eigenvalue_closed_form(t1, t2):
    chain = catalog.model("chain-2state-2d")
    t = np.array([t1, t2])
    assert abs(eigenvalue(chain, t) - _two_state_lambda(chain, t)) < 1e-10


def test_eigenvalue_modulus_below_one_off_zero():
    chain = catalog.model("chain-3state-2d")
    for r in (1e-3, 1e-2, 0.1, 0.5):
        for ang in np.linspace(0, 2 * np.pi, 7, endpoint=False):
            t = r * np.array([np.cos(ang), np.sin(ang)])
            assert abs(eigenvalue(chain, t)) < 1


def test_remainder_vanishes_at_zero():
    rep = decomposition_check(catalog.model("chain-3state-2d"), t=np.zeros(2), n_max=20)
    assert abs(rep.L - 1) < 1e-12
    assert np.all(np.abs(rep.remainders) < 1e-12)


def test_remainder_rate_matches_second_eigenvalue():
    chain = catalog.model("chain-3state-2d")
    t = np.array([0.3, 0.3])
    rep = decomposition_check(chain, t=t, n_max=60)
    ev = np.sort(np.abs(np.linalg.eigvals(fourier_operator(chain, t).M)))
    assert rep.second_modulus == pytest.approx(ev[-2], abs=1e-6)
    assert rep.fitted_rate <= ev[-2] + 0.02


def test_derivatives_for_constant_increment():
    c = np.array([1.5, -0.5])
    chain = FiniteChain([[0.3, 0.7], [0.6, 0.4]], [c, c])
    np.testing.assert_allclose(grad_lambda_zero(chain), c, atol=1e-8)
    with pytest.warns(DegenerateCovarianceWarning):
        sigma = hess_lambda_zero(chain)
    np.testing.assert_allclose(sigma, np.outer(c, c), atol=1e-6)


def test_derivatives_match_stationary_moments():
    chain = catalog.model("chain-3state-2d")
    pi = stationary_dist(chain)
    assert np.linalg.norm(grad_lambda_zero(chain) - pi @ chain.xi) < 1e-6
    assert np.linalg.norm(hess_lambda_zero(chain) - longrun_sigma(chain)) < 1e-4


def test_taylor_residual_is_third_order():
    rep = taylor_check(catalog.model("chain-3state-2d"))
    assert 2.7 < rep.fitted_order < 3.3
    assert taylor_check(catalog.model("chain-3state-2d"), radii=(0.0, 0.1)).residuals[0] == 0


def test_band_constants_are_positive():
    alpha, beta = v0_band_constants(catalog.model("chain-3state-2d"), R=0.5)
    assert 0 < alpha <= beta < np.inf
