import math

import numpy as np
import pytest

from renewalab.errors import DomainError
from renewalab.oscillatory import (CutoffFunction, E1_decay_check, GaussianSurrogate, I1_main_part,
                                   J_mu_direct, J_mu_limit, J_mu_reduced, e1_integrand,
                                   gauss_fourier_identity_check, i1_limit_check,
                                   oscillatory_integral_direct, prop_equivalent_limit)


def test_gauss_identity_examples():
    assert gauss_fourier_identity_check(2, np.zeros(2)) < 1e-14
    assert math.exp(-2.0) == pytest.approx(0.135335, abs=1e-6)
    assert gauss_fourier_identity_check(1, [2.0]) < 1e-14
    gen = np.random.default_rng(5)
    for _ in range(5):
        b = gen.uniform(-3, 3, 3)
        assert gauss_fourier_identity_check(3, b) < 1e-10
        assert gauss_fourier_identity_check(3, b, nodes=96) < 1e-10


def test_j_mu_needs_nonzero_mu():
    with pytest.raises(DomainError):
        J_mu_reduced(0.0, 10.0)
    with pytest.raises(DomainError):
        J_mu_direct(0.0, 10.0)


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("tau", [2.0, 5.0])
def test_reduced_form_matches_direct_quadrature(d, tau):
    up = np.full(d - 1, 0.7)
    red = J_mu_reduced(1.0, tau, uprime=up, d=d)
    direct = J_mu_direct(1.0, tau, uprime=up, d=d)
    assert abs(red - direct) < 1e-6 * abs(direct)


def test_mu_substitution():
    # J_mu(tau) with u_1 = 0 equals J_1(tau) / |mu|
    for mu in (0.5, 2.0, -1.5):
        assert abs(J_mu_reduced(mu, 3.0) - J_mu_reduced(1.0, 3.0) / abs(mu)) < 1e-12
        assert abs(J_mu_direct(mu, 3.0) - J_mu_reduced(mu, 3.0)) < 1e-6 * abs(J_mu_reduced(mu, 3.0))


def test_j_mu_limit_examples():
    for d in (2, 3):
        assert J_mu_limit(1.0, 1.0, np.zeros(d - 1), d) == pytest.approx(2 * math.pi ** ((d + 1) / 2))
        lp = np.zeros(d - 1)
        lp[0] = 2.0
        assert J_mu_limit(1.0, 1.0, lp, d) == pytest.approx(2 * math.pi ** ((d + 1) / 2) * math.exp(-1))


def test_j_mu_large_tau_ratio_with_node_doubling():
    tau = 1e4
    lp = np.array([1.0])
    J = J_mu_reduced(1.0, tau, uprime=math.sqrt(tau) * lp, d=2)
    J2 = J_mu_reduced(1.0, tau, uprime=math.sqrt(tau) * lp, d=2, nodes=128)
    assert abs(J - J2) < 1e-10 * abs(J2)
    assert 0.98 <= abs(J) / J_mu_limit(1.0, tau, lp, 2) <= 1.02


def test_prop_limit_examples():
    for d in (2, 3):
        w = np.zeros(d)
        w[0] = 1.0
        assert prop_equivalent_limit(w, np.zeros(d), 1.0) == pytest.approx(2 * math.pi ** ((d + 1) / 2))
        assert prop_equivalent_limit(w, 3.0 * w, 1.0) == pytest.approx(2 * math.pi ** ((d + 1) / 2))
    val = prop_equivalent_limit([2.0, 0.0], [0.0, math.sqrt(2.0)], 1.0)
    assert val == pytest.approx(2 * math.pi ** 1.5 / 2 * math.exp(-0.5), rel=1e-14)
    with pytest.raises(DomainError):
        prop_equivalent_limit([0.0, 0.0], [1.0, 0.0], 1.0)


def test_direct_oscillatory_integral():
    assert oscillatory_integral_direct(lambda u: np.zeros(len(u)), [1.0, 0.0], 10.0) == 0
    s = 0.3
    bump = lambda u: np.exp(-np.sum(u * u, axis=1) / (2 * s * s))
    tau = 500.0
    val = oscillatory_integral_direct(bump, [1.0, 0.0], tau, support=8 * s, feature=s / 2)
    lim = prop_equivalent_limit([1.0, 0.0], [0.0, 0.0], 1.0)
    assert abs(math.sqrt(tau) * abs(val) / lim - 1) < 0.02
    with pytest.raises(DomainError):
        oscillatory_integral_direct(bump, [1.0, 0.0], 2e3)


def test_main_part_identity_case_and_zero_weight():
    chi = CutoffFunction(0.5, 1.0)
    assert I1_main_part(1.0, [1.0, 0.0], np.eye(2), chi, [10.0, 0.0], h0=0.0) == 0
    rep = i1_limit_check(1.0, [1.0, 0.0], np.eye(2), chi, taus=(400,))
    assert rep.limit == pytest.approx((2 * math.pi) ** 1.5)
    with pytest.raises(DomainError):
        I1_main_part(1.0, [1.0, 0.0], np.diag([1.0, 0.0]), chi, [10.0, 0.0])


def test_main_part_ladder_converges():
    rep = i1_limit_check(1.0, [1.0, 0.0], np.diag([2.0, 1.0]), CutoffFunction(0.5, 1.0))
    dev = rep.deviations
    assert np.all(np.diff(dev) < 0)
    assert dev[-1] < 0.05


def test_error_integrand_matches_naive_formula_and_stays_bounded():
    m = np.array([1.0, 0.3])
    sigma = np.array([[1.5, 0.2], [0.2, 1.0]]) + np.outer(m, m)
    lam = GaussianSurrogate(m, sigma)
    chi = CutoffFunction(0.5, 1.0)
    g = e1_integrand(lam, chi)
    t = np.array([[0.3, -0.2], [-0.1, 0.4], [0.25, 0.25]])
    L = lam(t)
    vt = -1j * (t @ m) + 0.5 * np.einsum("ni,ij,nj->n", t, sigma, t)
    num = L - 1 - 1j * (t @ m) + 0.5 * np.einsum("ni,ij,nj->n", t, sigma, t)
    naive = chi(t) * (num / ((1 - L) * vt) - 1.0)
    np.testing.assert_allclose(g(t), naive, rtol=1e-10)
    ang = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    tiny = 1e-6 * np.column_stack([np.cos(ang), np.sin(ang)])
    assert np.all(np.abs(g(tiny)) < 10)
    assert np.all(np.isfinite(g(np.zeros((1, 2)))))


def test_error_term_decays():
    m = np.array([1.0, 0.3])
    lam = GaussianSurrogate(m, np.array([[1.5, 0.2], [0.2, 1.0]]) + np.outer(m, m))
    rep = E1_decay_check(lam, CutoffFunction(0.5, 1.0), taus=(50, 100, 200))
    assert rep.monotone
    assert rep.decrease > 0
