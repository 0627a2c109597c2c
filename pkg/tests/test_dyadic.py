import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from renewalab import catalog, dyadic
from renewalab.errors import (CapabilityError, DomainCoverageError, DomainError,
                              HypothesisViolationError)
from renewalab.experiments import log_uniform_points
from renewalab.geometry import Annulus, dilate, w_abs
from renewalab.jets import Jet

point2 = st.lists(st.floats(-3, 3), min_size=2, max_size=2).filter(lambda v: w_abs(np.array(v)) > 1e-9)
point3 = st.lists(st.floats(-3, 3), min_size=3, max_size=3).filter(lambda v: w_abs(np.array(v)) > 1e-9)


# ------------------------------------------------------------------ partition


def test_bump_profile_plateau_and_support():
    s = np.array([0.1, 0.125, 0.25, 0.5, 1.0, 2.0, 3.0])
    e = dyadic.eta(s)
    np.testing.assert_array_equal(e[[2, 3, 4]], 1.0)
    np.testing.assert_array_equal(e[[0, 1, 5, 6]], 0.0)


def test_phi_at_least_one_inside_thin_annulus():
    x = np.array([[0.5, 0.0], [0.0, math.sqrt(0.5)]])
    assert np.all(dyadic.gamma_eval(x) == 1.0)
    assert np.all(dyadic.phi_eval(x) >= 1.0)


@given(st.one_of(point2, point3), st.integers(-3, 3))
def test_phi_is_dilation_invariant(x, ell):
    x = np.array(x)
    assert abs(dyadic.phi_eval(dilate(x, ell))[0] - dyadic.phi_eval(x)[0]) < 1e-12


@given(st.one_of(point2, point3))
def test_partition_sums_to_one(x):
    assert abs(dyadic.partition_sum(np.array(x))[0] - 1.0) < 1e-12


def test_partition_on_log_uniform_points():
    for d in (2, 3):
        x = log_uniform_points(20_000, d, 1e-12, 1e6, seed=d)
        assert np.max(np.abs(dyadic.partition_sum(x) - 1)) < 1e-10
        assert dyadic.window_census(x).max() <= 3


@given(st.one_of(point2, point3))
def test_rho_vanishes_off_wide_annulus(x):
    x = np.array(x)
    if not Annulus(0, "gamma_tilde").contains(x):
        assert dyadic.rho_eval(x)[0] == 0.0
    else:
        assert 0.0 <= dyadic.rho_eval(x)[0] <= 1.0


def test_partition_undefined_at_origin():
    with pytest.raises(DomainError):
        dyadic.phi_eval(np.zeros(2))
    with pytest.raises(DomainError):
        dyadic.rho_eval(np.zeros((1, 3)))


def test_rho_expression_matches_values():
    x = dyadic.AnnulusRegion(2).sample(500, np.random.default_rng(1))
    xs = [x[:, 0], x[:, 1]]
    np.testing.assert_allclose(dyadic.rho_expr(xs), dyadic.rho_eval(x), atol=1e-15)


# --------------------------------------------------------------- Hölder norms


def test_seminorm_of_constant_is_zero():
    assert dyadic.holder_seminorm(lambda x: np.full(len(x), 3.0), 0.5, dyadic.ball(2)) == 0.0


def test_seminorm_of_linear_function():
    est = dyadic.holder_seminorm(lambda x: x[:, 0], 1.0, dyadic.ball(2))
    assert 0.99 <= est <= 1.0


def test_seminorm_of_square_root_near_zero():
    est = dyadic.holder_seminorm(lambda x: np.sqrt(np.abs(x[:, 0])), 0.5, dyadic.box([-1.0], [1.0]))
    assert est >= 0.95


@given(st.integers(1, 5), st.integers(1, 5))
def test_seminorm_is_monotone_in_budget(a, b):
    g = lambda x: np.sin(3 * x[:, 0]) * np.cos(2 * x[:, 1])
    lo, hi = sorted((a * 3000, b * 3000))
    region = dyadic.ball(2)
    assert dyadic.holder_seminorm(g, 0.5, region, lo) <= dyadic.holder_seminorm(g, 0.5, region, hi)


def test_seminorm_order_is_checked():
    with pytest.raises(ValueError):
        dyadic.holder_seminorm(lambda x: x[:, 0], 1.5, dyadic.ball(2))


def test_norm_of_constant():
    h = dyadic.HolderFunctionHandle("c", lambda xs: -2.5 + 0.0 * xs[0])
    for m in (0.0, 0.5, 1.0, 2.0, 2.5):
        assert dyadic.cbm_norm(h, m, dyadic.ball(2), budget=4000).total == pytest.approx(2.5)


def test_norm_of_square():
    h = dyadic.HolderFunctionHandle("x1^2", lambda xs: xs[0] * xs[0])
    est = dyadic.cbm_norm(h, 2.0, dyadic.ball(2), budget=20000)
    assert est.total == pytest.approx(5.0, rel=1e-3)
    assert est.seminorm_terms == {}
    frac = dyadic.cbm_norm(h, 2.5, dyadic.ball(2), budget=4000)
    assert set(frac.seminorm_terms) == set(dyadic.multi_indices(2, 2))
    # second derivatives are constant, so the extra seminorms are 0
    assert frac.total == pytest.approx(est.total, rel=1e-3)


def test_norm_capabilities():
    h = dyadic.HolderFunctionHandle("x1", lambda xs: xs[0])
    with pytest.raises(CapabilityError):
        dyadic.cbm_norm(h, 3.0, dyadic.ball(2))
    value_only = dyadic.bump_handle()
    with pytest.raises(CapabilityError):
        dyadic.cbm_norm(value_only, 1.0, dyadic.ball(2))
    assert dyadic.cbm_norm(value_only, 0.5, dyadic.ball(2), budget=4000).total > 1.0


def test_declared_derivatives_are_audited():
    th, v, _ = catalog.pair("x2/v")
    psi = dyadic.psi_handle(th, v, 4)
    assert dyadic.check_derivatives(psi, dyadic.AnnulusRegion(2)) < 1e-4

    def wrong(xs):
        if isinstance(xs[0], Jet):
            return Jet(xs[0].val ** 2, np.zeros_like(xs[0].grad), np.zeros_like(xs[0].hess))
        return xs[0] ** 2

    with pytest.raises(HypothesisViolationError):
        dyadic.check_derivatives(dyadic.HolderFunctionHandle("bad", wrong), dyadic.ball(2))


def test_multi_indices():
    assert dyadic.multi_indices(2, 0) == [(0, 0)]
    assert dyadic.multi_indices(2, 2) == [(2, 0), (1, 1), (0, 2)]
    assert len(dyadic.multi_indices(3, 2)) == 6


# --------------------------------------------------------------- scaling laws


def test_k0_rule():
    assert dyadic.k0_for_radius(0.5) == 3
    assert dyadic.k0_for_radius(2.0) == 1
    for r in (0.1, 0.3, 1.0, 1.5):
        k0 = dyadic.k0_for_radius(r)
        assert math.sqrt(2) / 2 ** (k0 - 1) < r
        assert k0 == 1 or math.sqrt(2) / 2 ** (k0 - 2) >= r


def test_numerator_is_untouched_on_dilated_annuli():
    th = dyadic.theta_handle("x2", r=0.5)
    k0 = th.meta["k0"]
    x = dyadic.AnnulusRegion(2).sample(2000, np.random.default_rng(0))
    for k in range(k0, k0 + 4):
        np.testing.assert_allclose(th.dilated(k)(x), x[:, 1] * 2.0 ** -k, rtol=1e-14)


def test_zero_numerator_has_zero_norms():
    th, v, _ = catalog.pair("zero/v")
    tab = dyadic.psi_k_norm_law(th, v, k_range=range(3, 6), budget=2000)
    assert np.all(tab.norms == 0)
    assert tab.ok


def test_quotient_law_on_short_range():
    th, v, _ = catalog.pair("x2/v")
    tab = dyadic.psi_k_norm_law(th, v, k_range=range(3, 7), budget=4000)
    assert tab.slope <= 1.0 + dyadic.SLOPE_SLACK


def test_dilated_weight_laws():
    v = dyadic.v_handle()
    assert dyadic.scaled_norm_table(v, "v", range(1, 6), budget=3000).slope <= -2 + dyadic.SLOPE_SLACK
    assert dyadic.scaled_norm_table(v, "inv_v", range(1, 6), budget=3000).slope <= 2 + dyadic.SLOPE_SLACK


def test_range_below_k0_is_rejected():
    th, v, _ = catalog.pair("x2/v")
    with pytest.raises(DomainCoverageError):
        dyadic.psi_k_norm_law(th, v, k_range=range(1, 5))


def test_weight_with_transverse_gradient_is_rejected():
    th, _, _ = catalog.pair("x2/v")
    bad = dyadic.HolderFunctionHandle("v+x2", lambda xs: xs[0] * xs[0] + xs[1] * xs[1] + xs[1] - 1j * xs[0])
    with pytest.raises(HypothesisViolationError):
        dyadic.psi_k_norm_law(th, bad, k_range=range(3, 6), budget=1000)


def test_nu():
    assert dyadic.nu_of(2.5) == 0.5
    assert dyadic.nu_of(3.7) == 1.0


# -------------------------------------------------------------------- Fourier


def test_zero_numerator_has_zero_transform():
    th, v, _ = catalog.pair("zero/v")
    q = dyadic.SingularQuotient(th, v)
    eng = dyadic.DyadicFourier(q, d=2, width=0.2, nodes=8)
    assert eng.transform(np.array([30.0, 5.0])).value == 0


def test_dyadic_sum_matches_direct_transform_at_low_frequency():
    th, v, _ = catalog.pair("(x1+x2)/v")
    q = dyadic.SingularQuotient(th, v)
    eng = dyadic.DyadicFourier(q, d=2)
    a = np.array([10.0, 0.0])
    dy = eng.transform(a)
    di = dyadic.direct_fourier(q, a)
    assert abs(dy.value - di) < 0.02 * abs(di)
    assert dy.tail_bound <= 1e-4 * sum(eng.shell_mass(k) for k in dy.ks)
    assert abs(eng.l1_mass() - dyadic.direct_l1(q)) < 0.01 * dyadic.direct_l1(q)


def test_smooth_bump_transform_decay():
    u = dyadic.bump_handle()
    r = np.geomspace(1, 200, 40)
    a = np.column_stack([r, 0.3 * r])
    rep = dyadic.cm_fourier_bound_check(u, 2.0, a)
    assert np.isfinite(rep.constant)
    zero = dyadic.HolderFunctionHandle("0", value=lambda x: np.zeros(len(x)))
    assert dyadic.cm_fourier_bound_check(zero, 2.0, a).constant == 0


def test_translation_changes_transform_by_phase_only():
    a = np.column_stack([np.linspace(1, 60, 15), np.linspace(-5, 20, 15)])
    c = np.array([0.3, -0.2])
    base = dyadic.cm_fourier_bound_check(dyadic.bump_handle(), 0.0, a, half_width=1.0)
    moved = dyadic.cm_fourier_bound_check(dyadic.bump_handle(center=c), 0.0, a, half_width=1.0, center=c)
    np.testing.assert_allclose(moved.scaled, base.scaled, rtol=1e-8, atol=1e-14)


# ------------------------------------------------------------------- products


def test_product_with_constant_is_equality():
    g = lambda x: np.sin(2 * x[:, 0]) + x[:, 1]
    rep = dyadic.product_holder_check(lambda x: np.full(len(x), -1.5), g, 0.5, dyadic.ball(2), 5000)
    assert rep.fg == pytest.approx(1.5 * rep.g_semi, rel=1e-12)
    assert rep.f_semi == 0
    assert rep.ok


def test_product_of_identity_on_unit_interval():
    rep = dyadic.product_holder_check(lambda x: x[:, 0], lambda x: x[:, 0], 1.0, dyadic.box([0.0], [1.0]))
    assert rep.fg == pytest.approx(2.0, rel=1e-3)
    assert rep.rhs == pytest.approx(2.0, rel=1e-3)
    assert rep.ok


@given(st.floats(0.5, 4), st.floats(-2, 2), st.floats(0.5, 4), st.floats(-2, 2), st.floats(0.1, 1.0))
def test_product_inequality_on_random_smooth_pairs(k1, p1, k2, p2, sigma):
    f = lambda x: np.sin(k1 * x[:, 0] + p1) + 0.5 * x[:, 1]
    g = lambda x: np.cos(k2 * x[:, 1] + p2) * np.exp(0.3 * x[:, 0])
    rep = dyadic.product_holder_check(f, g, sigma, dyadic.ball(2), 4000, seed=3)
    assume(rep.rhs > 0)
    assert rep.fg <= rep.rhs * (1 + 1e-9)


# -------------------------------------------------------------------- catalog


def test_catalog_pairs_resolve():
    for entry in catalog.PAIRS:
        th, v, vt = catalog.pair(entry.name)
        assert (vt is not None) == entry.tilde
        assert th.meta["k0"] == dyadic.k0_for_radius(entry.r)
    with pytest.raises(KeyError):
        catalog.pair("nope")
