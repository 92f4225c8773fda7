import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special, stats
from scipy.optimize import brentq, minimize_scalar

from drhmc import autodiff as ad
from drhmc import cip
from drhmc import linalg as la
from drhmc.errors import InvalidData, InvalidParameterization, InvalidPrior
from drhmc.quadrature import integrate as gl_integrate


# ---------------------------------------------------------------- Gaussian
def test_gauss_fisher_examples():
    assert cip.gauss_fisher(1.0, 0.0) == (0.5, 1.0)
    F = cip.gauss_fisher(-3.0, 0.7)
    assert F[0] == 4.5 and F[1] == pytest.approx(math.exp(-2.1))
    assert cip.gauss_fisher(2.0, 0.0) == (2.0, 1.0)
    with pytest.raises(InvalidParameterization):
        cip.gauss_fisher(0.0, 1.0)


def test_gauss_logpdf_matches_scipy():
    x = np.array([-0.3, 1.2])
    v = cip.gauss_logpdf(x, 0.4, 0.6, delta=-0.5)
    np.testing.assert_allclose(v, stats.norm.logpdf(x, 0.4, 1.0 / math.sqrt(math.exp(-0.3))), rtol=1e-13)


# ------------------------------------------------------------------- Gamma
def test_gamma_fisher_examples():
    assert cip.gamma_g(0.0) == 0.0
    assert cip.gamma_fisher(0.0) == (0.5, 1.0)
    assert cip.gamma_fisher(2.0)[1] == pytest.approx(math.exp(cip.gamma_g(2.0)), rel=1e-15)
    assert cip.fixed_shape_gamma_fisher(3.5) == 3.5


def test_g_and_c_monotone_on_dense_grid():
    a = np.linspace(-20, 20, 20001)
    assert np.all(np.diff(cip.gamma_g(a)) > 0)
    assert np.all(np.diff(cip.chi2_c(a)) > 0)


@settings(max_examples=50, deadline=None)
@given(st.floats(-15, 15))
def test_g_and_c_analytic_derivatives(a):
    h = 1e-6
    fd = (cip.gamma_g(a + h) - cip.gamma_g(a - h)) / (2 * h)
    assert cip.gamma_g_deriv(a) == pytest.approx(fd, rel=1e-6, abs=1e-8)
    fd = (cip.chi2_c(a + h) - cip.chi2_c(a - h)) / (2 * h)
    assert cip.chi2_c_deriv(a) == pytest.approx(fd, rel=1e-6, abs=1e-8)


def _invert_integral(integrand, target):
    """Root t of int_0^t integrand = target (integrand > 0)."""
    F = lambda t: gl_integrate(integrand, 0.0, t, tol=1e-12) - target
    lo, hi = -1.0, 1.0
    while F(lo) > 0:
        lo *= 2
    while F(hi) < 0:
        hi *= 2
    return brentq(F, lo, hi, xtol=1e-14)


def _gamma_speed(z):
    # d a / d g for the Gamma shape map: sqrt(2 e^g (trigamma(e^g) e^g - 1))
    return np.sqrt(2 * np.exp(z) * (special.polygamma(1, np.exp(z)) * np.exp(z) - 1))


def _chi2_speed(z):
    # d eta / d c for the chi-square dof map: sqrt(trigamma(e^c/2) e^{2c} / 2)
    return np.sqrt(0.5 * special.polygamma(1, 0.5 * np.exp(z)) * np.exp(2 * z))


@pytest.mark.parametrize("a", [-8.0, -3.0, -0.5, 0.7, 4.0, 6.0])
def test_g_star_close_to_exact_g(a):
    assert cip.gamma_g(a) == pytest.approx(_invert_integral(_gamma_speed, a), abs=1e-3)


@pytest.mark.parametrize("eta", [-8.0, -2.0, -0.3, 0.5, 3.0, 9.0])
def test_c_star_close_to_exact_c(eta):
    assert cip.chi2_c(eta) == pytest.approx(_invert_integral(_chi2_speed, eta), abs=1e-3)


def test_gamma_logpdf_is_normalized_and_has_mean_exp_b():
    a, b = 0.8, 0.3
    dens = lambda x: np.exp(cip.gamma_logpdf(x, a, b))
    assert integrate.quad(dens, 0, np.inf)[0] == pytest.approx(1.0, rel=1e-8)
    assert integrate.quad(lambda x: x * dens(x), 0, np.inf)[0] == pytest.approx(math.exp(b), rel=1e-8)


# -------------------------------------------------------------- chi-square
def test_chi2_c_at_zero():
    assert abs(cip.chi2_c(0.0)) < 1e-8


def test_chi2_c_continuous_at_zero():
    assert abs(cip.chi2_c(-1e-12) - cip.chi2_c(0.0)) < 1e-10


def test_chi2_logpdf_matches_scipy():
    eta = 0.9
    k = math.exp(cip.chi2_c(eta))
    x = np.array([0.4, 2.5, 7.0])
    np.testing.assert_allclose(cip.chi2_logpdf(x, eta), stats.chi2.logpdf(x, k), rtol=1e-12)


# ------------------------------------------------- Laplace, Weibull, t
def test_closed_form_catalog_examples():
    assert cip.laplace_fisher(0.0) == (1.0, 1.0)
    assert cip.weibull_fisher(0.3)[0] == pytest.approx(1.6449, abs=1e-4)
    r, f_lam, _ = cip.student_t_fisher(math.log(10.0), 0.0, 0.01)
    assert r == 0.01 and f_lam == pytest.approx(0.5 * 10 / 13)
    assert cip.WEIBULL_C == pytest.approx(1.526205112, abs=1e-9)


def test_laplace_normalized():
    f = lambda x: np.exp(cip.laplace_logpdf(x, 0.3, -0.2))
    total = integrate.quad(f, -np.inf, 0.3)[0] + integrate.quad(f, 0.3, np.inf)[0]
    assert total == pytest.approx(1.0, rel=1e-8)


def test_weibull_normalized():
    f = lambda x: np.exp(cip.weibull_logpdf(x, 0.4, 0.2))
    assert integrate.quad(f, 0, np.inf)[0] == pytest.approx(1.0, rel=1e-8)


def test_student_t_moments():
    lam, a = 0.4, math.log(6.0)
    f = lambda x: np.exp(cip.student_t_logpdf(x, 0.7, lam, a))
    assert integrate.quad(f, -np.inf, np.inf)[0] == pytest.approx(1.0, rel=1e-7)
    var = integrate.quad(lambda x: (x - 0.7) ** 2 * f(x), -np.inf, np.inf)[0]
    nu = 6.0
    assert var == pytest.approx(math.exp(-lam) * nu**3 / ((nu + 1) ** 2 * (nu - 2)), rel=1e-6)


@pytest.mark.parametrize("nu,r", [(4, 0.06), (10, 0.01), (20, 0.003)])
def test_student_t_shape_information_anchors(nu, r):
    a = math.log(nu)

    def score_sq(x):
        h = 1e-5
        s = (cip.student_t_logpdf(x, 0.0, 0.0, a + h) - cip.student_t_logpdf(x, 0.0, 0.0, a - h)) / (2 * h)
        return s * s * np.exp(cip.student_t_logpdf(x, 0.0, 0.0, a))

    info = integrate.quad(score_sq, -np.inf, np.inf, limit=200)[0]
    # the anchors are quoted to one significant figure
    assert info == pytest.approx(r, rel=0.35)


# ---------------------------------------------------------------- discrete
def test_observed_fisher_discrete():
    assert cip.observed_fisher_discrete("poisson", [3, 0, 2]) == 5
    assert cip.observed_fisher_discrete("binomial", 0, n=7) == 0
    assert cip.observed_fisher_discrete("binomial", 7, n=7) == 0
    assert cip.observed_fisher_discrete("binomial", 3, n=7) == pytest.approx(12 / 7)
    assert cip.observed_fisher_discrete("negbinomial", 2, n=2) == 1
    with pytest.raises(InvalidData):
        cip.observed_fisher_discrete("poisson", [-1])
    with pytest.raises(InvalidData):
        cip.observed_fisher_discrete("binomial", 8, n=7)
    with pytest.raises(InvalidData):
        cip.observed_fisher_discrete("negbinomial", 2, n=0)


@pytest.mark.parametrize("family,n", [("poisson", None), ("binomial", 9), ("negbinomial", 3.0)])
def test_observed_fisher_is_negative_hessian_at_maximizer(family, n):
    y = 4.0

    def loglik(t):
        if family == "poisson":
            return y * t - math.exp(t)
        p = 1 / (1 + math.exp(-t))
        if family == "binomial":
            return y * math.log(p) + (n - y) * math.log(1 - p)
        return n * math.log(p) + y * math.log(1 - p)

    t = minimize_scalar(lambda t: -loglik(t)).x
    h = 1e-4
    hess = -(loglik(t + h) - 2 * loglik(t) + loglik(t - h)) / h**2
    assert cip.observed_fisher_discrete(family, y, n=n) == pytest.approx(hess, rel=1e-5)


# ------------------------------------------------------------------- AR(1)
def test_psi_basic_properties(rng):
    assert cip.ar1_psi(0.0, 100) == 0.0
    w = rng.normal(scale=3, size=20)
    np.testing.assert_allclose(cip.ar1_psi(-w, 100), -cip.ar1_psi(w, 100), rtol=0, atol=0)
    grid = np.linspace(-6, 6, 301)
    assert np.all(np.diff(cip.ar1_psi(grid, 100)) > 0)


def test_psi_slope_limit():
    T = 100
    assert cip.ar1_psi(80.0, T) / (math.sqrt(T) / 2 * 80.0) == pytest.approx(1.0, abs=0.02)
    # exact asymptotic offset: psi - sqrt(T)/2*omega -> log b - c*atan(c)
    b, c = math.sqrt((T - 1) / 2), math.sqrt((T - 3) / 2)
    off = cip.ar1_psi(60.0, T) - math.sqrt(T) / 2 * 60.0
    assert off == pytest.approx(math.log(b) - c * math.atan(c), abs=1e-9)


@pytest.mark.parametrize("T", [4, 10, 100, 2515])
def test_closed_form_integral_matches_quadrature(T):
    for p in (0.05, 0.9, 3.0, 11.0):
        q = gl_integrate(lambda a: cip.ar1_u(a, T), 0.0, p, tol=1e-14)
        assert cip.ar1_omega(p, T) == pytest.approx(q, abs=1e-13)


def test_psi_requires_T_at_least_3():
    with pytest.raises(InvalidParameterization):
        cip.ar1_psi(0.3, 2)


def test_psi_ad_derivative():
    _, g = ad.value_and_grad(lambda w: ad.sum(cip.ar1_psi(w, 50)), np.array([0.4, -1.3]))
    h = 1e-6
    fd = (cip.ar1_psi(np.array([0.4, -1.3]) + h, 50) - cip.ar1_psi(np.array([0.4, -1.3]) - h, 50)) / (2 * h)
    np.testing.assert_allclose(g, fd, rtol=1e-8)


def test_ar1_phi_reference_value():
    # omega = 2.2 with T = 100 is the regime of the state-space experiments
    assert cip.ar1_phi(2.2, 100) == pytest.approx(0.9959, abs=5e-5)


def test_ar1_fisher_examples():
    assert cip.ar1_fisher(0.3, -1.2, 100)[:2] == (50.0, 50.0)
    f_mu = cip.ar1_fisher(0.4, 0.0, 100)[2]
    assert f_mu == pytest.approx(math.exp(0.4) * 100)
    F = cip.ar1_fisher_matrix(0.1, 1.7, 100)
    assert F[1, 1] == pytest.approx(50.0, rel=1e-12)


def test_ar1_precision_inverse_of_covariance():
    T, lam, w = 20, 0.3, 0.8
    phi = cip.ar1_phi(w, T)
    m = cip.ar1_precision(lam, w, T)
    s2 = math.exp(-lam) / (1 - phi**2)
    cov = s2 * phi ** np.abs(np.subtract.outer(np.arange(T), np.arange(T)))
    np.testing.assert_allclose(m.to_dense() @ cov, np.eye(T), atol=1e-10)
    m0 = cip.ar1_precision_phi(0.5, 0.0, 6)
    np.testing.assert_allclose(m0.to_dense(), math.exp(0.5) * np.eye(6), atol=1e-15)


def test_ar1_logpdf_matches_dense_gaussian(rng):
    T, lam, w, mu = 12, -0.4, 1.3, 0.7
    x = rng.normal(size=T)
    P = cip.ar1_precision(lam, w, T).to_dense()
    ref = stats.multivariate_normal.logpdf(x, mu * np.ones(T), np.linalg.inv(P))
    assert cip.ar1_logpdf(x, lam, w, mu) == pytest.approx(ref, rel=1e-11)


def test_rw1_precision_example():
    m = cip.rw1_precision(0.0, 3)
    np.testing.assert_array_equal(m.diag, [1, 2, 1])
    np.testing.assert_array_equal(m.sub, [-1, -1])
    x = np.array([0.3, -1.0, 2.0])
    assert la.quad_form(m, x) == pytest.approx(np.sum(np.diff(x) ** 2))


def test_intrinsic_lambda_information():
    assert cip.ar1_rw_fisher_lambda("rw1", 253) == 126
    assert cip.ar1_rw_fisher_lambda("rw2", 3) == 0.5
    assert cip.ar1_rw_fisher_lambda("besag", 10) == 4.5


def test_xi_positive_and_matches_grid_oracle():
    alpha, beta, T = 20.0, 1.5, 2515
    xi = cip.ar1_omega_prior_prec(alpha, beta, T)
    assert xi > 0
    # dense-grid oracle: fit the second difference on a fine grid around the mode
    w0 = cip.ar1_omega_prior_mode(alpha, beta, T)
    grid = w0 + np.linspace(-2e-3, 2e-3, 41)
    vals = np.array([float(cip.ar1_omega_logprior(v, alpha, beta, T)) for v in grid])
    quad = np.polyfit(grid - w0, vals, 4)
    assert -2 * quad[2] == pytest.approx(xi, rel=1e-4)
    # step-size self-consistency
    assert cip.ar1_omega_prior_prec(alpha, beta, T, h=5e-5) == pytest.approx(xi, rel=1e-6)


def test_omega_logprior_is_normalized():
    f = lambda w: math.exp(cip.ar1_omega_logprior(w, 20.0, 1.5, 100))
    assert integrate.quad(f, -20, 20, limit=200, points=[0.0, 2.0])[0] == pytest.approx(1.0, rel=1e-7)


def test_omega_logprior_rejects_bad_prior():
    with pytest.raises(InvalidPrior):
        cip.ar1_omega_logprior(0.1, -1.0, 1.0, 50)


# ------------------------------------------------------------ precision CIP
def test_mvn_cip_precision_examples(rng):
    P, _ = cip.mvn_cip_precision(cip.PrecisionCipParams(np.array([0.3]), []))
    assert P[0, 0] == pytest.approx(math.exp(0.3))
    l1, l2, v = 0.2, -0.4, 0.7
    P, _ = cip.mvn_cip_precision(cip.PrecisionCipParams(np.array([l1, l2]), [np.array([v])]))
    np.testing.assert_allclose(
        P,
        [[math.exp(l1), v * math.exp(l1)], [v * math.exp(l1), math.exp(l2) + v * v * math.exp(l1)]],
        rtol=1e-14,
    )
    p = cip.PrecisionCipParams.from_flat(rng.normal(size=15), 5)
    P, _ = cip.mvn_cip_precision(p)
    np.linalg.cholesky(P)
    assert np.linalg.slogdet(P)[1] == pytest.approx(p.lam.sum(), abs=1e-12)


def test_mvn_cip_fisher_recursion_matches_dense_inverse(rng):
    p = cip.PrecisionCipParams.from_flat(rng.normal(size=15), 5)
    P, _ = cip.mvn_cip_precision(p)
    S = np.linalg.inv(P)
    blocks = cip.mvn_cip_fisher(p)
    np.testing.assert_array_equal(blocks[0].value, 0.5 * np.eye(5))
    for blk in blocks[1:]:
        j = int(blk.label[2:-1])
        np.testing.assert_allclose(blk.value, math.exp(p.lam[j - 1]) * S[j:, j:], atol=1e-10)
    p2 = cip.PrecisionCipParams(np.array([0.4, -0.3]), [np.array([1.1])])
    assert cip.mvn_cip_fisher(p2)[1].value[0, 0] == pytest.approx(math.exp(0.4) * math.exp(0.3))


def test_mvn_cip_fisher_sequential_dependence(rng):
    p = cip.PrecisionCipParams.from_flat(rng.normal(size=10), 4)
    base = cip.mvn_cip_fisher(p)
    # perturbing V^[1] (the last block) must leave every block unchanged
    q = cip.PrecisionCipParams(p.lam, [p.V[0] + 1.0] + p.V[1:])
    for a, b in zip(base, cip.mvn_cip_fisher(q)):
        np.testing.assert_array_equal(a.value, b.value)


def test_mvn_cip_score_matches_ad(rng):
    n = 4
    p = cip.PrecisionCipParams.from_flat(rng.normal(size=10) * 0.5, n)
    x, mu = rng.normal(size=n), rng.normal(size=n)

    def f(theta):
        q = cip.PrecisionCipParams.from_flat(theta, n)
        return cip.mvn_cip_logpdf(x, mu, q.lam, q.V)

    _, g = ad.value_and_grad(lambda t: f(t), p.flat())
    g_lam, g_V = cip.mvn_cip_score(x, mu, p)
    np.testing.assert_allclose(g, np.concatenate([g_lam] + g_V), rtol=1e-10, atol=1e-12)
    P, _ = cip.mvn_cip_precision(p)
    assert float(f(p.flat())) == pytest.approx(stats.multivariate_normal.logpdf(x, mu, np.linalg.inv(P)), rel=1e-12)


def test_wishart_one_dimensional_is_gamma_kernel():
    q, nu = 0.7, 5.0
    p = cip.PrecisionCipParams(np.array([0.4]), [])
    lp, lv = cip.wishart_implied_logprior(p, np.array([[q]]), nu)
    p2 = cip.PrecisionCipParams(np.array([-1.1]), [])
    lp2, _ = cip.wishart_implied_logprior(p2, np.array([[q]]), nu)
    k = lambda l: nu / 2 * l - math.exp(l) / (2 * q)
    assert lp - lp2 == pytest.approx(k(0.4) - k(-1.1), rel=1e-13)
    assert lv == 0.0


def test_wishart_rejects_small_dof():
    with pytest.raises(InvalidPrior):
        cip.wishart_implied_logprior(cip.PrecisionCipParams(np.zeros(3), [np.zeros(2), np.zeros(1)]), np.eye(3), 3.0)


def test_wishart_prior_precision_diag():
    w = cip.WishartImplied.build(np.eye(3), 7.0)
    np.testing.assert_array_equal(w.lam_prior_precision, [4.5, 3.5, 2.5])
