import math

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from drhmc import cip
from drhmc import linalg as la
from drhmc.errors import ConfigError, InvalidData
from drhmc.models import (
    build_model,
    dataset,
    funnel_model,
    gaussian_model,
    kalman_loglik,
    kalman_smoother_mean,
    lgssm_exact_posterior,
    lgssm_model,
    load_series,
    simulate_lgssm,
    simulate_stock_watson,
    simulate_sv,
    stock_watson_model,
    sv_model,
)
from drhmc.models.base import ar1_prior_factor, make_target
from drhmc.models.lgssm import DATASET_TAU


def ar1_cov(lam, phi, T):
    k = np.arange(T)
    return math.exp(-lam) / (1 - phi * phi) * phi ** np.abs(k[:, None] - k[None, :])


# ----------------------------------------------------------------- Kalman
@pytest.mark.parametrize("T", [1, 2, 3, 5])
def test_kalman_matches_dense_gaussian(T, rng):
    y = rng.normal(size=T)
    lam, tau, phi, mu = 1.3, 0.4, 0.8, 0.7
    cov = ar1_cov(lam, phi, T) + math.exp(-tau) * np.eye(T)
    dense = multivariate_normal(mu * np.ones(T), cov).logpdf(y)
    assert kalman_loglik(y, lam, tau, mu=mu, phi=phi) == pytest.approx(dense, abs=1e-10)


def test_kalman_single_observation():
    lam, tau, phi, mu, y = 0.5, -0.2, 0.6, 1.0, 2.5
    var = math.exp(-lam) / (1 - phi**2) + math.exp(-tau)
    expected = -0.5 * math.log(2 * math.pi * var) - 0.5 * (y - mu) ** 2 / var
    assert kalman_loglik(np.array([y]), lam, tau, mu=mu, phi=phi) == pytest.approx(expected, abs=1e-12)


def test_kalman_vectorised_over_parameters(rng):
    y = rng.normal(size=8)
    lams = np.array([0.1, 1.0, 2.0])
    vec = kalman_loglik(y, lams, 0.3, phi=0.5)
    for l, v in zip(lams, vec):
        assert kalman_loglik(y, l, 0.3, phi=0.5) == pytest.approx(v, rel=1e-14)


def test_smoother_is_tridiagonal_solve(rng):
    T, lam, tau, omega, mu = 40, 2.0, 1.5, 2.2, 0.6
    y = rng.normal(size=T)
    prec = cip.ar1_precision(lam, omega, T).to_dense()
    rhs = mu * prec @ np.ones(T) + math.exp(tau) * y
    expected = np.linalg.solve(prec + math.exp(tau) * np.eye(T), rhs)
    np.testing.assert_allclose(kalman_smoother_mean(y, lam, tau, omega, mu), expected, atol=1e-10)


def test_conditional_mean_location_equals_smoother():
    d = dataset(1, T=50)
    m = lgssm_model(3, d)
    t = make_target(m, "drhmc", "E")
    lam, tau = 4.0, 3.0
    qbar = np.concatenate([t.blocks[0].make_scaling([]).whiten(np.array([lam, tau])), np.zeros(50)])
    q = t.constrain(qbar)
    np.testing.assert_allclose(q[:2], [lam, tau], atol=1e-12)
    np.testing.assert_allclose(q[2:], kalman_smoother_mean(d.y, lam, tau, d.omega, d.mu), atol=1e-10)


def test_exact_posterior_quadrature_is_converged():
    d = dataset(1)
    m40, s40 = lgssm_exact_posterior(d, 3, panels=40)
    m60, s60 = lgssm_exact_posterior(d, 3, panels=60)
    np.testing.assert_allclose(m40, m60, atol=1e-8)
    np.testing.assert_allclose(s40, s60, atol=1e-8)


def test_exact_posterior_matches_fine_grid_sum():
    d = dataset(2, T=60)
    mean, sd = lgssm_exact_posterior(d, 2)
    g = np.linspace(mean - 15 * sd, mean + 15 * sd, 20001)
    lp = kalman_loglik(d.y, d.lam, g, phi=d.phi) - 0.5 * g * g / 9.0
    w = np.exp(lp - lp.max())
    m = np.sum(w * g) / np.sum(w)
    assert mean == pytest.approx(m, abs=1e-6)
    assert sd == pytest.approx(math.sqrt(np.sum(w * (g - m) ** 2) / np.sum(w)), abs=1e-6)


# ----------------------------------------------------------------- models
def test_funnel_metric_and_location():
    m = funnel_model(0.5)
    g2 = m.metrics[1]([np.array([0.0])])
    assert m.metrics[0]([]).diag[0] == 5.5 and g2.diag[0] == 2.0
    h = m.locations["E"][1]
    assert h([np.array([40.0])], None) == pytest.approx(0.5)
    assert h([np.array([-40.0])], None) == pytest.approx(0.0, abs=1e-30)


def test_lgssm_parameter_metrics():
    d = dataset(1)
    assert lgssm_model(1, d).metrics[0]([]).diag[0] == 50.0
    assert lgssm_model(2, d).metrics[0]([]).diag[0] == pytest.approx(1 / 9 + 50)
    np.testing.assert_allclose(lgssm_model(3, d).metrics[0]([]).diag, [50.0, 1 / 9 + 50])


def test_simulation_regimes():
    assert DATASET_TAU[1] == pytest.approx(3.794, abs=1e-3)
    assert DATASET_TAU[2] == pytest.approx(10.597, abs=1e-3)
    a, b = dataset(2, seed=5), dataset(2, seed=5)
    np.testing.assert_array_equal(a.y, b.y)
    assert a.phi == pytest.approx(0.9959, abs=1e-4)


def test_sv_simulator_log_square_mean():
    # E log y^2 = mu + E log chi2_1 = mu + digamma(1/2) + log 2
    from scipy.special import digamma

    per_path = np.array([np.mean(np.log(simulate_sv(T=250, mu=0.5, seed=s)["y"] ** 2)) for s in range(300)])
    se = per_path.std(ddof=1) / math.sqrt(len(per_path))
    assert abs(per_path.mean() - (0.5 + digamma(0.5) + math.log(2))) < 4 * se


def test_sv_mu_information_matches_dense_ar1(rng):
    T = 30
    m = sv_model(rng.normal(size=T))
    for lam, omega in [(2.0, 1.0), (4.0, 2.2), (0.5, -1.0)]:
        phi = float(cip.ar1_phi(omega, T))
        ones = np.ones(T)
        dense = ones @ np.linalg.solve(ar1_cov(lam, phi, T), ones)
        g3 = m.metrics[2]([np.array([lam]), np.array([omega])]).diag[0]
        assert g3 - 1 / 100 == pytest.approx(dense, rel=1e-9)


def test_sv_latent_metric_is_spd_tridiagonal(rng):
    T = 25
    m = sv_model(rng.normal(size=T))
    for _ in range(20):
        lam, omega, mu = rng.normal(scale=3, size=3)
        g = m.metrics[3]([np.array([lam]), np.array([omega]), np.array([mu])])
        assert np.all(np.linalg.eigvalsh(g.to_dense()) > 0)
        assert np.count_nonzero(np.triu(g.to_dense(), 2)) == 0


def test_sv_zero_returns_are_clamped():
    y = np.array([0.0, 0.1, -0.2, 0.0, 0.3])
    t = make_target(sv_model(y), "drhmc", "approx")
    assert np.all(np.isfinite(t.constrain(np.zeros(t.dim))))


def test_stock_watson_tau_location_is_gaussian_conditioning(rng):
    T = 10
    y = simulate_stock_watson(T, seed=4)["y"]
    m = stock_watson_model(y)
    z, x = 0.3 * rng.normal(size=T - 1), 0.3 * rng.normal(size=T)
    D = np.diff(np.eye(T), axis=0)
    Q = np.zeros((2 * T, 2 * T))
    Rinv = np.diag(np.exp(-x))
    Q[:T, :T] = D.T @ np.diag(np.exp(-z)) @ D + Rinv
    Q[:T, T:] = Q[T:, :T] = -Rinv
    Q[T:, T:] = Rinv
    # conditional mean of tau given y from the joint precision
    expected = -np.linalg.solve(Q[:T, :T], Q[:T, T:] @ y)
    prefix = [np.array([2.0]), z, x]
    f = la.cholesky(m.metrics[3](prefix))
    np.testing.assert_allclose(m.locations["method0"][3](prefix, f), expected, atol=1e-10)


def test_stock_watson_metrics_spd(rng):
    T = 12
    m = stock_watson_model(simulate_stock_watson(T, seed=1)["y"])
    qs = [np.array([2.0]), rng.normal(size=T - 1), rng.normal(size=T), rng.normal(size=T)]
    for r in (1, 2, 3):
        assert np.all(np.linalg.eigvalsh(m.metrics[r](qs[:r]).to_dense()) > 0)


def test_stock_watson_refuses_prior_standardisation():
    m = stock_watson_model(simulate_stock_watson(10, seed=1)["y"])
    with pytest.raises(ConfigError):
        make_target(m, "prior-std")


ALL = {
    "funnel": lambda: funnel_model(0.5),
    "lgssm1": lambda: lgssm_model(1, dataset(1, T=8)),
    "lgssm3": lambda: lgssm_model(3, dataset(2, T=8)),
    "sv": lambda: sv_model(simulate_sv(T=8, seed=2)["y"]),
    "sw": lambda: stock_watson_model(simulate_stock_watson(8, seed=2)["y"]),
    "gaussian": lambda: gaussian_model(),
}


@pytest.mark.parametrize("name", sorted(ALL))
def test_terms_are_additive(name, rng):
    m = ALL[name]()
    qs = m.split(0.3 * rng.normal(size=m.dim) + 1.0)
    terms = m.terms(qs)
    total = m.log_density(qs)
    for k in range(len(terms)):
        rest = sum(v for i, (_, v) in enumerate(terms) if i != k)
        assert total - rest == pytest.approx(terms[k][1], abs=1e-9 * max(1.0, abs(total)))


@pytest.mark.parametrize("name", sorted(ALL))
def test_factories_only_see_earlier_blocks(name, rng):
    m = ALL[name]()
    qs = m.split(0.3 * rng.normal(size=m.dim) + 1.0)
    for r in range(len(m.dims)):
        # the prefix has exactly r blocks, so reading block >= r raises IndexError
        f = la.cholesky(m.metrics[r](list(qs[:r])))
        for locs in m.locations.values():
            if locs[r] is not None:
                assert np.all(np.isfinite(locs[r](list(qs[:r]), f)))


def test_prior_standardisation_round_trip_and_unit_covariance():
    T, lam, phi = 5, 1.2, 0.9
    B = ar1_prior_factor(lam, phi, T)
    rng = np.random.default_rng(7)
    x = rng.multivariate_normal(np.zeros(T), ar1_cov(lam, phi, T), size=100_000)
    z = x @ B.to_dense().T
    c = np.cov(z.T)
    # entrywise SE of a sample covariance of unit-variance data is about 1/sqrt(n)
    assert np.max(np.abs(c - np.eye(T))) < 4 * math.sqrt(2 / 100_000)
    xx = rng.normal(size=T)
    np.testing.assert_allclose(B.solve_L(B.mul_L(xx)), xx, atol=1e-12)


def test_gaussian_model_density():
    m = gaussian_model()
    q = np.linspace(-1, 1, 5)
    ref = multivariate_normal(m.data["mean"], m.data["cov"]).logpdf(q)
    assert m.log_density(m.split(q)) == pytest.approx(ref, abs=1e-12)


def test_load_series(tmp_path):
    p = tmp_path / "y.csv"
    p.write_text("value\n1.5\n-2\n\n3e-1\n")
    np.testing.assert_allclose(load_series(p), [1.5, -2.0, 0.3])
    bad = tmp_path / "bad.csv"
    bad.write_text("1\nx\n")
    with pytest.raises(InvalidData):
        load_series(bad)
    with pytest.raises(InvalidData):
        (tmp_path / "empty.csv").write_text("y\n")
        load_series(tmp_path / "empty.csv")


def test_build_model_registry(tmp_path):
    assert build_model("lgssm2", dataset_id=2, T=20).dim == 21
    p = tmp_path / "y.csv"
    p.write_text("\n".join(str(v) for v in np.linspace(-1, 1, 12)))
    assert build_model("stock-watson", data=p).dims == (1, 11, 12, 12)
    with pytest.raises(ConfigError):
        build_model("salamander")
