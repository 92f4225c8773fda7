"""Unobserved-components model with stochastic volatility in trend and noise.

    y_t ~ N(tau_t, exp(x_t)),             t = 1..T
    tau_t ~ N(tau_{t-1}, exp(z_{t-1})),   t = 2..T
    x_t ~ N(x_{t-1}, exp(-lam)),          t = 2..T
    z_t ~ N(z_{t-1}, exp(-lam)),          t = 2..T-1
    exp(lam) ~ Gamma(5, rate 0.5)

tau, x and z have intrinsic random-walk priors.  Blocks (lam, z, x, tau).
"""
import numpy as np

from .. import autodiff as ad
from .. import linalg as la
from ..errors import InvalidData
from .base import LOG_2PI, ModelSpec, const_metric

LAM_SHAPE, LAM_RATE = 5.0, 0.5


def simulate_stock_watson(T=100, lam=2.35, z1=0.0, x1=0.0, tau1=0.0, seed=0):
    """Forward simulation; the random walks start at (z1, x1, tau1)."""
    rng = np.random.default_rng(seed)
    sd = np.exp(-0.5 * lam)
    z = z1 + np.concatenate([[0.0], np.cumsum(sd * rng.standard_normal(T - 2))])
    x = x1 + np.concatenate([[0.0], np.cumsum(sd * rng.standard_normal(T - 1))])
    tau = tau1 + np.concatenate([[0.0], np.cumsum(np.exp(0.5 * z) * rng.standard_normal(T - 1))])
    y = tau + np.exp(0.5 * x) * rng.standard_normal(T)
    return {"y": y, "z": z, "x": x, "tau": tau, "lam": lam, "seed": seed}


def _rw1_quad(v):
    dv = v[1:] - v[:-1]
    return ad.dot(dv, dv)


def tau_precision(z):
    """Prec(tau | z) = D^T diag(exp(-z)) D for the intrinsic random walk."""
    w = ad.exp(-z)
    zero = np.zeros(1)
    diag = ad.concatenate([w, zero]) + ad.concatenate([zero, w])
    return la.TriDiagSym(diag, -w)


def stock_watson_model(y):
    """h-strategy ``method0``: zero locations for (lam, z, x) and h_tau = E(tau | z, x, y)."""
    y = np.asarray(y, dtype=float)
    T = len(y)
    if T < 3:
        raise InvalidData("model needs T >= 3")

    def terms(qs):
        lam, z, x, tau = qs[0][0], qs[1], qs[2], qs[3]
        el = ad.exp(lam)
        dtau = tau[1:] - tau[:-1]
        r = y - tau
        return [
            ("lambda", LAM_SHAPE * lam - LAM_RATE * el),
            ("z", -0.5 * (T - 2) * LOG_2PI + 0.5 * (T - 2) * lam - 0.5 * el * _rw1_quad(z)),
            ("x", -0.5 * (T - 1) * LOG_2PI + 0.5 * (T - 1) * lam - 0.5 * el * _rw1_quad(x)),
            ("tau", -0.5 * (T - 1) * LOG_2PI - 0.5 * ad.sum(z) - 0.5 * ad.sum(dtau * dtau * ad.exp(-z))),
            ("y", -0.5 * T * LOG_2PI - 0.5 * ad.sum(x) - 0.5 * ad.sum(r * r * ad.exp(-x))),
        ]

    def rw_metric(n):
        def g(prefix):
            e = ad.exp(prefix[0][0])
            return la.add(la.tridiag_const1n(n, e, 2.0 * e, -e), 0.5)

        return g

    def g4(prefix):
        return la.add(tau_precision(prefix[1]), ad.exp(-prefix[2]))

    def h4(prefix, factor):
        return factor.solve(ad.exp(-prefix[2]) * y)

    g1 = LAM_SHAPE + (T - 1) / 2.0 + (T - 2) / 2.0
    return ModelSpec(
        name="stock-watson",
        names=("lambda", "z", "x", "tau"),
        dims=(1, T - 1, T, T),
        terms=terms,
        metrics=[const_metric(g1), rw_metric(T - 1), rw_metric(T), g4],
        locations={"method0": [None, None, None, h4]},
        default_h="method0",
        data={"y": y},
        prior_std=None,
    )
