"""Stochastic volatility: y_t ~ N(0, exp(x_t)) with a stationary AR(1) x.

Blocks (lam, omega, mu, x).  Priors: exp(lam) ~ Gamma(5, rate 0.05),
(phi(omega) + 1)/2 ~ Beta(20, 1.5), mu ~ N(0, 10^2).
"""
import math

import numpy as np

from .. import autodiff as ad
from .. import cip
from .. import linalg as la
from ..errors import InvalidData
from ..transform import BlockSpec, LowerScaling, identity_block
from .base import LOG_2PI, ModelSpec, ar1_prior_factor, const_metric, vec1

LAM_SHAPE, LAM_RATE = 5.0, 0.05
PHI_BETA = (20.0, 1.5)
MU_VAR = 100.0
XHAT_FLOOR = 1e-12


def simulate_sv(T=250, lam=-math.log(0.15**2), omega=2.2, mu=0.0, seed=0):
    rng = np.random.default_rng(seed)
    phi = float(cip.ar1_phi(omega, T))
    sd = math.exp(-0.5 * lam)
    x = np.empty(T)
    x[0] = mu + sd / math.sqrt(1.0 - phi * phi) * rng.standard_normal()
    for t in range(1, T):
        x[t] = mu + phi * (x[t - 1] - mu) + sd * rng.standard_normal()
    y = np.exp(0.5 * x) * rng.standard_normal(T)
    return {"y": y, "x": x, "lam": lam, "omega": omega, "mu": mu, "seed": seed}


def sv_model(y):
    """h-strategies for x: ``zero``, ``mu`` (mu 1) and ``approx`` (G^{-1}(mu Prec 1 + x_hat / 2))."""
    y = np.asarray(y, dtype=float)
    T = len(y)
    if T < 3:
        raise InvalidData("stochastic volatility model needs T >= 3")
    alpha, beta = PHI_BETA
    xi = cip.ar1_omega_prior_prec(alpha, beta, T)
    # log(y^2), clamped so that zero returns stay finite
    xhat = np.log(np.maximum(y * y, XHAT_FLOOR))
    y2 = y * y

    def terms(qs):
        lam, omega, mu, x = qs[0][0], qs[1][0], qs[2][0], qs[3]
        psi = cip.ar1_psi(omega, T)
        phi = ad.tanh(psi)
        d = x - mu
        innov = d[1:] - phi * d[:-1]
        quad = (1.0 - phi * phi) * d[0] ** 2 + ad.sum(innov * innov)
        return [
            ("lambda", LAM_SHAPE * lam - LAM_RATE * ad.exp(lam)),
            ("omega", cip.ar1_omega_logprior(omega, alpha, beta, T)),
            ("mu", -0.5 * mu * mu / MU_VAR),
            ("x", -0.5 * T * LOG_2PI + 0.5 * T * lam - ad.log_cosh(psi) - 0.5 * ad.exp(lam) * quad),
            ("y", -0.5 * T * LOG_2PI - 0.5 * ad.sum(x) - 0.5 * ad.sum(y2 * ad.exp(-x))),
        ]

    def g3(prefix):
        lam, omega = prefix[0][0], prefix[1][0]
        f_mu = cip.ar1_fisher(lam, omega, T)[2]
        return la.DiagSym(vec1(1.0 / MU_VAR + f_mu))

    def prec_x(prefix):
        return cip.ar1_precision(prefix[0][0], prefix[1][0], T)

    def g4(prefix):
        return la.add(prec_x(prefix), 0.5)

    def h_mu(prefix, factor):
        return prefix[2][0] * np.ones(T)

    def h_approx(prefix, factor):
        mu = prefix[2][0]
        return factor.solve(mu * prec_x(prefix).matvec(np.ones(T)) + 0.5 * xhat)

    def prior_std():
        def scaling(prefix):
            phi = cip.ar1_phi(prefix[1][0], T)
            return LowerScaling(ar1_prior_factor(prefix[0][0], phi, T))

        return [
            identity_block("lambda", 1),
            identity_block("omega", 1),
            identity_block("mu", 1),
            BlockSpec("x", T, location=h_mu, scaling=scaling),
        ]

    none4 = [None, None, None]
    return ModelSpec(
        name="sv",
        names=("lambda", "omega", "mu", "x"),
        dims=(1, 1, 1, T),
        terms=terms,
        metrics=[const_metric(LAM_SHAPE + T / 2.0), const_metric(xi + T / 2.0), g3, g4],
        locations={"zero": none4 + [None], "mu": none4 + [h_mu], "approx": none4 + [h_approx]},
        default_h="zero",
        data={"y": y},
        prior_std=prior_std,
        derived={"phi": lambda q: float(cip.ar1_phi(q[1], T)), "sigma": lambda q: math.exp(-0.5 * q[0])},
    )
