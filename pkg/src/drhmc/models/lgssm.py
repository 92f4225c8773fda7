"""Linear Gaussian state-space model with a stationary AR(1) state.

    x_1 ~ N(mu, exp(-lam) / (1 - phi^2)),  x_{t+1} ~ N(mu + phi (x_t - mu), exp(-lam)),
    y_t ~ N(x_t, exp(-tau)),  phi = phi(omega).

Variant 1 samples (lam, x) with tau fixed, variant 2 samples (tau, x) with
lam fixed, variant 3 samples ((lam, tau), x).  lam has a flat prior and tau a
N(0, 3^2) prior.
"""
import math
from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from .. import cip
from .. import linalg as la
from ..quadrature import integrate, panel_rule
from ..errors import ConvergenceError, InvalidParameterization
from ..transform import LowerScaling, identity_block, BlockSpec
from .base import LOG_2PI, ModelSpec, ar1_logpdf_phi, ar1_prior_factor, const_metric, vec1

TRUE_LAM = -math.log(0.15**2)
DATASET_TAU = {1: -math.log(0.15**2), 2: -math.log(0.005**2)}
TAU_PRIOR_VAR = 9.0


@dataclass(frozen=True)
class LgssmData:
    y: np.ndarray
    lam: float
    tau: float
    omega: float = 2.2
    mu: float = 0.0
    seed: int = 0

    @property
    def T(self):
        return len(self.y)

    @property
    def phi(self):
        return float(cip.ar1_phi(self.omega, self.T))


def simulate_lgssm(T=100, lam=TRUE_LAM, tau=DATASET_TAU[1], omega=2.2, mu=0.0, seed=0):
    """Forward simulation; deterministic per seed."""
    rng = np.random.default_rng(seed)
    phi = float(cip.ar1_phi(omega, T))
    sd = math.exp(-0.5 * lam)
    x = np.empty(T)
    x[0] = mu + sd / math.sqrt(1.0 - phi * phi) * rng.standard_normal()
    for t in range(1, T):
        x[t] = mu + phi * (x[t - 1] - mu) + sd * rng.standard_normal()
    y = x + math.exp(-0.5 * tau) * rng.standard_normal(T)
    return LgssmData(y, lam, tau, omega, mu, seed)


def dataset(k, T=100, seed=None):
    """Data set 1 (tau = -log 0.15^2) or 2 (tau = -log 0.005^2)."""
    return simulate_lgssm(T, TRUE_LAM, DATASET_TAU[k], seed=k if seed is None else seed)


# ------------------------------------------------------------------ Kalman
def _kalman(y, lam, tau, phi, mu, store=True):
    """Filter over broadcastable parameter arrays; optionally keeps the moments for the smoother."""
    y = np.asarray(y, dtype=float)
    lam, tau, phi, mu = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (lam, tau, phi, mu)))
    s2 = np.exp(-lam)
    r = np.exp(-tau)
    m = mu.copy()
    P = s2 / (1.0 - phi * phi)
    ll = np.zeros_like(m)
    mp, Pp, mf, Pf = [], [], [], []
    for yt in y:
        S = P + r
        v = yt - m
        ll = ll - 0.5 * (LOG_2PI + np.log(S) + v * v / S)
        K = P / S
        m_f = m + K * v
        P_f = P * (1.0 - K)
        if store:
            mp.append(m)
            Pp.append(P)
            mf.append(m_f)
            Pf.append(P_f)
        m = mu + phi * (m_f - mu)
        P = phi * phi * P_f + s2
    return ll, mp, Pp, mf, Pf


def _phi_of(omega, phi, T):
    if phi is not None:
        return phi
    return cip.ar1_phi(omega, T)


def kalman_loglik(y, lam, tau, omega=2.2, mu=0.0, phi=None):
    """log p(y | lam, tau, omega, mu); parameters may be arrays (broadcast)."""
    ll = _kalman(y, lam, tau, _phi_of(omega, phi, len(y)), mu, store=False)[0]
    return float(ll) if ll.ndim == 0 else ll


def kalman_smoother_mean(y, lam, tau, omega=2.2, mu=0.0, phi=None):
    """E(x | y, lam, tau, omega, mu) by the Rauch-Tung-Striebel recursion."""
    phi = _phi_of(omega, phi, len(y))
    _, mp, Pp, mf, Pf = _kalman(y, float(lam), float(tau), phi, mu)
    T = len(y)
    ms = np.empty(T)
    ms[-1] = mf[-1]
    for t in range(T - 2, -1, -1):
        J = Pf[t] * phi / Pp[t + 1]
        ms[t] = mf[t] + J * (ms[t + 1] - mp[t + 1])
    return ms


# ------------------------------------------------------------------- model
def lgssm_model(variant, data: LgssmData):
    """Blocked LGSSM; h-strategies ``zero``, ``y`` and ``E`` for the state block."""
    if variant not in (1, 2, 3):
        raise InvalidParameterization("variant must be 1, 2 or 3")
    y = np.asarray(data.y, dtype=float)
    T = len(y)
    phi = data.phi
    mu = data.mu

    # parameter block -> (lam, tau)
    if variant == 1:
        par = lambda p: (p[0], data.tau)
        g1 = const_metric(T / 2.0)
        pnames = "lambda"
    elif variant == 2:
        par = lambda p: (data.lam, p[0])
        g1 = const_metric(1.0 / TAU_PRIOR_VAR + T / 2.0)
        pnames = "tau"
    else:
        par = lambda p: (p[0], p[1])
        g1 = const_metric([T / 2.0, 1.0 / TAU_PRIOR_VAR + T / 2.0])
        pnames = "theta"
    pdim = 2 if variant == 3 else 1

    def terms(qs):
        lam, tau = par(qs[0])
        x = qs[1]
        out = []
        if variant != 1:
            out.append(("tau", -0.5 * (LOG_2PI + math.log(TAU_PRIOR_VAR)) - 0.5 * tau * tau / TAU_PRIOR_VAR))
        out.append(("x", ar1_logpdf_phi(x, lam, phi, mu)))
        r = y - x
        out.append(("y", -0.5 * T * LOG_2PI + 0.5 * T * tau - 0.5 * ad.exp(tau) * ad.dot(r, r)))
        return out

    def prec_x(lam):
        return cip.ar1_precision_phi(lam, phi, T)

    def g2(prefix):
        lam, tau = par(prefix[0])
        return la.add(prec_x(lam), ad.exp(tau))

    def h_y(prefix, factor):
        return y

    def h_cond(prefix, factor):
        lam, tau = par(prefix[0])
        rhs = ad.exp(tau) * y
        if mu != 0.0:
            rhs = rhs + mu * prec_x(lam).matvec(np.ones(T))
        return factor.solve(rhs)

    def prior_std():
        def scaling(prefix):
            lam, _ = par(prefix[0])
            return LowerScaling(ar1_prior_factor(lam, phi, T))

        loc = (lambda prefix, factor: mu * np.ones(T)) if mu != 0.0 else None
        return [identity_block(pnames, pdim), BlockSpec("x", T, location=loc, scaling=scaling)]

    return ModelSpec(
        name=f"lgssm{variant}",
        names=(pnames, "x"),
        dims=(pdim, T),
        terms=terms,
        metrics=[g1, g2],
        locations={"zero": [None, None], "y": [None, h_y], "E": [None, h_cond]},
        default_h="E",
        data=data,
        prior_std=prior_std,
    )


# ------------------------------------------------------- exact posterior
def _log_post(variant, data, a, b=None):
    """Unnormalised log posterior of the free parameter(s) on arrays."""
    if variant == 1:
        return kalman_loglik(data.y, a, data.tau, phi=data.phi, mu=data.mu)
    if variant == 2:
        return kalman_loglik(data.y, data.lam, a, phi=data.phi, mu=data.mu) - 0.5 * a * a / TAU_PRIOR_VAR
    return kalman_loglik(data.y, a, b, phi=data.phi, mu=data.mu) - 0.5 * b * b / TAU_PRIOR_VAR


def _bracket(f, center, width=40.0, drop=50.0):
    """Interval around ``center`` outside of which f is below max - drop."""
    g = np.linspace(center - width, center + width, 4001)
    v = f(g)
    top = np.max(v)
    keep = np.flatnonzero(v > top - drop)
    if keep[0] == 0 or keep[-1] == len(g) - 1:
        raise ConvergenceError("posterior bracket exhausted")
    return g[max(keep[0] - 1, 0)], g[min(keep[-1] + 1, len(g) - 1)], top


def lgssm_exact_posterior(data: LgssmData, variant, panels=40, order=10):
    """Posterior mean and SD of the free parameter(s) by quadrature.

    Variants 1 and 2 use adaptive Gauss-Legendre quadrature in one
    dimension; variant 3 uses a tensor composite rule.  Returns
    ``(mean, sd)`` as floats (variants 1, 2) or length-2 arrays (variant 3).
    """
    if variant in (1, 2):
        center = data.lam if variant == 1 else data.tau
        f = lambda a: _log_post(variant, data, np.asarray(a))
        lo, hi, top = _bracket(f, center)
        w = lambda k: (lambda a: np.exp(f(a) - top) * np.asarray(a) ** k)
        z = integrate(w(0), lo, hi, tol=1e-12)
        m1 = integrate(w(1), lo, hi, tol=1e-12) / z
        m2 = integrate(lambda a: np.exp(f(a) - top) * (np.asarray(a) - m1) ** 2, lo, hi, tol=1e-12) / z
        return float(m1), math.sqrt(m2)
    # bounding box of {log post > max - 50} on a coarse grid
    ga = np.linspace(data.lam - 30.0, data.lam + 30.0, 301)
    gb = np.linspace(data.tau - 30.0, data.tau + 30.0, 301)
    lp = _log_post(3, data, ga[:, None], gb[None, :])
    ia, ib = np.nonzero(lp > lp.max() - 50.0)
    if min(ia.min(), ib.min()) == 0 or max(ia.max(), ib.max()) == 300:
        raise ConvergenceError("posterior bracket exhausted")
    lo1, hi1 = ga[ia.min() - 1], ga[ia.max() + 1]
    lo2, hi2 = gb[ib.min() - 1], gb[ib.max() + 1]
    a, wa = panel_rule(lo1, hi1, panels, order)
    b, wb = panel_rule(lo2, hi2, panels, order)
    lp = _log_post(3, data, a[:, None], b[None, :])
    p = np.exp(lp - lp.max()) * wa[:, None] * wb[None, :]
    p /= p.sum()
    ma, mb = np.sum(p * a[:, None]), np.sum(p * b[None, :])
    sa = math.sqrt(np.sum(p * (a[:, None] - ma) ** 2))
    sb = math.sqrt(np.sum(p * (b[None, :] - mb) ** 2))
    return np.array([ma, mb]), np.array([sa, sb])
