"""Correlated multivariate normal test target with a blocked metric.

Blocks are ``a`` (the first ``split`` coordinates) and ``b`` (the rest).
With ``h = "E"`` the locations are the exact conditional means, so the
modified coordinates are standard normal when the metric is the exact
conditional precision (``metric="exact"``, ``wobble=0``).  A non-zero
``wobble`` multiplies ``G_b`` by ``exp(wobble * sin(a_1))``, which gives the
Riemannian samplers a position-dependent metric to integrate.
"""
import numpy as np

from .. import autodiff as ad
from .. import linalg as la
from ..errors import InvalidParameterization
from ..transform import fixed_location
from .base import LOG_2PI, ModelSpec, const_metric

DEFAULT_MEAN = np.array([0.5, -1.0, 2.0, 0.0, 1.0])
DEFAULT_SD = np.array([1.0, 2.0, 0.5, 1.5, 1.0])
DEFAULT_RHO = 0.7


def default_covariance():
    """sd_i sd_j rho^|i-j| with the module defaults."""
    k = np.arange(len(DEFAULT_SD))
    return np.outer(DEFAULT_SD, DEFAULT_SD) * DEFAULT_RHO ** np.abs(k[:, None] - k[None, :])


def gaussian_model(mean=None, cov=None, split=1, wobble=0.3, metric="diag"):
    mean = DEFAULT_MEAN.copy() if mean is None else np.asarray(mean, dtype=float)
    cov = default_covariance() if cov is None else np.asarray(cov, dtype=float)
    n = len(mean)
    if cov.shape != (n, n) or not 1 <= split < n:
        raise InvalidParameterization("mean, covariance and split do not conform")
    if metric not in ("diag", "exact"):
        raise InvalidParameterization("metric must be 'diag' or 'exact'")
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as e:
        raise InvalidParameterization("covariance is not positive definite") from e
    prec = np.linalg.inv(cov)
    log_norm = -0.5 * n * LOG_2PI - float(np.sum(np.log(np.diag(chol))))

    s11 = cov[:split, :split]
    s21 = cov[split:, :split]
    reg = s21 @ np.linalg.inv(s11)  # E(b | a) = m_b + reg (a - m_a)
    p22 = prec[split:, split:]

    def terms(qs):
        d = ad.concatenate([qs[0], qs[1]]) - mean
        return [("q", log_norm - 0.5 * ad.sum(d.reshape(n, 1) * d.reshape(1, n) * prec))]

    def g_b(prefix):
        c = ad.exp(wobble * ad.sin(prefix[0][0])) if wobble else 1.0
        if metric == "exact":
            return la.DenseSym(p22 * c)
        return la.DiagSym(np.diag(p22) * c)

    def h_b(prefix, factor):
        da = prefix[0] - mean[:split]
        out = mean[split:]
        for j in range(split):
            out = out + reg[:, j] * da[j]
        return out

    g_a = np.linalg.inv(s11)
    if split == 1:
        metric_a = const_metric(g_a[0, 0])
    else:
        dense_a = la.DenseSym(g_a)
        metric_a = lambda prefix: dense_a

    return ModelSpec(
        name="gaussian",
        names=("a", "b"),
        dims=(split, n - split),
        terms=terms,
        metrics=[metric_a, g_b],
        locations={"zero": [None, None], "E": [fixed_location(mean[:split]), h_b]},
        default_h="E",
        data={"mean": mean, "cov": cov, "wobble": wobble},
        prior_std=None,
    )


def gaussian_marginals(model):
    """(mean, sd) of every coordinate of the original parameterisation."""
    cov = model.data["cov"]
    return model.data["mean"].copy(), np.sqrt(np.diag(cov))

