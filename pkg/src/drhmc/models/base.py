"""Model specification shared by all experiment models."""
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from .. import autodiff as ad
from .. import linalg as la
from ..errors import ConfigError
from ..transform import BlockSpec, ModifiedTarget, PlainTarget

LOG_2PI = float(np.log(2.0 * np.pi))

METHODS = ("drhmc", "prior-std", "direct", "rmhmc", "sshmc")


@dataclass
class ModelSpec:
    """A blocked model.

    ``terms(qs)`` returns ``[(label, log density term), ...]``; the log
    kernel is their sum.  ``metrics[r](prefix)`` gives ``G_r`` and
    ``locations[h][r]`` the location factory of block ``r`` under the
    h-strategy ``h`` (``None`` for zero).  ``prior_std`` builds the blocks
    of the prior-standardised parameterisation, or is ``None`` when the
    model does not admit one.
    """

    name: str
    names: tuple
    dims: tuple
    terms: Callable
    metrics: List[Callable]
    locations: Dict[str, list]
    default_h: str
    data: object = None
    prior_std: Optional[Callable] = None
    derived: Dict[str, Callable] = field(default_factory=dict)

    def log_density(self, qs):
        total = 0.0
        for _, v in self.terms(qs):
            total = total + v
        return total

    @property
    def dim(self):
        return int(sum(self.dims))

    def split(self, q):
        o = np.concatenate([[0], np.cumsum(self.dims)]).astype(int)
        return [q[o[i] : o[i + 1]] for i in range(len(self.dims))]

    def drhmc_blocks(self, h=None):
        h = self.default_h if h is None else h
        if h not in self.locations:
            raise ConfigError(f"model {self.name} has no h-strategy {h!r}; choose from {sorted(self.locations)}")
        locs = self.locations[h]
        return [
            BlockSpec(n, d, metric=m, location=loc)
            for n, d, m, loc in zip(self.names, self.dims, self.metrics, locs)
        ]

    def metric_blocks(self, qs):
        """The SDBD metric blocks G_r at a full point ``q`` (list of blocks)."""
        return [m(qs[:r]) for r, m in enumerate(self.metrics)]


def make_target(model: ModelSpec, method: str, h: Optional[str] = None) -> ModifiedTarget:
    """The density HMC runs on for ``method`` (drhmc, prior-std or direct)."""
    if method == "drhmc":
        return ModifiedTarget(model.drhmc_blocks(h), model.log_density, name=f"{model.name}/drhmc")
    if method == "direct":
        return PlainTarget(model.names, model.dims, model.log_density, name=f"{model.name}/direct")
    if method == "prior-std":
        if model.prior_std is None:
            raise ConfigError(f"model {model.name} does not admit prior standardisation")
        return ModifiedTarget(model.prior_std(), model.log_density, name=f"{model.name}/prior-std")
    raise ConfigError(f"method {method!r} does not use a transformed target")


# ------------------------------------------------------------------ helpers
def vec1(x):
    """Scalar (float or AD) as a length-1 vector."""
    if ad.is_ad(x):
        return x.reshape(1)
    return np.atleast_1d(np.asarray(x, dtype=float))


def diag1(x):
    return la.DiagSym(vec1(x))


def const_metric(value):
    """Metric factory returning a fixed diagonal."""
    d = la.DiagSym(np.atleast_1d(np.asarray(value, dtype=float)))
    return lambda prefix: d


def normal_logpdf(x, mean, var):
    return -0.5 * (LOG_2PI + np.log(var)) - 0.5 * (x - mean) ** 2 / var


def ar1_prior_factor(lam, phi, T):
    """Lower bidiagonal B with B x = standardised AR(1) innovations."""
    s = ad.exp(0.5 * lam)
    first = vec1(s * ad.sqrt(1.0 - phi * phi))
    rest = s * np.ones(T - 1)
    return la.TriDiagFactor(ad.concatenate([first, rest]), -(s * phi) * np.ones(T - 1))


def ar1_logpdf_phi(x, lam, phi, mu):
    """log density of a stationary AR(1) path with coefficient ``phi``."""
    T = len(ad.value(x))
    d = x - mu
    innov = d[1:] - phi * d[:-1]
    quad = (1.0 - phi * phi) * d[0] ** 2 + ad.sum(innov * innov)
    return -0.5 * T * LOG_2PI + 0.5 * T * lam + 0.5 * ad.log(1.0 - phi * phi) - 0.5 * ad.exp(lam) * quad
