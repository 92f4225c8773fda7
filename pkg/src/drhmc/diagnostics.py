"""Effective sample size and posterior summaries for multi-chain output.

The ESS is the split-chain estimator: each chain is cut in half, the
marginal variance is the usual between/within mixture, autocorrelations
come from the variogram, and the autocorrelation sum is truncated at the
first negative sum of an adjacent (even, odd) pair.
"""
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np


class Summary(NamedTuple):
    mean: float
    sd: float
    n_eff: float  # nan for a constant coordinate
    mcse: float

    @property
    def degenerate(self):
        return not np.isfinite(self.n_eff)


@dataclass
class ChainOutput:
    """Draws of all chains in original (``q``) and modified (``qbar``) coordinates."""

    model: str
    method: str
    names: List[str]
    qbar_names: List[str]
    chains: list
    h: Optional[str] = None
    settings: dict = field(default_factory=dict)

    def __post_init__(self):
        shapes = {c.q.shape for c in self.chains} | {c.qbar.shape for c in self.chains}
        if len(shapes) > 1:
            raise ValueError("chains differ in length or dimension")

    @property
    def n_chains(self):
        return len(self.chains)

    @property
    def n_iter(self):
        return self.chains[0].q.shape[0] if self.chains else 0

    @property
    def q(self):
        """(chains, iterations, dims) array."""
        return np.stack([c.q for c in self.chains])

    @property
    def qbar(self):
        return np.stack([c.qbar for c in self.chains])

    @property
    def seconds(self):
        return float(sum(c.seconds for c in self.chains))

    @property
    def divergences(self):
        return int(sum(int(c.divergent.sum()) for c in self.chains))

    @property
    def warmup_divergences(self):
        return int(sum(c.warmup_divergences for c in self.chains))

    @property
    def divergence_rate(self):
        return self.divergences / max(1, self.n_chains * self.n_iter)

    @property
    def accept_rate(self):
        return float(np.mean([c.accept_prob.mean() for c in self.chains]))

    @property
    def aborted(self):
        return any(c.aborted for c in self.chains)

    def coordinate(self, name, modified=False):
        names = self.qbar_names if modified else self.names
        j = names.index(name)
        return (self.qbar if modified else self.q)[:, :, j]


def _split(draws):
    draws = np.asarray(draws, dtype=float)
    if draws.ndim == 1:
        draws = draws[None, :]
    n = draws.shape[1]
    if n < 4:
        raise ValueError("need at least 4 draws per chain")
    half = n // 2
    # odd lengths drop the middle draw
    return np.concatenate([draws[:, :half], draws[:, n - half :]], axis=0)


def _variograms(x):
    """V_t for t = 0..n-1 averaged over chains, via FFT autocovariance."""
    m, n = x.shape
    size = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(x, size, axis=1)
    lagged = np.fft.irfft(f * np.conj(f), size, axis=1)[:, :n]  # sum_i x_i x_{i+t}
    sq = x * x
    head = np.cumsum(sq, axis=1)  # sum_{i<k} x_i^2 with k = index + 1
    tail = np.cumsum(sq[:, ::-1], axis=1)  # sum of the last k squares
    t = np.arange(n)
    k = n - t
    # sum_{i>=t} x_i^2 + sum_{i<n-t} x_i^2 - 2 sum x_i x_{i+t}
    tot = tail[:, k - 1] + head[:, k - 1] - 2.0 * lagged
    return tot.sum(axis=0) / (m * k)


def effective_sample_size(draws):
    """Split-chain n_eff of one coordinate given ``(chains, iterations)`` draws.

    Returns ``nan`` for a constant coordinate.  The estimate is capped at the
    total number of draws.
    """
    x = _split(draws)
    m, n = x.shape
    total = np.asarray(draws).size
    chain_means = x.mean(axis=1)
    w = float(np.mean(x.var(axis=1, ddof=1)))
    b_over_n = float(np.var(chain_means, ddof=1)) if m > 1 else 0.0
    var_plus = (n - 1) / n * w + b_over_n
    if not var_plus > 0 or not np.isfinite(var_plus):
        return float("nan")
    # centre each chain to keep the FFT sums well conditioned; the variogram is shift invariant
    v = _variograms(x - chain_means[:, None])
    rho = 1.0 - v / (2.0 * var_plus)
    rho[0] = 1.0
    s = 0.0
    for k in range(0, n - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair < 0.0:
            break
        s += pair
    tau = -1.0 + 2.0 * s
    if tau <= 0.0:
        return float(total)
    return float(min(m * n / tau, total))


def summarize(draws):
    """(mean, sd, n_eff, mcse) of one coordinate over ``(chains, iterations)`` draws."""
    d = np.asarray(draws, dtype=float)
    mean = float(d.mean())
    sd = float(d.std(ddof=1)) if d.size > 1 else 0.0
    if not sd > 0:
        return Summary(mean, 0.0, float("nan"), 0.0)
    n_eff = effective_sample_size(d)
    return Summary(mean, sd, n_eff, float(sd / np.sqrt(n_eff)))


def sd_mcse(draws):
    """Monte Carlo standard error of the posterior SD estimate.

    Delta method on the second central moment, with the ESS of the squared
    deviations.
    """
    d = np.asarray(draws, dtype=float)
    dev2 = (d - d.mean()) ** 2
    sd = float(np.sqrt(dev2.mean()))
    if not sd > 0:
        return 0.0
    n_eff = effective_sample_size(dev2)
    if not np.isfinite(n_eff):
        return 0.0
    return float(np.std(dev2, ddof=1) / np.sqrt(n_eff) / (2.0 * sd))


def summarize_output(out: ChainOutput, modified=False):
    """Per-coordinate summaries as ``{name: Summary}``."""
    arr = out.qbar if modified else out.q
    names = out.qbar_names if modified else out.names
    return {n: summarize(arr[:, :, j]) for j, n in enumerate(names)}


def min_ess(out: ChainOutput, names=None, modified=False):
    """Smallest finite n_eff over the selected coordinates."""
    arr = out.qbar if modified else out.q
    all_names = out.qbar_names if modified else out.names
    names = all_names if names is None else names
    vals = [effective_sample_size(arr[:, :, all_names.index(n)]) for n in names]
    vals = [v for v in vals if np.isfinite(v)]
    return float(min(vals)) if vals else float("nan")
