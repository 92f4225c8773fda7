"""Riemann manifold HMC with a sequentially dependent block-diagonal metric.

The Hamiltonian in the original coordinates is

    H(q, r) = -log pi(q) + 1/2 sum_r log|G_r| + 1/2 sum_r r_r^T G_r^{-1} r_r,

with ``G_r`` depending on ``q_1, ..., q_{r-1}`` only.  Under this structure
the generalised leapfrog is explicit: the implicit half-kick is solved
block by block from the last block backwards, and the implicit drift block
by block from the first block forwards.
"""
import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .. import autodiff as ad
from .. import linalg as la
from ..errors import ConfigError, ConvergenceError, DivergentEvaluation, RunAborted
from ..transform import Blocking
from .hmc import (
    DIVERGENCE_ENERGY,
    Recorder,
    TransitionDiag,
    chain_rng,
    pick_path_length,
)


@dataclass
class RmhmcConfig:
    step_size: float = 0.1
    L_min: int = 30
    L_max: int = 50
    warmup: int = 1000
    iters: int = 1000
    max_divergence_rate: Optional[float] = None

    def __post_init__(self):
        if not self.step_size > 0:
            raise ConfigError("step size must be positive")
        if self.L_min < 1 or self.L_max < self.L_min:
            raise ConfigError("need 1 <= L_min <= L_max")
        if self.warmup < 0 or self.iters < 1:
            raise ConfigError("need warmup >= 0 and iters >= 1")


class RiemannTarget:
    """Hamiltonian pieces of a blocked model under its SDBD metric."""

    def __init__(self, model):
        self.model = model
        self.blocking = Blocking(tuple(model.names), tuple(model.dims))
        self.tape = ad.Tape()
        self.n_evals = 0

    @property
    def dim(self):
        return self.blocking.size

    @property
    def n_blocks(self):
        return len(self.blocking.dims)

    def split(self, x):
        return self.blocking.split(x)

    def factor(self, r, prefix):
        return la.cholesky(self.model.metrics[r](prefix))

    def factors(self, q):
        qs = self.split(np.asarray(q, dtype=float))
        return [self.factor(r, qs[:r]) for r in range(self.n_blocks)]

    def _energy(self, qs, moms):
        """phi(q) plus 1/2 r_s^T G_s^{-1} r_s for every block with a momentum."""
        val = -self.model.log_density(qs)
        for r in range(self.n_blocks):
            f = self.factor(r, qs[:r])
            val = val + f.log_det
            if moms[r] is not None:
                val = val + 0.5 * la.inv_quad_form(f, moms[r])
        return val

    def hamiltonian(self, q, r):
        q = np.asarray(q, dtype=float)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            return float(self._energy(self.split(q), self.split(np.asarray(r, dtype=float))))

    def grad_q(self, q, moms):
        """Gradient in q of the energy with the given momentum blocks (``None`` omits a block)."""
        self.n_evals += 1
        v, g = ad.value_and_grad(lambda x: self._energy(self.split(x), moms), np.asarray(q, dtype=float), tape=self.tape)
        if not np.all(np.isfinite(g)):
            raise DivergentEvaluation("non-finite gradient")
        return g

    def velocity(self, factors, r):
        """G^{-1} r blockwise for precomputed factors."""
        return np.concatenate([np.asarray(f.solve(x), dtype=float) for f, x in zip(factors, self.split(r))])

    def sample_momentum(self, q, rng):
        """r ~ N(0, G(q)) as r_b = L_b z_b."""
        out = [np.asarray(f.mul_L(rng.standard_normal(d)), dtype=float) for f, d in zip(self.factors(q), self.blocking.dims)]
        return np.concatenate(out)


def glf_step(target: RiemannTarget, q, r, eps):
    """One explicit generalised leapfrog step; returns (q', r')."""
    q = np.asarray(q, dtype=float)
    R = target.n_blocks
    rs = target.split(np.asarray(r, dtype=float))
    rstar = [None] * R
    # implicit half kick, last block first: block b only feels momenta s > b
    for b in range(R - 1, -1, -1):
        g = target.grad_q(q, [rstar[s] if s > b else None for s in range(R)])
        rstar[b] = rs[b] - 0.5 * eps * target.split(g)[b]
    # implicit drift, first block first: G_b at q' needs only q'_{<b}
    qs = target.split(q)
    new = []
    for b in range(R):
        old_f = target.factor(b, qs[:b])
        new_f = target.factor(b, new)
        v = np.asarray(old_f.solve(rstar[b]), dtype=float) + np.asarray(new_f.solve(rstar[b]), dtype=float)
        new.append(qs[b] + 0.5 * eps * v)
    q1 = np.concatenate(new)
    rstar_flat = np.concatenate(rstar)
    g = target.grad_q(q1, rstar)
    return q1, rstar_flat - 0.5 * eps * g


def glf_step_implicit(target: RiemannTarget, q, r, eps, tol=1e-13, max_iter=1000):
    """Generalised leapfrog solved by fixed-point iteration (test oracle)."""
    q = np.asarray(q, dtype=float)
    r = np.asarray(r, dtype=float)
    rstar = r.copy()
    for _ in range(max_iter):
        nxt = r - 0.5 * eps * target.grad_q(q, target.split(rstar))
        done = np.max(np.abs(nxt - rstar)) < tol
        rstar = nxt
        if done:
            break
    else:
        raise ConvergenceError("momentum fixed point did not converge")
    v0 = target.velocity(target.factors(q), rstar)
    q1 = q.copy()
    for _ in range(max_iter):
        nxt = q + 0.5 * eps * (v0 + target.velocity(target.factors(q1), rstar))
        done = np.max(np.abs(nxt - q1)) < tol
        q1 = nxt
        if done:
            break
    else:
        raise ConvergenceError("position fixed point did not converge")
    return q1, rstar - 0.5 * eps * target.grad_q(q1, target.split(rstar))


def rmhmc_transition(target: RiemannTarget, q, eps, n_steps, rng):
    """One Metropolis-corrected RMHMC transition; returns (q', diag)."""
    r0 = target.sample_momentum(q, rng)
    h0 = target.hamiltonian(q, r0)
    u = rng.uniform()
    try:
        q1, r1 = q, r0
        for _ in range(n_steps):
            q1, r1 = glf_step(target, q1, r1, eps)
        err = target.hamiltonian(q1, r1) - h0
        divergent = not math.isfinite(err) or err > DIVERGENCE_ENERGY
    except DivergentEvaluation:
        err, divergent = math.inf, True
    if divergent:
        return q, TransitionDiag(0.0, True, n_steps, err, eps)
    a = 1.0 if err <= 0 else math.exp(-err)
    return (q1 if u < a else q), TransitionDiag(a, False, n_steps, err, eps)


def run_rmhmc(model, config: RmhmcConfig, seed=0, chain=0, q0=None, progress=None):
    """Fixed step-size RMHMC chain on the original coordinates."""
    target = RiemannTarget(model)
    rng = chain_rng(seed, chain)
    t_start = time.thread_time()
    q = np.zeros(target.dim) if q0 is None else np.asarray(q0, dtype=float).copy()
    try:
        target.hamiltonian(q, np.zeros(target.dim))
    except DivergentEvaluation as e:
        raise RunAborted(f"initial point not evaluable: {e}") from e
    rec = Recorder(config.iters, target.dim, config.max_divergence_rate, chain)
    warm_div = 0
    for it in range(config.warmup + config.iters):
        L = pick_path_length(rng, config.L_min, config.L_max)
        q, d = rmhmc_transition(target, q, config.step_size, L, rng)
        if it < config.warmup:
            warm_div += d.divergent
            continue
        rec.record(q, q, d, progress)
        if rec.too_many():
            rec.abort(config.step_size, t_start, warm_div, None, config.max_divergence_rate)
    return rec.finish(config.step_size, t_start, warm_div)
