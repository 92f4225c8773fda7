"""Semi-separable HMC with the alternating block-wise leapfrog (ABLA).

For a two-block model (parameters phi, latent x) with constant ``G_1`` and
``G_2 = G_2(phi)`` the Hamiltonian is

    H = -log pi(phi, x) + 1/2 log|G_2(phi)|
        + 1/2 p_phi^T G_1^{-1} p_phi + 1/2 p_x^T G_2(phi)^{-1} p_x.

With ``x, p_x`` frozen it is separable in ``(phi, p_phi)``; with ``phi``
frozen it is separable in ``(x, p_x)``.  One ABLA step runs leapfrog on the
phi part, then on the x part, then on the phi part again.
"""
import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .. import autodiff as ad
from .. import linalg as la
from ..errors import ConfigError, DivergentEvaluation, RunAborted
from .hmc import DIVERGENCE_ENERGY, Recorder, TransitionDiag, chain_rng


@dataclass
class SshmcConfig:
    """ABLA schedule: ``n_abla`` steps of (phi_steps, x_steps, phi_steps) leapfrogs.

    Each leapfrog uses the given step size as is.
    """

    phi_step: float = 0.7
    phi_steps: int = 6
    x_step: float = 0.25
    x_steps: int = 1
    n_abla: int = 10
    warmup: int = 1000
    iters: int = 1000
    max_divergence_rate: Optional[float] = None

    def __post_init__(self):
        if not (self.phi_step > 0 and self.x_step > 0):
            raise ConfigError("step sizes must be positive")
        if self.phi_steps < 0 or self.x_steps < 0 or self.n_abla < 1:
            raise ConfigError("need non-negative leapfrog counts and n_abla >= 1")
        if self.warmup < 0 or self.iters < 1:
            raise ConfigError("need warmup >= 0 and iters >= 1")


class SemiSeparableTarget:
    def __init__(self, model):
        if len(model.dims) != 2:
            raise ConfigError(f"SSHMC needs a (parameter, latent) model; {model.name} has {len(model.dims)} blocks")
        self.model = model
        self.d1, self.d2 = (int(d) for d in model.dims)
        self.g1 = la.cholesky(model.metrics[0]([]))
        self.tape = ad.Tape()
        self._key = None
        self._grad = None

    @property
    def dim(self):
        return self.d1 + self.d2

    def g2(self, phi):
        return la.cholesky(self.model.metrics[1]([phi]))

    def _potential(self, phi, x, px):
        """-log pi + 1/2 log|G_2| + 1/2 p_x^T G_2^{-1} p_x."""
        f = self.g2(phi)
        return -self.model.log_density([phi, x]) + f.log_det + 0.5 * la.inv_quad_form(f, px)

    def hamiltonian(self, phi, x, pphi, px):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            u = float(self._potential(phi, x, px))
        return u + 0.5 * float(la.inv_quad_form(self.g1, pphi))

    def grad(self, phi, x, px):
        """Gradients of the potential part in (phi, x) with ``p_x`` held fixed."""
        z = np.concatenate([phi, x])
        key = z.tobytes() + np.asarray(px, dtype=float).tobytes()
        if key == self._key:
            return self._grad
        _, g = ad.value_and_grad(lambda v: self._potential(v[: self.d1], v[self.d1 :], px), z, tape=self.tape)
        if not np.all(np.isfinite(g)):
            raise DivergentEvaluation("non-finite gradient")
        self._key, self._grad = key, (g[: self.d1], g[self.d1 :])
        return self._grad


def _phi_leapfrog(t, phi, x, pphi, px, eps, n):
    for _ in range(n):
        pphi = pphi - 0.5 * eps * t.grad(phi, x, px)[0]
        phi = phi + eps * np.asarray(t.g1.solve(pphi), dtype=float)
        pphi = pphi - 0.5 * eps * t.grad(phi, x, px)[0]
    return phi, pphi


def _x_leapfrog(t, phi, x, px, eps, n):
    if n == 0:
        return x, px
    f = t.g2(phi)
    for _ in range(n):
        # G_2 does not depend on x, so the x-gradient of the potential is -grad log pi
        px = px - 0.5 * eps * t.grad(phi, x, px)[1]
        x = x + eps * np.asarray(f.solve(px), dtype=float)
        px = px - 0.5 * eps * t.grad(phi, x, px)[1]
    return x, px


def abla_step(t: SemiSeparableTarget, phi, x, pphi, px, cfg: SshmcConfig):
    phi, pphi = _phi_leapfrog(t, phi, x, pphi, px, cfg.phi_step, cfg.phi_steps)
    x, px = _x_leapfrog(t, phi, x, px, cfg.x_step, cfg.x_steps)
    phi, pphi = _phi_leapfrog(t, phi, x, pphi, px, cfg.phi_step, cfg.phi_steps)
    return phi, x, pphi, px


def sshmc_transition(t: SemiSeparableTarget, q, cfg: SshmcConfig, rng):
    phi, x = q[: t.d1], q[t.d1 :]
    pphi = np.asarray(t.g1.mul_L(rng.standard_normal(t.d1)), dtype=float)
    px = np.asarray(t.g2(phi).mul_L(rng.standard_normal(t.d2)), dtype=float)
    h0 = t.hamiltonian(phi, x, pphi, px)
    u = rng.uniform()
    n_steps = cfg.n_abla * (2 * cfg.phi_steps + cfg.x_steps)
    try:
        p1, x1, pp1, px1 = phi, x, pphi, px
        for _ in range(cfg.n_abla):
            p1, x1, pp1, px1 = abla_step(t, p1, x1, pp1, px1, cfg)
        err = t.hamiltonian(p1, x1, pp1, px1) - h0
        divergent = not math.isfinite(err) or err > DIVERGENCE_ENERGY
    except DivergentEvaluation:
        err, divergent = math.inf, True
    if divergent:
        return q, TransitionDiag(0.0, True, n_steps, err, cfg.phi_step)
    a = 1.0 if err <= 0 else math.exp(-err)
    if u < a:
        return np.concatenate([p1, x1]), TransitionDiag(a, False, n_steps, err, cfg.phi_step)
    return q, TransitionDiag(a, False, n_steps, err, cfg.phi_step)


def run_sshmc(model, config: SshmcConfig, seed=0, chain=0, q0=None, progress=None):
    t = SemiSeparableTarget(model)
    rng = chain_rng(seed, chain)
    t_start = time.thread_time()
    q = np.zeros(t.dim) if q0 is None else np.asarray(q0, dtype=float).copy()
    try:
        t.hamiltonian(q[: t.d1], q[t.d1 :], np.zeros(t.d1), np.zeros(t.d2))
    except DivergentEvaluation as e:
        raise RunAborted(f"initial point not evaluable: {e}") from e
    rec = Recorder(config.iters, t.dim, config.max_divergence_rate, chain)
    warm_div = 0
    for it in range(config.warmup + config.iters):
        q, d = sshmc_transition(t, q, config, rng)
        if it < config.warmup:
            warm_div += d.divergent
            continue
        rec.record(q, q, d, progress)
        if rec.too_many():
            rec.abort(config.phi_step, t_start, warm_div, None, config.max_divergence_rate)
    return rec.finish(config.phi_step, t_start, warm_div)
