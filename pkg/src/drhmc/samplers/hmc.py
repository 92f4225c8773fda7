"""Leapfrog HMC with jittered path length and dual-averaging step size."""
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ConfigError, DivergentEvaluation, RunAborted

# energy error beyond which a trajectory counts as divergent
DIVERGENCE_ENERGY = 1000.0


@dataclass
class HmcConfig:
    """Tuning of the HMC sampler.

    ``step_size`` is the initial step size (``None``: found by the doubling
    heuristic) and is adapted during warmup when ``adapt_step`` is set.
    The path length is drawn uniformly from ``{L_min, ..., L_max}``.
    """

    step_size: Optional[float] = None
    L_min: int = 1
    L_max: int = 10
    inv_mass: Optional[np.ndarray] = None
    target_accept: float = 0.8
    warmup: int = 1000
    iters: int = 1000
    adapt_step: bool = True
    adapt_mass: bool = False
    max_divergence_rate: Optional[float] = None

    def __post_init__(self):
        if self.L_min < 1 or self.L_max < self.L_min:
            raise ConfigError("need 1 <= L_min <= L_max")
        if self.step_size is not None and not self.step_size > 0:
            raise ConfigError("step size must be positive")
        if not 0.0 < self.target_accept < 1.0:
            raise ConfigError("target acceptance must lie in (0, 1)")
        if self.warmup < 0 or self.iters < 1:
            raise ConfigError("need warmup >= 0 and iters >= 1")
        if self.inv_mass is not None and not np.all(np.asarray(self.inv_mass) > 0):
            raise ConfigError("mass matrix entries must be positive")


@dataclass
class TransitionDiag:
    accept_prob: float
    divergent: bool
    n_steps: int
    energy_error: float
    step_size: float


@dataclass
class ChainState:
    x: np.ndarray
    logp: float
    grad: np.ndarray


# ---------------------------------------------------------------- leapfrog
def leapfrog_step(x, p, grad, eps, inv_mass, target):
    """One Stormer-Verlet step; returns (x', p', logp', grad').

    ``grad`` is the log-density gradient at ``x``.  Raises
    :class:`DivergentEvaluation` if the target cannot be evaluated.
    """
    p = p + 0.5 * eps * grad
    x = x + eps * inv_mass * p
    logp, grad = target.value_and_grad(x)
    p = p + 0.5 * eps * grad
    return x, p, logp, grad


def integrate(state, p, eps, n_steps, inv_mass, target):
    x, g = state.x, state.grad
    logp = state.logp
    for _ in range(n_steps):
        x, p, logp, g = leapfrog_step(x, p, g, eps, inv_mass, target)
    return ChainState(x, logp, g), p


def kinetic(p, inv_mass):
    return 0.5 * float(np.dot(p, inv_mass * p))


def hmc_transition(state, eps, n_steps, inv_mass, target, rng):
    """One Metropolis-corrected HMC transition; rejection returns ``state`` itself."""
    p0 = rng.standard_normal(state.x.shape) / np.sqrt(inv_mass)
    h0 = -state.logp + kinetic(p0, inv_mass)
    u = rng.uniform()
    try:
        new, p1 = integrate(state, p0, eps, n_steps, inv_mass, target)
        h1 = -new.logp + kinetic(p1, inv_mass)
        err = h1 - h0
        divergent = not math.isfinite(err) or err > DIVERGENCE_ENERGY
    except DivergentEvaluation:
        err, divergent = math.inf, True
    if divergent:
        return state, TransitionDiag(0.0, True, n_steps, err, eps)
    a = 1.0 if err <= 0 else math.exp(-err)
    if u < a:
        return new, TransitionDiag(a, False, n_steps, err, eps)
    return state, TransitionDiag(a, False, n_steps, err, eps)


# ----------------------------------------------------------- dual averaging
@dataclass
class DualAveraging:
    """Nesterov dual averaging of log step size towards a target acceptance."""

    mu: float
    delta: float = 0.8
    gamma: float = 0.05
    t0: float = 10.0
    kappa: float = 0.75
    t: int = 0
    h_bar: float = 0.0
    log_eps: float = 0.0
    log_eps_bar: float = 0.0

    @classmethod
    def start(cls, eps0, delta=0.8):
        return cls(mu=math.log(10.0 * eps0), delta=delta, log_eps=math.log(eps0))

    def update(self, accept_prob):
        self.t += 1
        eta = 1.0 / (self.t + self.t0)
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (self.delta - accept_prob)
        self.log_eps = self.mu - math.sqrt(self.t) / self.gamma * self.h_bar
        w = self.t ** (-self.kappa)
        self.log_eps_bar = w * self.log_eps + (1.0 - w) * self.log_eps_bar
        return math.exp(self.log_eps)

    @property
    def final(self):
        return math.exp(self.log_eps_bar)


def _accept_one(state, eps, inv_mass, target, rng):
    p = rng.standard_normal(state.x.shape) / np.sqrt(inv_mass)
    h0 = -state.logp + kinetic(p, inv_mass)
    try:
        new, p1 = integrate(state, p, eps, 1, inv_mass, target)
        err = -new.logp + kinetic(p1, inv_mass) - h0
    except DivergentEvaluation:
        return 0.0
    if not math.isfinite(err):
        return 0.0
    return 1.0 if err <= 0 else math.exp(-err)


def find_initial_step(state, inv_mass, target, rng, eps=1.0, max_doublings=60):
    """Double or halve ``eps`` until one-step acceptance crosses 1/2."""
    a = _accept_one(state, eps, inv_mass, target, rng)
    direction = 1.0 if a > 0.5 else -1.0
    for _ in range(max_doublings):
        if direction > 0 and not a > 0.5:
            break
        if direction < 0 and not a <= 0.5:
            break
        eps = eps * 2.0**direction
        a = _accept_one(state, eps, inv_mass, target, rng)
    # the last change crossed the threshold; step back when doubling overshot
    return eps / 2.0 if direction > 0 else eps


# ------------------------------------------------------------------- chain
@dataclass
class RawChain:
    """Per-iteration output of one chain (warmup excluded from the draw arrays)."""

    q: np.ndarray
    qbar: np.ndarray
    accept_prob: np.ndarray
    divergent: np.ndarray
    n_steps: np.ndarray
    energy_error: np.ndarray
    step_size: float
    seconds: float
    warmup_divergences: int = 0
    aborted: bool = False
    inv_mass: Optional[np.ndarray] = None
    extra: dict = field(default_factory=dict)


def chain_rng(seed, chain):
    """Independent stream per (seed, chain) pair."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(chain)]))


def _mass_window(warmup):
    """Warmup iterations used for the diagonal mass estimate."""
    return int(0.5 * warmup), int(0.85 * warmup)


class Recorder:
    """Collects post-warmup draws and enforces the divergence bound."""

    def __init__(self, n, dim, max_divergence_rate, chain):
        self.i = 0
        self.q = np.empty((n, dim))
        self.qbar = np.empty((n, dim))
        self.acc = np.empty(n)
        self.div = np.zeros(n, dtype=bool)
        self.steps = np.empty(n, dtype=np.int64)
        self.err = np.empty(n)
        self.n_div = 0
        self.limit = None if max_divergence_rate is None else max_divergence_rate * n
        self.chain = chain

    def record(self, qbar, q, d, progress=None):
        i = self.i
        self.qbar[i] = qbar
        self.q[i] = q
        self.acc[i] = d.accept_prob
        self.div[i] = d.divergent
        self.steps[i] = d.n_steps
        self.err[i] = d.energy_error
        self.n_div += d.divergent
        self.i += 1
        if progress is not None:
            progress(i)

    def too_many(self):
        return self.limit is not None and self.n_div > self.limit

    def finish(self, eps, t_start, warm_div, inv_mass=None, aborted=False):
        k = self.i
        return RawChain(
            self.q[:k], self.qbar[:k], self.acc[:k], self.div[:k], self.steps[:k], self.err[:k],
            eps, time.thread_time() - t_start, warm_div, aborted, inv_mass,
        )

    def abort(self, eps, t_start, warm_div, inv_mass, rate):
        err = RunAborted(f"divergence rate above {rate} in chain {self.chain}")
        err.chain = self.finish(eps, t_start, warm_div, inv_mass, aborted=True)
        raise err


def pick_path_length(rng, L_min, L_max):
    if L_min == L_max:
        return L_min
    return int(rng.integers(L_min, L_max + 1))


def initial_point(target, x0):
    if x0 is None:
        return np.zeros(target.dim)
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (target.dim,):
        raise ConfigError(f"initial point has shape {x.shape}, expected ({target.dim},)")
    return x


def run_hmc(target, config: HmcConfig, seed=0, chain=0, x0=None, progress=None):
    """Warmup plus sampling on ``target``; returns a :class:`RawChain`.

    Raises :class:`RunAborted` (with the partial chain in ``.chain``) when
    the post-warmup divergence count exceeds ``max_divergence_rate``.
    """
    rng = chain_rng(seed, chain)
    t_start = time.thread_time()
    x = initial_point(target, x0)
    try:
        logp, g = target.value_and_grad(x)
    except DivergentEvaluation as e:
        raise RunAborted(f"initial point not evaluable: {e}") from e
    state = ChainState(x, logp, g)
    inv_mass = np.ones(target.dim) if config.inv_mass is None else np.asarray(config.inv_mass, dtype=float).copy()

    eps = config.step_size
    if eps is None:
        eps = find_initial_step(state, inv_mass, target, rng)
    da = DualAveraging.start(eps, config.target_accept)
    w_lo, w_hi = _mass_window(config.warmup)
    window = []

    rec = Recorder(config.iters, target.dim, config.max_divergence_rate, chain)
    warm_div = 0
    iters = config.iters

    for it in range(config.warmup + iters):
        L = pick_path_length(rng, config.L_min, config.L_max)
        state, d = hmc_transition(state, eps, L, inv_mass, target, rng)
        if it < config.warmup:
            warm_div += d.divergent
            if config.adapt_step:
                eps = da.update(d.accept_prob)
            if config.adapt_mass and w_lo <= it < w_hi:
                window.append(state.x.copy())
            if config.adapt_mass and it == w_hi - 1 and len(window) > 10:
                var = np.var(np.asarray(window), axis=0)
                k = len(window)
                inv_mass = (k / (k + 5.0)) * var + 1e-3 * (5.0 / (k + 5.0))
                eps = find_initial_step(state, inv_mass, target, rng, eps)
                da = DualAveraging.start(eps, config.target_accept)
            if it == config.warmup - 1 and config.adapt_step:
                eps = da.final
            continue
        rec.record(state.x, target.constrain(state.x), d, progress)
        if rec.too_many():
            rec.abort(eps, t_start, warm_div, inv_mass, config.max_divergence_rate)
    return rec.finish(eps, t_start, warm_div, inv_mass)
