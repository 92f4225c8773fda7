"""Samplers and the multi-chain driver."""
import numpy as np

from ..diagnostics import ChainOutput
from ..errors import ConfigError, RunAborted
from ..models.base import METHODS, make_target
from .hmc import (
    DIVERGENCE_ENERGY,
    ChainState,
    DualAveraging,
    HmcConfig,
    RawChain,
    TransitionDiag,
    chain_rng,
    find_initial_step,
    hmc_transition,
    leapfrog_step,
    run_hmc,
)
from .rmhmc import RiemannTarget, RmhmcConfig, glf_step, glf_step_implicit, rmhmc_transition, run_rmhmc
from .sshmc import SemiSeparableTarget, SshmcConfig, abla_step, run_sshmc, sshmc_transition

__all__ = [
    "DIVERGENCE_ENERGY",
    "ChainState",
    "DualAveraging",
    "HmcConfig",
    "RawChain",
    "TransitionDiag",
    "chain_rng",
    "find_initial_step",
    "hmc_transition",
    "leapfrog_step",
    "run_hmc",
    "RiemannTarget",
    "RmhmcConfig",
    "glf_step",
    "glf_step_implicit",
    "rmhmc_transition",
    "run_rmhmc",
    "SemiSeparableTarget",
    "SshmcConfig",
    "abla_step",
    "run_sshmc",
    "sshmc_transition",
    "default_config",
    "starting_point",
    "run_chain",
]

_CONFIG_TYPES = {"rmhmc": RmhmcConfig, "sshmc": SshmcConfig}


def default_config(method, **kw):
    """The configuration type ``method`` expects, with overrides ``kw``."""
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    return _CONFIG_TYPES.get(method, HmcConfig)(**kw)


def starting_point(model, h=None):
    """Original-coordinate start: the DRHMC origin qbar = 0, i.e. q at its locations."""
    return make_target(model, "drhmc", h).constrain(np.zeros(model.dim))


def _one_chain(model, method, config, seed, chain, h, q0):
    if method == "rmhmc":
        return run_rmhmc(model, config, seed, chain, q0)
    if method == "sshmc":
        return run_sshmc(model, config, seed, chain, q0)
    target = make_target(model, method, h)
    x0 = np.zeros(model.dim) if method == "drhmc" else target.inverse(q0)
    return run_hmc(target, config, seed, chain, x0)


def _one_chain_packed(args):
    return _one_chain(*args)


def run_chain(model, method, config=None, seed=0, chains=1, h=None, workers=1):
    """Run ``chains`` independent chains and collect them in a :class:`ChainOutput`.

    Every method starts from the same original-coordinate point (the
    DRHMC origin under the strategy ``h``).  Chains use private RNG streams
    keyed by ``(seed, chain)``, so the result does not depend on
    ``workers``.  If any chain exceeds the divergence bound the partial
    output is attached to the raised :class:`RunAborted` as ``.output``.
    """
    if config is None:
        config = default_config(method)
    want = _CONFIG_TYPES.get(method, HmcConfig)
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    if not isinstance(config, want):
        raise ConfigError(f"method {method} needs a {want.__name__}")
    if chains < 1:
        raise ConfigError("need at least one chain")
    if method in ("drhmc", "prior-std", "direct"):
        target = make_target(model, method, h)
        qbar_names = target.coordinate_names()
    else:
        if method == "sshmc":
            SemiSeparableTarget(model)  # validates the blocking up front
        target = None
        qbar_names = None
    q0 = starting_point(model, h)
    names = make_target(model, "direct").coordinate_names()
    qbar_names = qbar_names or names
    jobs = [(model, method, config, seed, c, h, q0) for c in range(chains)]

    results, failure = [], None
    if workers > 1 and chains > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=min(workers, chains)) as pool:
            futures = [pool.submit(_one_chain_packed, j) for j in jobs]
            for f in futures:
                try:
                    results.append(f.result())
                except RunAborted as e:
                    failure = failure or e
                    results.append(getattr(e, "chain", None))
    else:
        for j in jobs:
            try:
                results.append(_one_chain(*j))
            except RunAborted as e:
                failure = e
                results.append(getattr(e, "chain", None))
                break
    settings = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in vars(config).items()}
    out_chains = [r for r in results if r is not None]
    if failure is not None:
        # truncate to a common length so the partial output stays rectangular
        if out_chains:
            k = min(c.q.shape[0] for c in out_chains)
            out_chains = [_truncate(c, k) for c in out_chains]
        failure.output = ChainOutput(model.name, method, names, qbar_names, out_chains, h, settings)
        raise failure
    return ChainOutput(model.name, method, names, qbar_names, out_chains, h, settings)


def _truncate(c, k):
    return RawChain(
        c.q[:k], c.qbar[:k], c.accept_prob[:k], c.divergent[:k], c.n_steps[:k], c.energy_error[:k],
        c.step_size, c.seconds, c.warmup_divergences, True, c.inv_mass, c.extra,
    )
