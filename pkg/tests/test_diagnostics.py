import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drhmc.diagnostics import (
    ChainOutput,
    _split,
    _variograms,
    effective_sample_size,
    sd_mcse,
    summarize,
)
from drhmc.samplers import RawChain


def ar1_draws(rng, rho, chains, n):
    x = np.empty((chains, n))
    x[:, 0] = rng.normal(size=chains)
    e = rng.normal(size=(chains, n)) * math.sqrt(1 - rho * rho)
    for t in range(1, n):
        x[:, t] = rho * x[:, t - 1] + e[:, t]
    return x


def test_iid_draws(rng):
    n_eff = effective_sample_size(rng.normal(size=(10, 1000)))
    assert 8000 <= n_eff <= 10000


def test_antithetic_sequence_is_finite_and_at_least_nominal():
    x = np.tile(np.array([1.0, -1.0]), (2, 500)) + 1e-3 * np.random.default_rng(1).normal(size=(2, 1000))
    n_eff = effective_sample_size(x)
    assert np.isfinite(n_eff) and n_eff >= 2000


def test_ar1_matches_analytic_ess(rng):
    rho = 0.9
    x = ar1_draws(rng, rho, 4, 20000)
    expected = x.size * (1 - rho) / (1 + rho)
    assert effective_sample_size(x) == pytest.approx(expected, rel=0.2)


def test_variogram_matches_direct_sum(rng):
    x = rng.normal(size=(3, 40))
    v = _variograms(x)
    for t in (0, 1, 5, 39):
        direct = np.mean([np.mean((c[t:] - c[: len(c) - t]) ** 2) for c in x])
        assert v[t] == pytest.approx(direct, abs=1e-12)


def test_split_drops_middle_draw_of_odd_chain():
    s = _split(np.arange(9.0)[None, :])
    np.testing.assert_array_equal(s, [[0, 1, 2, 3], [5, 6, 7, 8]])


def test_constant_draws_are_degenerate():
    s = summarize(np.full((2, 50), 3.5))
    assert s.mean == 3.5 and s.sd == 0.0 and s.mcse == 0.0 and s.degenerate


def test_iid_summary_covers_truth(rng):
    d = rng.normal(3.0, 2.0, size=(4, 2500))
    s = summarize(d)
    assert abs(s.mean - 3.0) < 4 * s.mcse
    assert abs(s.sd - 2.0) < 4 * sd_mcse(d)


def test_pooled_mean_is_mean_of_chain_means(rng):
    d = rng.normal(size=(3, 200)) + np.arange(3)[:, None]
    assert summarize(d).mean == pytest.approx(d.mean(axis=1).mean(), rel=1e-14)


def test_too_few_draws():
    with pytest.raises(ValueError):
        effective_sample_size(np.zeros((1, 3)))


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    a=st.floats(0.01, 100.0) | st.floats(-100.0, -0.01),
    b=st.floats(-100.0, 100.0),
    rho=st.floats(-0.5, 0.95),
)
def test_ess_invariances_and_cap(seed, a, b, rho):
    x = ar1_draws(np.random.default_rng(seed), rho, 4, 200)
    base = effective_sample_size(x)
    assert base <= x.size
    assert effective_sample_size(a * x + b) == pytest.approx(base, rel=1e-6)
    assert effective_sample_size(x[::-1]) == pytest.approx(base, rel=1e-12)


def test_chain_output_requires_equal_shapes():
    def raw(n):
        z = np.zeros((n, 2))
        return RawChain(z, z, np.ones(n), np.zeros(n, bool), np.ones(n, int), np.zeros(n), 0.1, 1.0)

    with pytest.raises(ValueError):
        ChainOutput("m", "drhmc", ["a", "b"], ["a", "b"], [raw(5), raw(6)])
    out = ChainOutput("m", "drhmc", ["a", "b"], ["a", "b"], [raw(5), raw(5)])
    assert out.q.shape == (2, 5, 2) and out.divergences == 0 and out.seconds == 2.0
