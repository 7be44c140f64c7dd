import numpy as np
import pytest
from scipy import integrate, stats

from fptmc.model import DiffusionMatrix, FirmSpec, PortfolioSpec
from fptmc.stochastic import RngStream
from fptmc.unif import CASE_INTERIOR, CASE_JUMP, CASE_NONE, simulate, simulate_run

from conftest import a_rated_firm, first_passage_probability


def single_interval_portfolio(x0=1.0, mu=-0.05, sigma=0.3, T=2.0):
    # no jumps and a single interval spanning the horizon
    return PortfolioSpec((FirmSpec(x0, mu),), DiffusionMatrix([[sigma]]), 0.0, 1e9, T)


def test_acceptance_rate_matches_first_passage_law():
    port = single_interval_portfolio()
    ss = simulate(port, 100_000, seed=1)
    assert np.all(ss.counts == 0)
    p = first_passage_probability(1.0, -0.05, 0.3, 2.0)
    frac = ss.default_fraction()[0]
    assert abs(frac - p) <= 3 * np.sqrt(p * (1 - p) / ss.n_runs)


def test_weights_are_unbiased_for_mass_and_mean_time():
    a, mu, sig, T = 1.0, -0.05, 0.3, 2.0
    ss = simulate(single_interval_portfolio(a, mu, sig, T), 100_000, seed=2)
    w = ss.weight[:, 0]
    s = np.where(ss.case[:, 0] == CASE_NONE, 0.0, ss.default_time[:, 0])
    n = ss.n_runs

    def fpt_density(t):
        return a / (sig * np.sqrt(2 * np.pi * t ** 3)) * np.exp(-(a + mu * t) ** 2 / (2 * sig * sig * t))

    mass = first_passage_probability(a, mu, sig, T)
    mean_time, _ = integrate.quad(lambda t: t * fpt_density(t), 0, T)
    assert abs(w.mean() - mass) <= 3 * w.std() / np.sqrt(n)
    assert abs((w * s).mean() - mean_time) <= 3 * (w * s).std() / np.sqrt(n)


def test_deterministic_drift_never_defaults():
    port = PortfolioSpec((FirmSpec(2.0, -0.001),), DiffusionMatrix([[1e-9]]), 0.0, 1e9, 10.0)
    ss = simulate(port, 2000, seed=3)
    assert not np.any(ss.case != CASE_NONE)


def test_same_seed_same_samples(pair_aa):
    a = simulate(pair_aa, 3000, seed=9, block_size=700)
    b = simulate(pair_aa, 3000, seed=9, block_size=700)
    assert a.equals(b)
    c = simulate(pair_aa, 3000, seed=10, block_size=700)
    assert not c.equals(a)


def test_workers_do_not_change_output(pair_aa):
    a = simulate(pair_aa, 3000, seed=9, workers=1, block_size=700)
    b = simulate(pair_aa, 3000, seed=9, workers=3, block_size=700)
    assert a.equals(b)


def test_single_run_matches_batch(pair_aa):
    one = simulate_run(pair_aa, RngStream(42, 0))
    batch = simulate(pair_aa, 1, seed=42)
    ref = batch[0]
    assert one.samples == ref.samples
    assert np.array_equal(one.timeline.instants, ref.timeline.instants)
    assert np.array_equal(one.timeline.is_jump, ref.timeline.is_jump)


def test_sample_invariants(pair_aa):
    # higher jump intensity so that both default cases are well represented
    port = pair_aa.replace(lam=0.8)
    ss = simulate(port, 4000, seed=5)
    hit = ss.case != CASE_NONE
    assert np.all((ss.default_time[hit] > 0) & (ss.default_time[hit] <= port.horizon))
    assert np.all(np.isinf(ss.default_time[~hit])) and np.all(ss.weight[~hit] == 0)
    assert np.all(np.isfinite(ss.weight)) and np.all(ss.weight >= 0)
    assert np.all(ss.weight[ss.case == CASE_JUMP] == 1.0)
    assert (ss.case == CASE_JUMP).any() and (ss.case == CASE_INTERIOR).any()
    for r in np.flatnonzero(hit.any(axis=1))[:300]:
        out = ss[r]
        tl = out.timeline
        jump_times = tl.instants[1:-1][tl.is_jump]
        for smp in out.samples:
            if smp is None:
                continue
            if smp.case_tag == "jump_boundary":
                assert smp.time in jump_times
            else:
                assert smp.time not in tl.instants


def test_weighted_mass_agrees_with_default_indicator(single_a):
    ss = simulate(single_a, 100_000, seed=6)
    w = ss.weight[:, 0]
    ind = (ss.case[:, 0] != CASE_NONE).astype(float)
    assert abs(w.mean() - ind.mean()) <= 3 * (w - ind).std() / np.sqrt(ss.n_runs)


def test_uncorrelated_pair_keeps_single_firm_marginals(single_a):
    f = a_rated_firm(jump_mean=-0.6)
    sig = 0.2
    pair = PortfolioSpec((f, f), DiffusionMatrix([[sig, 0.0], [0.0, sig]]), 0.5, 1.0, 10.0, uniform_corr=0.0)
    single = PortfolioSpec((f,), DiffusionMatrix([[sig]]), 0.5, 1.0, 10.0)
    a = simulate(pair, 40_000, seed=7)
    b = simulate(single, 40_000, seed=8)
    ta, _ = a.samples(0)
    tb, _ = b.samples(0)
    assert stats.ks_2samp(ta, tb).pvalue > 0.01
    pa, pb = a.default_fraction()[0], b.default_fraction()[0]
    se = np.sqrt(pa * (1 - pa) / a.n_runs + pb * (1 - pb) / b.n_runs)
    assert abs(pa - pb) <= 3 * se


def test_zero_runs_rejected(single_a):
    with pytest.raises(ValueError):
        simulate(single_a, 0, seed=1)
