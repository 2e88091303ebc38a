import math

import numpy as np
import pytest
from scipy import stats as sps

from erwlab.branching import (InsufficientData, LifetimeBatch, RangeBeyondCensoring, fit_tail,
                              renewal_times, sample_hits_dual, sample_lifetime, sample_lifetimes,
                              v_path, v_paths, v_step, v_step_batch, verify_dual)
from erwlab.cookie_env import DELTA_HALF, DELTA_ONE, FAIR, MIXED_SIGNS, CookieLaw, CookieStack
from erwlab.rng import SeedSpec, uniforms
from erwlab.stats import ks_two_sample
from erwlab.walk import simulate_batch

TWO_ATOMS = CookieLaw(2, (CookieStack((0.9, 0.3)), CookieStack((0.2, 0.6))), (0.4, 0.6))


def failures_pmf(law, m, kmax):
    """Exact P(failures before the (m+1)-th success = k), k <= kmax, by
    dynamic programming over (successes, failures)."""
    out = np.zeros(kmax + 1)
    need = m + 1
    for stack, w in zip(law.stacks, law.weights):
        # prob[s][f]: s successes and f failures seen, still running
        prob = np.zeros((need, kmax + 1))
        prob[0, 0] = 1.0
        for trial in range(need + kmax):
            p = stack.probs[trial] if trial < law.M else 0.5
            new = np.zeros_like(prob)
            for s in range(need):
                f = trial - s
                if not 0 <= f <= kmax:
                    continue
                q = prob[s, f]
                if q == 0:
                    continue
                if s + 1 == need:
                    out[f] += w * q * p
                else:
                    new[s + 1, f] += q * p
                if f + 1 <= kmax:
                    new[s, f + 1] += q * (1 - p)
            prob = new
    return out


def test_fair_generation_is_geometric():
    x = v_step_batch(0, FAIR, 1, np.arange(1_000_000))
    freq = np.bincount(x, minlength=11)[:11] / x.size
    p = 0.5 ** (np.arange(11) + 1)
    assert np.all(np.abs(freq - p) <= 4 * np.sqrt(p * (1 - p) / x.size))


def test_sure_cookie_generation():
    law = CookieLaw.single(1.0)
    assert all(v_step(0, law, SeedSpec(s)) == 0 for s in range(100))


def test_boundary_law_first_trial():
    x = v_step_batch(0, DELTA_ONE, 2, np.arange(400_000))
    assert abs(np.mean(x == 0) - 0.75) <= 4 * math.sqrt(0.75 * 0.25 / x.size)


@pytest.mark.parametrize("law, m", [(MIXED_SIGNS, 0), (MIXED_SIGNS, 2), (TWO_ATOMS, 1),
                                    (DELTA_HALF, 5)])
def test_generation_matches_exact_pmf(law, m):
    runs = 300_000
    x = v_step_batch(m, law, 3 + m, np.arange(runs))
    exact = failures_pmf(law, m, 25)
    freq = np.bincount(x, minlength=26)[:26] / runs
    se = np.sqrt(exact * (1 - exact) / runs) + 1e-9
    assert np.all(np.abs(freq - exact) <= 4 * se)


def test_large_generation_mean():
    # NB tail for large m: mean failures = m + 1 plus the cookie correction
    law = DELTA_HALF
    m = 400
    x = v_step_batch(m, law, 4, np.arange(100_000))
    # with M cookies used first, E[failures] = (m + 1) - delta
    assert abs(x.mean() - (m + 1 - 0.5)) <= 4 * x.std() / math.sqrt(x.size)


def test_v_step_pure():
    s = SeedSpec(5, 2)
    assert v_step(3, MIXED_SIGNS, s, 7) == v_step(3, MIXED_SIGNS, s, 7)


def test_v_path_start_and_sign():
    p = v_path(DELTA_HALF, SeedSpec(1), 50)
    assert p[0] == 0 and np.all(p >= 0)
    assert np.array_equal(v_paths(DELTA_HALF, 1, [0], 50)[0], p)


def test_lifetime_immediate_return():
    for s in range(200):
        seed = SeedSpec(8, s)
        lt = sample_lifetime(FAIR, seed, 10**6)
        if v_step(0, FAIR, seed) == 0:
            assert (lt.sigma, lt.total, lt.censored) == (1, 0, False)
        else:
            assert lt.sigma > 1 and lt.total > 0


def test_fair_lifetime_one_with_prob_half():
    b = sample_lifetimes(FAIR, 2, 200_000, 10)
    assert abs(np.mean(b.sigma == 1) - 0.5) <= 4 * math.sqrt(0.25 / 200_000)


def test_lifetime_censoring_is_explicit():
    b = sample_lifetimes(DELTA_HALF, 3, 20_000, 50)
    assert b.censored.any()
    assert np.all(b.sigma[b.censored] == 51)
    assert np.all(b.sigma[~b.censored] <= 50)
    assert np.all(b.sigma >= 1) and np.all(b.total >= 0)
    assert np.all((b.total == 0) == (b.sigma == 1))


def test_lifetime_batch_matches_single(tmp_path):
    b = sample_lifetimes(MIXED_SIGNS, 4, 50, 1000, first_stream=10)
    for i in range(50):
        assert b[i] == sample_lifetime(MIXED_SIGNS, SeedSpec(4, 10 + i), 1000)
    b.to_csv(tmp_path / "x.csv")
    assert np.loadtxt(tmp_path / "x.csv", delimiter=",", skiprows=1).shape == (50, 3)


def test_successive_lifetimes_uncorrelated():
    r = renewal_times(DELTA_ONE, 6, np.arange(20_000), 3, 10**6)
    ok = np.all(r > 0, axis=1)
    gaps = np.diff(np.concatenate([np.zeros((len(r), 1), np.int64), r], axis=1), axis=1)[ok]
    rho = sps.spearmanr(gaps[:, 0], gaps[:, 1]).statistic
    assert abs(rho) <= 4 / math.sqrt(ok.sum())


def test_boundary_lifetime_normalisation_stabilises():
    r = renewal_times(DELTA_ONE, 7, np.arange(400), 10_000, 10**8)
    assert np.all(r[:, -1] > 0)
    med = [np.median(r[:, m - 1] / (m * math.log(m))) for m in (1_000, 10_000)]
    assert abs(med[1] / med[0] - 1) < 0.25


# tail fits

def test_pareto_calibration():
    t = 1.0 / (1.0 - uniforms(1, 0, 99, 1_000_000))
    f = fit_tail(t)
    assert abs(f.exponent - 1.0) <= 0.05
    assert abs(f.hill - 1.0) <= 0.05
    assert f.to_dict()["estimator"] == "ols_log_survival"


def test_fit_tail_needs_data():
    with pytest.raises(InsufficientData):
        fit_tail(np.arange(1, 100, dtype=float))


def test_fit_tail_range_beyond_censoring():
    b = LifetimeBatch(np.array([5] * 20_000 + [500]), np.zeros(20_001, np.int64),
                      np.array([False] * 20_000 + [True]))
    with pytest.raises(RangeBeyondCensoring):
        fit_tail(b, fit_range=(10, 1000))


def test_fit_tail_counts_censored_as_exceeding():
    rng_vals = 1.0 / (1.0 - uniforms(2, 0, 99, 200_000))
    cens = rng_vals > 5e4
    vals = np.where(cens, 5e4 + 1, rng_vals)
    b = LifetimeBatch(vals, np.zeros_like(vals), cens)
    f = fit_tail(b, fit_range=(10, 1e4))
    assert abs(f.exponent - 1) <= 0.05


# duality

def test_dual_single_level_fair_geometric():
    r = verify_dual(FAIR, 1, 50_000, master=1, cap=10**6)
    assert r.excess <= 0.01
    assert r.mean_branch[0] == pytest.approx(1.0, abs=0.05)
    assert r.mean_walk[0] == pytest.approx(1.0, abs=0.05)


@pytest.mark.parametrize("law", [FAIR, DELTA_HALF, DELTA_ONE, MIXED_SIGNS])
@pytest.mark.parametrize("n", [1, 2, 3])
def test_duality_small_levels(law, n):
    r = verify_dual(law, n, 40_000, master=n, cap=10**6)
    assert r.excess <= 0.015
    assert np.all(np.abs(r.mean_z) <= 4)


def test_dual_hitting_time_matches_walk():
    n = 20
    cap = 10**8
    walk = simulate_batch(DELTA_HALF, 9, np.arange(20_000), cap, target=n, eat=(0, n - 1))
    dual = sample_hits_dual(DELTA_HALF, 9, np.arange(20_000), n)
    assert walk.hit.mean() > 0.99 and np.all(dual.hitting_time > 0)
    # hitting times are heavy tailed; compare both censored at the walk's cap
    t_walk = np.where(walk.hit, walk.steps, cap + 1)
    assert ks_two_sample(t_walk, np.minimum(dual.hitting_time, cap + 1)).pvalue > 0.001
    assert ks_two_sample(walk.eat[walk.hit], dual.eat[dual.hitting_time <= cap]).pvalue > 0.001
    assert np.all((dual.hitting_time - n) % 2 == 0)
