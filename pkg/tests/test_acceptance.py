"""Acceptance criteria.

Each test is named ``test_c<k>_...`` and the conftest hooks fold all tests of
one criterion into a single PASS/FAIL line in the terminal summary.
"""
import math
import time

import numpy as np
import pytest
from scipy import stats

from pcscs import bounds
from pcscs.channel import ChannelParams
from pcscs.optimizer import optimize_point, rate_distance_curve
from pcscs.security import (ProtocolParams, Tallies, finite_key_rate, key_rate_asymptotic,
                            p_oo_upper, phase_error_bound)
from pcscs.simulator import SimConfig, simulate, z_scores

CRITERIA = {
    "c1": "300 km (60 dB) finite-key rate at N=1e13 is positive, < 1 min",
    "c2": "rate curves ordered R_inf >= R_1e14 >= R_1e13 and monotone over 0-80 dB, < 10 min",
    "c3": "asymptotic rate zero everywhere at e_mis=0.10, positive at low loss for e_mis=0.015",
    "c4": "Chernoff exact-tail and Kato U_e empirical failure rates within eps",
    "c5": "Kato inverse forms reduce to the Hoeffding deviation at n/2 to 1e-9 relative",
    "c6": "Monte Carlo z-scores within +-5 at 10/20/30 dB with 1e8 windows, deterministic",
    "c7": "finite-key rate at N=1e20 within 5% of the asymptotic rate",
    "c8": "every bound returns its argument at eps=1; phase-error bound reduces to bare terms",
}

REFERENCE = ChannelParams(loss_db=0.0, dark_rate=5e-11, det_eff=0.3, e_mis=0.015)
LOSS_GRID = np.arange(0.0, 80.0 + 1e-9, 2.0)


def test_c1_300km_positive():
    t0 = time.perf_counter()
    opt = optimize_point(ChannelParams.from_distance(300.0), n_windows=1e13)
    elapsed = time.perf_counter() - t0
    assert opt.result.rate > 0
    assert elapsed < 60


@pytest.fixture(scope="module")
def curves():
    t0 = time.perf_counter()
    out = {
        1e13: rate_distance_curve(REFERENCE, LOSS_GRID, n_windows=1e13),
        1e14: rate_distance_curve(REFERENCE, LOSS_GRID, n_windows=1e14),
        math.inf: rate_distance_curve(REFERENCE, LOSS_GRID, mode="asymptotic"),
    }
    return out, time.perf_counter() - t0


def test_c2_curve_ordering(curves):
    out, elapsed = curves
    r13, r14, rinf = (np.array([pt.rate for pt in out[k]]) for k in (1e13, 1e14, math.inf))
    assert np.all(rinf >= r14)
    assert np.all(r14 >= r13)
    assert elapsed < 600


@pytest.mark.parametrize("n", [1e13, 1e14, math.inf])
def test_c2_curve_monotone(curves, n):
    rates = np.array([pt.rate for pt in curves[0][n]])
    # grid tolerance: the optimizer's refined argmax may wobble at the 1e-9 level
    assert np.all(rates[1:] <= rates[:-1] * (1 + 1e-9))
    assert rates[0] > 0 and rates[-1] == 0


def test_c3_misalignment_cutoff():
    bad = ChannelParams(e_mis=0.10)
    for loss in LOSS_GRID:
        assert optimize_point(bad.with_loss(loss), mode="asymptotic").rate == 0.0
    for loss in (0.0, 10.0, 20.0):
        assert optimize_point(REFERENCE.with_loss(loss), mode="asymptotic").rate > 0


CHERNOFF_GRID = [(n, p, eps) for n in (10, 100, 1000, 10_000, 100_000)
                 for p in (1e-4, 1e-3, 0.01, 0.1, 0.5) for eps in (0.1, 1e-3, 1e-6, 1e-10)]


def test_c4_chernoff_exact_tail():
    worst = 0.0
    for n, p, eps in CHERNOFF_GRID:
        cu = bounds.chernoff_upper(n * p, eps)
        tail = stats.binom.sf(math.floor(cu), n, p)
        assert tail <= eps, (n, p, eps, cu, tail)
        worst = max(worst, tail / eps)
    assert worst <= 1


@pytest.mark.parametrize("eps", [0.1, 0.01])
@pytest.mark.parametrize("n, p", [(200, 0.5), (1000, 0.05), (5000, 0.002)])
def test_c4_kato_empirical_failure(eps, n, p):
    trials = 1_000_000
    rng = np.random.default_rng(20_240_601)
    # a sum of n i.i.d. Bernoulli(p) indicators
    lam = rng.binomial(n, p, size=trials).astype(float)
    upper = bounds.kato_upper_expectation(lam, n, eps)
    freq = np.mean(n * p > upper)
    se = math.sqrt(eps * (1 - eps) / trials)
    assert freq <= eps + 3 * se


FORMS = {
    "U_e": lambda x, n, e: bounds.kato_upper_expectation(x, n, e) - x,
    "L_e": lambda x, n, e: x - bounds.kato_lower_expectation(x, n, e),
    "U_m": lambda x, n, e: bounds.kato_upper_observation(x, n, e) - x,
    "L_m": lambda x, n, e: x - bounds.kato_lower_observation(x, n, e),
}


@pytest.mark.parametrize("eps", [1e-10, 1e-6])
@pytest.mark.parametrize("n", [1e4, 1e8, 1e12])
@pytest.mark.parametrize("form", list(FORMS))
def test_c5_hoeffding_reduction(form, n, eps):
    hoeffding = math.sqrt(n * math.log(1 / eps) / 2)
    dev = FORMS[form](n / 2, n, eps)
    assert abs(dev / hoeffding - 1) <= 1e-9


@pytest.fixture(scope="module")
def mc_runs():
    out = {}
    for loss in (10.0, 20.0, 30.0):
        n = 100_000_000
        cfg = SimConfig(n, ProtocolParams(0.05, 0.1, n), REFERENCE.with_loss(loss), seed=42)
        out[loss] = (cfg, simulate(cfg, workers=4))
    return out


@pytest.mark.parametrize("loss", [10.0, 20.0, 30.0])
def test_c6_monte_carlo_agreement(mc_runs, loss):
    cfg, st = mc_runs[loss]
    assert st.n_windows == 100_000_000
    zs = z_scores(st, cfg)
    assert set(zs) == {"clicks", "est_bit_errors", "sig_bit_errors"}
    for name, z in zs.items():
        assert abs(z) <= 5, (loss, name, z)


def test_c6_deterministic(mc_runs):
    cfg, st = mc_runs[20.0]
    # rerun a prefix serially with a different batch layout
    head = SimConfig(3_000_000, cfg.protocol, cfg.channel, seed=cfg.seed, batch_size=123_457)
    assert simulate(head) == simulate(head, workers=3)
    assert simulate(head) != simulate(SimConfig(3_000_000, cfg.protocol, cfg.channel, seed=43))


def test_c7_asymptotic_convergence():
    ch = REFERENCE.with_loss(20.0)
    mu, p_est = 0.002, 1e-3
    fin = finite_key_rate(mu, p_est, ch, 1e20).rate
    asy = key_rate_asymptotic(mu, ch).rate
    assert asy > 0
    assert abs(fin - asy) <= 0.05 * asy


def test_c8_eps_collapse():
    rng = np.random.default_rng(8)
    for n in (1.0, 17.0, 1e6, 1e13):
        xs = np.concatenate([[0.0, n / 2, n], rng.uniform(0, n, 50)])
        for fn in (bounds.kato_upper_expectation, bounds.kato_lower_expectation,
                   bounds.kato_upper_observation, bounds.kato_lower_observation):
            np.testing.assert_array_equal(fn(xs, n, 1.0), xs)
            for x in xs[:5]:
                assert fn(float(x), n, 1.0) == float(x)
    mus = np.concatenate([[0.0], rng.uniform(0, 1e9, 50)])
    np.testing.assert_array_equal(bounds.chernoff_upper(mus, 1.0), mus)

    p = ProtocolParams(mu=0.08, p_est=0.2, n_windows=1e11)
    t = Tallies(n_sig=1e8, n_est_bit=5e4)
    cert = phase_error_bound(t, p, eps=1.0)
    c0 = 1e11 * 0.8 * p_oo_upper(0.08)
    q = 0.8 / 0.2
    bare = (2 * q * 5e4, 2 * math.sqrt(2) * math.sqrt(q) * math.sqrt(5e4 * c0), 2 * c0)
    assert (cert.term_bit, cert.term_cross, cert.term_oo) == pytest.approx(bare, rel=1e-15)
    assert cert.n_ph_bar == pytest.approx(sum(bare), rel=1e-15)
