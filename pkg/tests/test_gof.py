import numpy as np
import pytest

from tailbin import BinnedSample, BinScheme, ParetoParams, fit, fit_pareto_ols, fit_zipf, fixture, truncate
from tailbin.binned_data import CEMPRE_BOUNDARIES
from tailbin.distributions import bin_probs
from tailbin.gof import GofError, gof_pvalue, ks_distance, synthetic_counts
from tailbin.numerics import RngStream, multinomial_sample

from .conftest import ref_bin_probs, ref_empirical_sf, synthetic_sample


def test_ks_zero_for_exact_fit():
    b = [20, 30, 50, 100, 250, 500]
    probs = ref_bin_probs(lambda s: (20 / s) ** 1.5, b)
    t = truncate(BinnedSample(BinScheme(tuple(b)), tuple(round(p * 10**12) for p in probs)), 20)
    assert ks_distance(fit_pareto_ols(t), t) == pytest.approx(0.0, abs=1e-9)


def test_ks_single_comparison_point():
    t = truncate(BinnedSample(BinScheme((20, 40)), (6, 4)), 20)
    assert ks_distance(fit_zipf(t), t) == pytest.approx(0.1, abs=1e-15)


def test_ks_zipf_all1996(t20):
    emp = ref_empirical_sf(t20.counts.tolist())
    expected = max(abs(e - 20 / b) for e, b in zip(emp, [20, 30, 50, 100, 250, 500]))
    assert ks_distance(fit_zipf(t20), t20) == pytest.approx(expected, abs=1e-15)
    assert expected == pytest.approx(0.015617369497789219, abs=1e-15)


def test_ks_smin_mismatch(t20, all1996):
    with pytest.raises(ValueError):
        ks_distance(fit_zipf(truncate(all1996, 30)), t20)


def test_replicate_r_uses_stream_r():
    probs = [0.4, 0.3, 0.2, 0.1]
    H = synthetic_counts(probs, 500, 10, seed=11)
    for r in (0, 3, 9):
        assert H[r].tolist() == multinomial_sample(RngStream(11, r), 500, probs).tolist()
    assert synthetic_counts(probs, 500, 4, seed=11).tolist() == H[:4].tolist()


def test_gof_reproducible(t20):
    a = gof_pvalue("pareto", "mle", t20, 300, seed=5)
    b = gof_pvalue("pareto", "mle", t20, 300, seed=5)
    assert a == b
    assert a.replicates == 300 and a.seed == 5
    assert 0.0 <= a.p_value <= 1.0
    assert 0.0 <= a.d_star <= 1.0


def test_gof_pvalue_is_fraction_of_replicates(t20):
    rep = gof_pvalue("zipf", "fixed", t20, 400, seed=3)
    assert rep.p_value * rep.replicates == pytest.approx(round(rep.p_value * rep.replicates))


def test_gof_two_bin_refit_is_exact():
    # with two bins the Pareto MLE reproduces the empirical survival, so every D is 0
    t = truncate(BinnedSample(BinScheme((20, 40)), (700, 300)), 20)
    rep = gof_pvalue("pareto", "mle", t, 200, seed=1)
    assert rep.d_star == pytest.approx(0.0, abs=1e-9)
    assert rep.p_value == 1.0


def test_gof_bad_replicates(t20):
    with pytest.raises(ValueError):
        gof_pvalue("zipf", "fixed", t20, 0)


def test_gof_aborts_on_many_failed_refits():
    # n = 3 with a steep tail: many synthetic samples put everything in the first bin
    t = truncate(BinnedSample(BinScheme((20, 30, 50)), (2, 1, 0)), 20)
    with pytest.raises(GofError):
        gof_pvalue("pareto", "mle", t, 200, seed=0)


def test_gof_seed_stability():
    t = truncate(fixture("agriculture", 1996), 50)
    a = gof_pvalue("pareto", "mle", t, 10_000, seed=1).p_value
    b = gof_pvalue("pareto", "mle", t, 10_000, seed=2).p_value
    assert 0.05 < a < 0.95
    assert abs(a - b) < 0.02


def test_gof_calibrated_under_zipf():
    probs = bin_probs(ParetoParams(1.0, 20), [20, 30, 50, 100, 250, 500])
    pvals = []
    for seed in range(20):
        t = synthetic_sample(probs, 20, seed=10_000 + seed, n=10_000)
        pvals.append(gof_pvalue("zipf", "fixed", t, 500, seed=seed).p_value)
    assert 0.2 <= np.median(pvals) <= 0.8


def test_gof_lognormal_and_ols_run(t20):
    for family, estimator in (("lognormal", "mle"), ("pareto", "ols")):
        rep = gof_pvalue(family, estimator, t20, 200, seed=4, fit_result=fit(t20, family, estimator))
        assert rep.excluded == 0
        assert rep.family == family
