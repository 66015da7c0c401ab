import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from contsweep.distributions import (ClassConditionalModel, DistributionParams, Family, cdf, ecdf_ge,
                                     fit_normal_mle, fit_skew_normal_mle, loglik, pdf, quantile, read_model,
                                     sample, survival, write_model)
from contsweep.exceptions import InputError

params_st = st.builds(DistributionParams.skew_normal,
                      st.floats(-3, 3), st.floats(0.2, 3), st.floats(-8, 8))


def test_pdf_examples():
    n01 = DistributionParams.normal(0, 1)
    assert pdf(n01, 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-12)
    assert pdf(DistributionParams.skew_normal(0, 1, 0), 0.7) == pytest.approx(stats.norm.pdf(0.7), rel=1e-14)
    total, _ = integrate.quad(lambda s: pdf(DistributionParams.skew_normal(0, 1, 4), s), -np.inf, np.inf,
                              epsabs=1e-12)
    assert total == pytest.approx(1.0, abs=1e-8)


@settings(max_examples=60, deadline=None)
@given(params_st, st.floats(-6, 6))
def test_pdf_and_survival_match_scipy(p, s):
    ref = stats.skewnorm(p.shape, loc=p.location, scale=p.scale)
    assert pdf(p, s) == pytest.approx(ref.pdf(s), rel=1e-9, abs=1e-300)
    assert survival(p, s) == pytest.approx(ref.sf(s), rel=1e-8, abs=1e-14)
    assert cdf(p, s) + survival(p, s) == pytest.approx(1.0, abs=1e-14)


def test_survival_examples():
    assert survival(DistributionParams.normal(1, 1), 1.0) == pytest.approx(0.5, abs=1e-15)
    assert survival(DistributionParams.normal(0, 1), -np.inf) == 1.0
    p = DistributionParams.skew_normal(0, 1, 4)
    tail, _ = integrate.quad(lambda s: pdf(p, s), 0, np.inf, epsabs=1e-13)
    assert survival(p, 0.0) == pytest.approx(tail, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(params_st, st.lists(st.floats(-8, 8), min_size=2, max_size=20))
def test_survival_monotone(p, grid):
    g = np.sort(np.asarray(grid))
    assert np.all(np.diff(survival(p, g)) <= 1e-15)


def test_quantile_examples():
    assert quantile(DistributionParams.normal(0, 1), 0.5) == pytest.approx(0.0, abs=1e-14)
    assert quantile(DistributionParams.normal(1, 2), 0.975) == pytest.approx(1 + 2 * 1.959963985, abs=1e-4)


@settings(max_examples=40, deadline=None)
@given(params_st, st.floats(1e-6, 1 - 1e-6))
def test_quantile_round_trip(p, q):
    assert cdf(p, quantile(p, q)) == pytest.approx(q, abs=1e-8)


def test_quantile_rejects_out_of_range():
    with pytest.raises(InputError):
        quantile(DistributionParams.normal(0, 1), 1.0)


def test_sample_moments_and_determinism():
    s = sample(DistributionParams.normal(0, 1), 10**6, seed=3).scores
    assert abs(s.mean()) < 4 / 1000
    assert np.array_equal(s, sample(DistributionParams.normal(0, 1), 10**6, seed=3).scores)
    p = DistributionParams.skew_normal(0, 1, 4)
    x = sample(p, 10**6, seed=4).scores
    assert stats.skew(x) == pytest.approx(p.skewness(), abs=0.02)
    assert p.skewness() == pytest.approx(stats.skewnorm(4).stats(moments="s"), rel=1e-10)
    assert x.mean() == pytest.approx(p.mean(), abs=5 * math.sqrt(p.var() / 10**6))


def test_fit_normal_mle():
    f = fit_normal_mle([-1.0, 1.0])
    assert (f.location, f.scale) == (0.0, 1.0)
    with pytest.raises(InputError):
        fit_normal_mle([2.0, 2.0, 2.0])
    f = fit_normal_mle(sample(DistributionParams.normal(1, 0.5), 10**5, seed=5).scores)
    assert f.location == pytest.approx(1, abs=0.01) and f.scale == pytest.approx(0.5, abs=0.01)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=2, max_size=50, unique=True), st.randoms())
def test_fit_normal_mle_permutation_invariant(values, rnd):
    shuffled = list(values)
    rnd.shuffle(shuffled)
    try:
        expected = fit_normal_mle(values)
    except InputError:  # variance underflow on subnormal inputs
        with pytest.raises(InputError):
            fit_normal_mle(shuffled)
        return
    assert fit_normal_mle(shuffled) == expected


def test_fit_skew_normal_recovers_shape():
    x = sample(DistributionParams.skew_normal(0, 1, 2), 10**5, seed=6).scores
    f = fit_skew_normal_mle(x)
    assert f.shape == pytest.approx(2, abs=0.1)
    # independent optimizer as oracle: our likelihood is at least as high
    a, loc, scale = stats.skewnorm.fit(x)
    assert loglik(f, x) >= np.sum(stats.skewnorm.logpdf(x, a, loc, scale)) - 1e-6


def test_fit_skew_normal_nests_normal():
    x = sample(DistributionParams.normal(0, 1), 5000, seed=7).scores
    f = fit_skew_normal_mle(x)
    assert abs(f.shape) < 1.5
    assert loglik(f, x) >= loglik(fit_normal_mle(x), x) - 1e-9


def test_ecdf_examples():
    e = ecdf_ge([0.2, 0.6, 0.9])
    assert e.eval_ge(0.5) == pytest.approx(2 / 3)
    assert e.eval_ge(0.6) == pytest.approx(2 / 3)
    assert e.eval_ge(-5) == 1.0


def test_family_parse():
    assert Family.parse("skew-normal") is Family.SKEW_NORMAL
    with pytest.raises(InputError):
        Family.parse("cauchy")


def test_params_validation():
    with pytest.raises(InputError):
        DistributionParams.normal(0, 0)
    with pytest.raises(InputError):
        DistributionParams.normal(0, 1).__class__("normal", 0, 1, 2.0)


def test_model_file_round_trip(tmp_path):
    m = ClassConditionalModel(DistributionParams.skew_normal(1.0309, 1.4119, 1.0068),
                              DistributionParams.skew_normal(0.8425, 1.6677, -1.7983))
    path = tmp_path / "params.txt"
    write_model(path, m, {"positive": {"n": 3}})
    assert read_model(path) == m
    path.write_text("class = positive\nfamily = normal\nlocation = 0\n", encoding="utf-8")
    with pytest.raises(InputError, match="scale"):
        read_model(path)
