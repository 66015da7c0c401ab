import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize, stats

from contsweep.distributions import ClassConditionalModel, DistributionParams
from contsweep.exceptions import DegenerateError, NoAdmissibleThresholdsError, NoWindowError
from contsweep.quantifiers import (PrevalenceEstimate, Method, adjusted_count, classify_count, continuous_sweep,
                                   decision_boundaries, empirical_fpr, empirical_tpr, median_sweep,
                                   threshold_max, threshold_t50)
from contsweep.scores import LabeledScores
from contsweep.simulation import generate_test_set

N11 = ClassConditionalModel.normal(1, 1, 0, 1)


def test_classify_count_examples():
    s = [0.2, 0.6, 0.9]
    assert classify_count(s, 0.5) == pytest.approx(2 / 3)
    assert classify_count(s, 0.2) == 1.0
    assert classify_count(s, np.inf) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=30), st.floats(-11, 11), st.floats(-11, 11))
def test_classify_count_monotone(scores, a, b):
    lo, hi = min(a, b), max(a, b)
    assert classify_count(scores, lo) >= classify_count(scores, hi)


def test_empirical_rates():
    train = LabeledScores([0.9, 0.4, 0.1], [1, 1, -1])
    assert (empirical_tpr(train, 0.5), empirical_fpr(train, 0.5)) == (0.5, 0.0)
    assert (empirical_tpr(train, -1), empirical_fpr(train, -1)) == (1.0, 1.0)
    assert (empirical_tpr(train, 2), empirical_fpr(train, 2)) == (0.0, 0.0)


def test_adjusted_count_examples():
    assert adjusted_count(0.125, 0.98, 0.03) == pytest.approx(0.1, abs=1e-12)
    assert adjusted_count(0.03, 0.98, 0.03) == 0.0
    assert adjusted_count(0.98, 0.98, 0.03) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(DegenerateError):
        adjusted_count(0.5, 0.4, 0.4)


def _brute_max(train):
    best = None
    for t in sorted(set(train.scores)):
        gap = empirical_tpr(train, t) - empirical_fpr(train, t)
        if best is None or gap > best[0] + 1e-15:
            best = (gap, t)
    return best[1]


labeled_st = st.lists(st.tuples(st.integers(-20, 20).map(lambda v: v / 4), st.sampled_from([1, -1])),
                      min_size=2, max_size=25).filter(lambda r: {l for _, l in r} == {1, -1})


@settings(max_examples=80, deadline=None)
@given(labeled_st)
def test_threshold_max_matches_enumeration(rows):
    train = LabeledScores([s for s, _ in rows], [l for _, l in rows])
    assert threshold_max(train) == _brute_max(train)


def test_threshold_examples():
    sep = LabeledScores([3.0, 4.0, 0.0, 1.0], [1, 1, -1, -1])
    t = threshold_max(sep)
    assert 1.0 < t <= 3.0 and empirical_tpr(sep, t) - empirical_fpr(sep, t) == 1.0
    t50 = LabeledScores([1.0, 2.0, 3.0, 4.0, -5.0], [1, 1, 1, 1, -1])
    assert threshold_t50(t50) == 3.0
    # tie: thresholds 1 and 3 both give gap 0.5; the smallest wins
    tie = LabeledScores([1.0, 3.0, 2.0, 4.0], [1, 1, -1, -1])
    assert threshold_max(tie) == _brute_max(tie) == 1.0


def _brute_median_sweep(train, test, p_delta):
    ac = []
    for t in sorted(set(test)):
        tp, fp = empirical_tpr(train, t), empirical_fpr(train, t)
        if tp - fp > p_delta:
            ac.append((classify_count(test, t) - fp) / (tp - fp))
    return float(np.median(ac))


def test_median_sweep_hand_built():
    train = LabeledScores([0.9, 0.7, 0.55, 0.4, 0.3, 0.1], [1, 1, -1, 1, -1, -1])
    test = [0.8, 0.5, 0.35, 0.2]
    assert median_sweep(train, test, 0.25).raw == pytest.approx(_brute_median_sweep(train, test, 0.25), abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(labeled_st, st.lists(st.integers(-20, 20).map(lambda v: v / 4), min_size=1, max_size=15),
       st.sampled_from([0.0, 0.1, 0.25, 0.4]))
def test_median_sweep_matches_enumeration(rows, test, p_delta):
    train = LabeledScores([s for s, _ in rows], [l for _, l in rows])
    if not any(empirical_tpr(train, t) - empirical_fpr(train, t) > p_delta for t in set(test)):
        with pytest.raises(NoAdmissibleThresholdsError):
            median_sweep(train, test, p_delta)
    else:
        assert median_sweep(train, test, p_delta).raw == pytest.approx(_brute_median_sweep(train, test, p_delta),
                                                                      abs=1e-12)


def test_median_sweep_single_threshold():
    train = LabeledScores([0.9, 0.8, 0.1, 0.2], [1, 1, -1, -1])
    est = median_sweep(train, [0.5, 0.5, 0.5], 0.25)
    assert est.n_thresholds == 1 and est.raw == pytest.approx(1.0)
    with pytest.raises(NoAdmissibleThresholdsError):
        median_sweep(train, [0.5], 1.0)


def _bisect_roots(p):
    f = lambda t: stats.norm.cdf(t) - stats.norm.cdf(t - 1) - p
    return optimize.bisect(f, -20, 0.5, xtol=1e-14), optimize.bisect(f, 0.5, 20, xtol=1e-14)


def test_decision_boundaries_normal():
    w = decision_boundaries(N11, 0.25)
    lo, hi = _bisect_roots(0.25)
    assert w.theta_l == pytest.approx(lo, abs=1e-10) and w.theta_r == pytest.approx(hi, abs=1e-10)
    assert w.theta_l + w.theta_r == pytest.approx(1.0, abs=1e-10)
    # the roots of this model sit at -0.4628 / 1.4628
    assert w.theta_l == pytest.approx(-0.465, abs=0.005)


def test_decision_boundaries_collapse_and_error():
    g_max = 2 * stats.norm.cdf(0.5) - 1
    w = decision_boundaries(N11, g_max - 1e-8)
    assert abs(w.theta_l - 0.5) < 1e-3 and abs(w.theta_r - 0.5) < 1e-3
    with pytest.raises(NoWindowError):
        decision_boundaries(N11, 0.5)


def test_decision_boundaries_root_property():
    m = ClassConditionalModel(DistributionParams.skew_normal(1.0309, 1.4119, 1.0068),
                              DistributionParams.skew_normal(0.8425, 1.6677, -1.7983))
    w = decision_boundaries(m, 0.3)
    assert m.gap(w.theta_l) == pytest.approx(0.3, abs=1e-12)
    assert m.gap(w.theta_r) == pytest.approx(0.3, abs=1e-12)


def _quad_cs(model, test, window):
    test = np.sort(np.asarray(test))
    f = lambda t: (np.mean(test >= t) - model.fpr(t)) / model.gap(t)
    pts = [s for s in test if window.theta_l < s < window.theta_r]
    val, _ = integrate.quad(f, window.theta_l, window.theta_r, points=pts or None, limit=500,
                            epsabs=1e-13, epsrel=1e-13)
    return val / window.width


def _midpoint_cs(model, test, window, n=10**6):
    edges = np.linspace(window.theta_l, window.theta_r, n + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    cc = classify_count(test, mid)
    return float(np.mean((cc - model.fpr(mid)) / model.gap(mid)))


def test_continuous_sweep_three_scores_riemann():
    w = decision_boundaries(N11, 0.25)
    test = [-0.1, 0.4, 1.2]
    assert continuous_sweep(N11, test, w).raw == pytest.approx(_midpoint_cs(N11, test, w), abs=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-3, 4), min_size=1, max_size=12), st.floats(0.05, 0.35))
def test_continuous_sweep_matches_quad(test, p):
    w = decision_boundaries(N11, p)
    assert continuous_sweep(N11, test, w).raw == pytest.approx(_quad_cs(N11, test, w), abs=1e-8)


def test_continuous_sweep_all_above_window():
    w = decision_boundaries(N11, 0.25)
    est = continuous_sweep(N11, [5.0, 6.0], w)
    oracle = integrate.quad(lambda t: (1 - N11.fpr(t)) / N11.gap(t), w.theta_l, w.theta_r, epsabs=1e-13)[0] / w.width
    assert est.raw == pytest.approx(oracle, abs=1e-10) and est.raw >= 1.0
    assert est.clipped == 1.0


def test_continuous_sweep_unbiased_monte_carlo():
    w = decision_boundaries(N11, 0.25)
    est = np.array([continuous_sweep(N11, generate_test_set(N11, 0.5, 1000, s), w).raw for s in range(2000)])
    assert abs(est.mean() - 0.5) < 3 * est.std(ddof=1) / np.sqrt(est.size)


def test_estimate_record():
    e = PrevalenceEstimate(1.2, Method.CS)
    assert e.clipped == 1.0 and float(e) == 1.0 and e.raw == 1.2
    assert PrevalenceEstimate(-0.1, Method.AC).clipped == 0.0
