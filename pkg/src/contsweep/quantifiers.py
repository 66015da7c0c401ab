"""Classify, Count and Correct quantifiers.

Rates follow the decision rule ``score >= theta`` throughout: the true
positive rate is the fraction of positive scores at or above the threshold
and the false positive rate the fraction of negative scores at or above it.
Rates come either from labeled training scores (step functions) or from a
:class:`~contsweep.distributions.ClassConditionalModel` (smooth curves).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import optimize

from .distributions import ClassConditionalModel
from .exceptions import (DegenerateError, InputError, NoAdmissibleThresholdsError,
                         NoWindowError, QuadratureError)
from .scores import LabeledScores, ScoreSet

TRADITIONAL_P_DELTA = 0.25


class Method(str, Enum):
    CC = "CC"
    AC = "AC"
    MS = "MS"
    CS = "CS"
    SLD = "SLD"
    DYS = "DyS"


@dataclass(frozen=True)
class ThresholdWindow:
    """Continuous Sweep inclusion interval ``[theta_l, theta_r]`` for a gap ``p_delta``."""

    theta_l: float
    theta_r: float
    p_delta: float

    def __post_init__(self):
        if not self.theta_l < self.theta_r:
            raise InputError(f"window needs theta_l < theta_r, got [{self.theta_l}, {self.theta_r}]")
        if not self.p_delta > 0:
            raise InputError("p_delta must be positive")

    @property
    def width(self) -> float:
        return self.theta_r - self.theta_l


@dataclass(frozen=True)
class PrevalenceEstimate:
    raw: float
    method: Method
    window: ThresholdWindow | None = None
    n_thresholds: int | None = None
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def clipped(self) -> float:
        return min(1.0, max(0.0, self.raw))

    def __float__(self):
        return self.clipped


def _sorted_scores(test) -> np.ndarray:
    if isinstance(test, ScoreSet):
        return np.sort(test.scores)
    arr = np.sort(np.asarray(test, dtype=float).ravel())
    if arr.size == 0:
        raise InputError("empty test set")
    return arr


def _frac_ge(sorted_scores, theta):
    n = sorted_scores.size
    out = (n - np.searchsorted(sorted_scores, theta, side="left")) / n
    return float(out) if np.ndim(theta) == 0 else out


def classify_count(test, theta):
    """Fraction of test scores ``>= theta``. Vectorized over ``theta``."""
    return _frac_ge(_sorted_scores(test), theta)


def _train(train) -> LabeledScores:
    if not isinstance(train, LabeledScores):
        raise InputError("expected LabeledScores")
    return train


def empirical_tpr(train: LabeledScores, theta):
    return _frac_ge(np.sort(_train(train).positives), theta)


def empirical_fpr(train: LabeledScores, theta):
    return _frac_ge(np.sort(_train(train).negatives), theta)


def _rates(source):
    """Return ``(tpr, fpr)`` callables for a model or labeled training scores."""
    if isinstance(source, ClassConditionalModel):
        return source.tpr, source.fpr
    train = _train(source)
    pos, neg = np.sort(train.positives), np.sort(train.negatives)
    return (lambda t: _frac_ge(pos, t)), (lambda t: _frac_ge(neg, t))


def adjusted_count(cc, tpr, fpr):
    """``(cc - fpr) / (tpr - fpr)``; not clipped."""
    cc, tpr, fpr = (np.asarray(v, dtype=float) for v in (cc, tpr, fpr))
    denom = tpr - fpr
    if np.any(np.abs(denom) < 1e-12):
        raise DegenerateError("adjusted count undefined: tpr and fpr coincide")
    out = (cc - fpr) / denom
    return float(out) if out.ndim == 0 else out


def _candidate_counts(train: LabeledScores):
    pos, neg = np.sort(train.positives), np.sort(train.negatives)
    cand = np.unique(train.scores)
    c_pos = pos.size - np.searchsorted(pos, cand, side="left")
    c_neg = neg.size - np.searchsorted(neg, cand, side="left")
    return cand, c_pos, c_neg, pos.size, neg.size


def threshold_max(train: LabeledScores) -> float:
    """Observed score maximizing ``tpr - fpr``; the smallest one on ties."""
    cand, c_pos, c_neg, n_pos, n_neg = _candidate_counts(_train(train))
    # integer objective tpr - fpr scaled by n_pos * n_neg: exact tie detection
    obj = c_pos * n_neg - c_neg * n_pos
    return float(cand[int(np.argmax(obj))])


def threshold_t50(train: LabeledScores) -> float:
    """Observed score whose ``tpr`` is closest to 0.5; the smallest one on ties."""
    cand, c_pos, _, n_pos, _ = _candidate_counts(_train(train))
    return float(cand[int(np.argmin(np.abs(2 * c_pos - n_pos)))])


def median_sweep(train, test, p_delta: float = TRADITIONAL_P_DELTA) -> PrevalenceEstimate:
    """Median of Adjusted Count estimates over the admissible test-score thresholds.

    A threshold (a distinct test score) is admissible when ``tpr - fpr > p_delta``.
    ``train`` may be labeled scores (empirical rates) or a class-conditional
    model, in which case the model's rates replace the empirical ones.
    """
    sorted_test = _sorted_scores(test)
    tpr, fpr = _rates(train)
    thetas = np.unique(sorted_test)
    tp, fp = np.asarray(tpr(thetas)), np.asarray(fpr(thetas))
    keep = (tp - fp) > p_delta
    if not np.any(keep):
        raise NoAdmissibleThresholdsError(f"no test-score threshold has tpr - fpr > {p_delta}")
    cc = _frac_ge(sorted_test, thetas[keep])
    ac = (cc - fp[keep]) / (tp[keep] - fp[keep])
    return PrevalenceEstimate(float(np.median(ac)), Method.MS, n_thresholds=int(keep.sum()),
                              diagnostics={"p_delta": p_delta})


class GapProfile:
    """Cached scan of ``gap(theta) = tpr(theta) - fpr(theta)`` for one model.

    The argmax is found by bounded scalar minimization around the best point
    of a uniform grid spanning both classes' location +- 10 scales.
    """

    def __init__(self, model: ClassConditionalModel, grid_points: int = 2001):
        self.model = model
        lo, hi = model.bracket(10.0)
        self.grid = np.linspace(lo, hi, grid_points)
        self.values = np.asarray(model.gap(self.grid))
        i = int(np.argmax(self.values))
        a = self.grid[max(i - 1, 0)]
        b = self.grid[min(i + 1, grid_points - 1)]
        res = optimize.minimize_scalar(lambda t: -model.gap(t), bounds=(a, b), method="bounded",
                                       options={"xatol": 1e-12})
        if -res.fun >= self.values[i]:
            self.theta_star, self.g_max = float(res.x), float(-res.fun)
        else:
            self.theta_star, self.g_max = float(self.grid[i]), float(self.values[i])
        self._i = i

    def window(self, p_delta: float, check: bool = True) -> ThresholdWindow:
        p_delta = float(p_delta)
        if not p_delta > 0:
            raise InputError(f"p_delta must be positive, got {p_delta}")
        if p_delta >= self.g_max:
            raise NoWindowError(f"p_delta {p_delta:.6g} is not below the maximum gap {self.g_max:.6g}")
        v, grid, i = self.values, self.grid, self._i
        above = v >= p_delta
        j_lo = i
        while j_lo > 0 and above[j_lo - 1]:
            j_lo -= 1
        j_hi = i
        while j_hi < v.size - 1 and above[j_hi + 1]:
            j_hi += 1
        if j_lo == 0 and above[0] or j_hi == v.size - 1 and above[-1]:
            raise NoWindowError("gap does not fall below p_delta inside the search bracket")
        if check and (np.any(above[:j_lo]) or np.any(above[j_hi + 1:])):
            raise NoWindowError("gap function is not unimodal: more than two boundary solutions")
        f = lambda t: self.model.gap(t) - p_delta
        # p_delta may exceed every grid value but not g_max: fall back to the argmax
        inner_l = grid[j_lo] if above[j_lo] else self.theta_star
        inner_r = grid[j_hi] if above[j_hi] else self.theta_star
        rtol = 4 * np.finfo(float).eps
        theta_l = optimize.brentq(f, grid[j_lo - 1], inner_l, xtol=1e-14, rtol=rtol)
        theta_r = optimize.brentq(f, inner_r, grid[j_hi + 1], xtol=1e-14, rtol=rtol)
        return ThresholdWindow(theta_l, theta_r, p_delta)


def decision_boundaries(model: ClassConditionalModel, p_delta: float) -> ThresholdWindow:
    """The two roots of ``tpr(theta) - fpr(theta) = p_delta``."""
    return GapProfile(model).window(p_delta)


_GL_LO = np.polynomial.legendre.leggauss(6)
_GL_HI = np.polynomial.legendre.leggauss(12)


def _gl(f_vals, w, half):
    return half * (f_vals @ w)


def integrate_segments(model: ClassConditionalModel, a, b, c, tol: float = 1e-10, max_depth: int = 40):
    """Integrate ``(c_k - fpr) / (tpr - fpr)`` over each segment ``[a_k, b_k]``.

    Vectorized adaptive Gauss-Legendre: a segment is accepted when its 6- and
    12-point rules agree to ``tol`` (absolute), otherwise it is bisected.
    """
    a, b, c = (np.asarray(v, dtype=float).copy() for v in (a, b, c))
    total = np.zeros(a.size)
    owner = np.arange(a.size)
    x_lo, w_lo = _GL_LO
    x_hi, w_hi = _GL_HI
    seg_tol = np.full(a.size, tol)
    for _ in range(max_depth):
        if a.size == 0:
            return total
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        nodes = np.concatenate([x_lo, x_hi])
        t = mid[:, None] + half[:, None] * nodes[None, :]
        tp, fp = np.asarray(model.tpr(t)), np.asarray(model.fpr(t))
        vals = (c[:, None] - fp) / (tp - fp)
        q_lo = half * (vals[:, :6] @ w_lo)
        q_hi = half * (vals[:, 6:] @ w_hi)
        ok = np.abs(q_hi - q_lo) <= seg_tol
        np.add.at(total, owner[ok], q_hi[ok])
        bad = ~ok
        if not np.any(bad):
            return total
        a, b, c, owner, seg_tol, m = a[bad], b[bad], c[bad], owner[bad], seg_tol[bad], mid[bad]
        a, b = np.concatenate([a, m]), np.concatenate([m, b])
        c, owner = np.concatenate([c, c]), np.concatenate([owner, owner])
        seg_tol = np.concatenate([seg_tol, seg_tol]) / 2
    raise QuadratureError(f"quadrature did not converge on segment [{a[0]:.17g}, {b[0]:.17g}]",
                          segment=(float(a[0]), float(b[0])))


def continuous_sweep(model: ClassConditionalModel, test, window: ThresholdWindow,
                     tol: float = 1e-10) -> PrevalenceEstimate:
    """Mean of the Adjusted Count curve over ``[theta_l, theta_r]``.

    Between consecutive in-window test scores the CC curve is constant, so the
    window is cut at those scores (plus the two boundary pieces) and each
    piece is integrated with :func:`integrate_segments`.
    """
    sorted_test = _sorted_scores(test)
    lo, hi = window.theta_l, window.theta_r
    inside = sorted_test[(sorted_test >= lo) & (sorted_test <= hi)]
    cuts = np.unique(np.concatenate([[lo], inside, [hi]]))
    a, b = cuts[:-1], cuts[1:]
    c = _frac_ge(sorted_test, 0.5 * (a + b))
    area = integrate_segments(model, a, b, c, tol=tol)
    raw = math.fsum(area) / window.width
    return PrevalenceEstimate(raw, Method.CS, window=window, n_thresholds=int(inside.size),
                              diagnostics={"n_segments": int(a.size), "p_delta": window.p_delta})


def classify_count_estimate(test, theta: float) -> PrevalenceEstimate:
    return PrevalenceEstimate(classify_count(test, theta), Method.CC, diagnostics={"theta": theta})


def adjusted_count_estimate(train, test, theta: float) -> PrevalenceEstimate:
    tpr, fpr = _rates(train)
    raw = adjusted_count(classify_count(test, theta), tpr(theta), fpr(theta))
    return PrevalenceEstimate(raw, Method.AC, diagnostics={"theta": theta})
