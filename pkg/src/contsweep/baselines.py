"""Distribution matching baselines (SLD and DyS) and the Naive-Bayes
score-to-probability transform that feeds them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .distributions import ClassConditionalModel, logpdf
from .exceptions import InputError
from .quantifiers import Method, PrevalenceEstimate


def nb_posterior(model: ClassConditionalModel, prior: float, s):
    """``P(+ | s)`` from the class densities and a positive-class ``prior``.

    Computed on the log-odds scale so it saturates to 0/1 instead of
    dividing underflowed densities.
    """
    if not 0.0 < prior < 1.0:
        raise InputError(f"prior must lie in (0, 1), got {prior}")
    lp = np.asarray(logpdf(model.positive, s))
    ln = np.asarray(logpdf(model.negative, s))
    if np.any(np.isneginf(lp) & np.isneginf(ln)):
        raise InputError("both class densities vanish at the score")
    with np.errstate(invalid="ignore"):
        logit = np.log(prior) - np.log1p(-prior) + lp - ln
    out = expit(logit)
    return float(out) if np.ndim(s) == 0 else out


def _probabilities(values) -> np.ndarray:
    p = np.asarray(values, dtype=float).ravel()
    if p.size == 0:
        raise InputError("empty probability set")
    if np.any(~np.isfinite(p)) or np.any((p < 0) | (p > 1)):
        raise InputError("probabilities must lie in [0, 1]")
    return p


_PRIOR_FLOOR = 1e-8


def sld(train_prior: float, test_posteriors, max_iter: int = 1000, tol: float = 1e-4) -> PrevalenceEstimate:
    """EM re-estimation of the test prior from posteriors computed under ``train_prior``.

    Each step rescales every posterior by the prior ratio, renormalizes it and
    takes the mean as the new prior; stops once the prior moves less than
    ``tol``. Intermediate priors are kept inside ``[1e-8, 1 - 1e-8]``.
    """
    if not 0.0 < train_prior < 1.0:
        raise InputError(f"train_prior must lie in (0, 1), got {train_prior}")
    post = _probabilities(test_posteriors)
    q = train_prior
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        w_pos = (q / train_prior) * post
        w_neg = ((1.0 - q) / (1.0 - train_prior)) * (1.0 - post)
        q_new = float(np.mean(w_pos / (w_pos + w_neg)))
        q_new = min(1.0 - _PRIOR_FLOOR, max(_PRIOR_FLOOR, q_new))
        step = abs(q_new - q)
        q = q_new
        if step < tol:
            converged = True
            break
    return PrevalenceEstimate(q, Method.SLD, diagnostics={"iterations": it, "converged": converged})


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        masses = np.asarray(self.masses, dtype=float)
        if edges.size != masses.size + 1:
            raise InputError("histogram needs bin_count + 1 edges")
        if np.any(masses < 0) or abs(masses.sum() - 1.0) > 1e-12:
            raise InputError("histogram masses must be non-negative and sum to 1")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "masses", masses)

    @property
    def bin_count(self) -> int:
        return int(self.masses.size)


def histogram(values, bins: int = 8) -> Histogram:
    """Relative-frequency histogram with equal-width bins on [0, 1]; 1.0 falls in the last bin."""
    if bins < 1:
        raise InputError("need at least one bin")
    p = _probabilities(values)
    counts, edges = np.histogram(p, bins=bins, range=(0.0, 1.0))
    return Histogram(edges, counts / p.size)


def topsoe(p, q) -> float:
    """Topsoe distance ``sum p log(2p/(p+q)) + q log(2q/(p+q))`` with ``0 log 0 = 0``."""
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    m = p + q
    with np.errstate(divide="ignore", invalid="ignore"):
        tp = np.where(p > 0, p * np.log(2.0 * p / m), 0.0)
        tq = np.where(q > 0, q * np.log(2.0 * q / m), 0.0)
    return float(np.sum(tp + tq))


def _ternary_search(f, lo, hi, tol):
    while hi - lo >= tol:
        a = lo + (hi - lo) / 3.0
        b = hi - (hi - lo) / 3.0
        if f(a) > f(b):
            lo = a
        else:
            hi = b
    return 0.5 * (lo + hi)


def dys(pos_hist: Histogram, neg_hist: Histogram, test_hist: Histogram, tol: float = 1e-5) -> PrevalenceEstimate:
    """Mixture weight whose blend of the class histograms is Topsoe-closest to the test histogram."""
    for h in (neg_hist, test_hist):
        if h.edges.shape != pos_hist.edges.shape or not np.allclose(h.edges, pos_hist.edges, rtol=0, atol=1e-12):
            raise InputError("histograms must share identical bin edges")
    pos, neg, test = pos_hist.masses, neg_hist.masses, test_hist.masses
    alpha = _ternary_search(lambda a: topsoe(a * pos + (1.0 - a) * neg, test), 0.0, 1.0, tol)
    return PrevalenceEstimate(alpha, Method.DYS, diagnostics={"bins": pos_hist.bin_count})
