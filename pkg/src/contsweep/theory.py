"""Analytic bias and variance of CC, AC and Continuous Sweep, and the
variance-minimizing inclusion gap ``p_delta``.

The scalar CC/AC formulas take the hit rates ``p_plus`` (true positive rate)
and ``p_minus`` (true negative rate). The Continuous Sweep formulas take a
:class:`ClassConditionalModel`, whose upper-tail curves give TPR and FPR.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.fft import dct

from .distributions import ClassConditionalModel
from .exceptions import (DegenerateError, InputError, NoWindowError, NumericalError,
                         OptimizationError, QuadratureError)
from .quantifiers import GapProfile, ThresholdWindow, decision_boundaries


def cc_expectation(alpha, p_plus, p_minus):
    """Expected Classify and Count: ``alpha * p_plus + (1 - alpha) * (1 - p_minus)``."""
    return alpha * p_plus + (1.0 - alpha) * (1.0 - p_minus)


def cc_bias(alpha, p_plus, p_minus):
    return cc_expectation(alpha, p_plus, p_minus) - alpha


def unbiased_prevalence(p_plus, p_minus):
    """The single prevalence at which Classify and Count is unbiased."""
    return (1.0 - p_minus) / (2.0 - p_plus - p_minus)


def cc_variance(alpha, p_plus, p_minus, n_test):
    if n_test < 1:
        raise InputError("n_test must be at least 1")
    return (alpha * p_plus * (1 - p_plus) + (1 - alpha) * p_minus * (1 - p_minus)) / n_test


def ac_variance(alpha, p_plus, p_minus, n_test):
    """Variance of the Adjusted Count at a fixed threshold.

    Diverges as ``p_plus + p_minus -> 1``; raises :class:`DegenerateError` at the pole.
    """
    denom = p_plus + p_minus - 1.0
    if abs(denom) < 1e-12:
        raise DegenerateError("p_plus + p_minus == 1: adjusted count variance is unbounded")
    return cc_variance(alpha, p_plus, p_minus, n_test) / denom**2


def cov_cc(model: ClassConditionalModel, alpha, n_test, x, y):
    """Covariance of the Classify and Count estimates at thresholds ``x >= y``."""
    if x < y:
        raise InputError("cov_cc expects x >= y")
    return _cc_kernel(model, alpha, x, y) / n_test


def _cc_kernel(model, alpha, x, y):
    # n * Cov[CC(x), CC(y)] for x >= y
    tx, ty = model.tpr(x), model.tpr(y)
    fx, fy = model.fpr(x), model.fpr(y)
    return alpha * tx * (1 - ty) + (1 - alpha) * fx * (1 - fy)


@dataclass(frozen=True)
class VarianceReport:
    variance: float
    window: ThresholdWindow
    alpha_plugin: float
    n_test: int
    quadrature_tolerance: float
    order: int = 0


_TRIANGLE_ORDERS = (48, 64, 96, 128, 192, 256)


@lru_cache(maxsize=None)
def _gauss_legendre(order):
    return np.polynomial.legendre.leggauss(order)


def _triangle_integral(model, alpha, lo, hi, order):
    x_gl, w_gl = _gauss_legendre(order)
    half = 0.5 * (hi - lo)
    y = lo + half * (x_gl + 1.0)
    wy = half * w_gl
    hx = 0.5 * (hi - y)
    x = y[:, None] + hx[:, None] * (x_gl[None, :] + 1.0)
    wx = hx[:, None] * w_gl[None, :]
    gx = model.gap(x)
    gy = model.gap(y)
    k = _cc_kernel(model, alpha, x, y[:, None]) / (gx * gy[:, None])
    return float(np.sum(wy[:, None] * wx * k))


def cs_variance(model: ClassConditionalModel, alpha, n_test, window: ThresholdWindow,
                rtol: float = 1e-8) -> VarianceReport:
    """Variance of Continuous Sweep for known class distributions.

    Integrates the CC covariance kernel divided by the gaps at both thresholds
    over the triangle ``theta_l <= y <= x <= theta_r`` with a tensor
    Gauss-Legendre rule, raising the order until two successive orders agree
    to ``rtol``.
    """
    if n_test < 1:
        raise InputError("n_test must be at least 1")
    lo, hi = window.theta_l, window.theta_r
    prev = None
    for order in _TRIANGLE_ORDERS:
        val = _triangle_integral(model, alpha, lo, hi, order)
        if not math.isfinite(val):
            raise QuadratureError("non-finite variance integrand", segment=(lo, hi))
        if prev is not None and abs(val - prev) <= rtol * abs(val):
            var = 2.0 * val / (n_test * window.width**2)
            return VarianceReport(max(var, 0.0), window, alpha, n_test, rtol, order)
        prev = val
    raise QuadratureError("triangle quadrature did not converge", segment=(lo, hi))


def _cheb_coeffs(values):
    # Chebyshev coefficients from values at first-kind nodes cos(pi (k + 1/2) / m)
    m = values.shape[-1]
    c = dct(values, type=2, axis=-1) / m
    c[..., 0] /= 2.0
    return c


def _cheb_nodes(m):
    return np.cos(np.pi * (np.arange(m) + 0.5) / m)


def _cheb_antiderivative(c):
    """Coefficients of the antiderivative vanishing at -1, truncated to the input length.

    Same series as ``chebint(c, lbnd=-1)[..., :m]``, without its Python loop.
    """
    m = c.shape[-1]
    ext = np.zeros(c.shape[:-1] + (m + 2,))
    ext[..., :m] = c
    ext[..., 0] *= 2.0
    k = np.arange(1, m + 1)
    out = np.zeros(c.shape[:-1] + (m + 1,))
    out[..., 1:] = (ext[..., :m] - ext[..., 2:m + 2]) / (2.0 * k)
    out[..., 0] = -np.sum(out[..., 1:] * (-1.0) ** k, axis=-1)
    return out[..., :m]


def _separable_integral(model, alpha, lo, hi, m):
    """Same triangle integral as :func:`_triangle_integral`, O(m) evaluations.

    The kernel is a sum of products ``a(x) u(y)``, so each term reduces to
    ``int a(x) U(x) dx`` with ``U`` the running integral of ``u``; both are
    done spectrally on Chebyshev interpolants.
    """
    t = _cheb_nodes(m)
    half = 0.5 * (hi - lo)
    theta = lo + half * (t + 1.0)
    tp, fp = model.tpr(theta), model.fpr(theta)
    g = tp - fp
    a = np.stack([tp / g, fp / g])
    u = np.stack([(1 - tp) / g, (1 - fp) / g])
    ci = _cheb_antiderivative(_cheb_coeffs(u))
    # T_m vanishes at the m first-kind nodes, so dropping the top term is exact;
    # evaluating a series at those nodes is an inverse DCT
    ci[..., 1:] *= 0.5
    running = dct(ci, type=3, axis=-1) * half
    cprod = _cheb_coeffs(a * running)
    # int_{-1}^{1} T_k = 2 / (1 - k^2) for even k, 0 for odd k
    w = np.zeros(m)
    w[::2] = 2.0 / (1.0 - np.arange(0, m, 2, dtype=float) ** 2)
    parts = half * (cprod @ w)
    return alpha * parts[0] + (1 - alpha) * parts[1]


def cs_variance_fast(model, alpha, n_test, window: ThresholdWindow, rtol: float = 1e-10) -> float:
    """Spectral evaluation of the Continuous Sweep variance (used by the optimizer)."""
    lo, hi = window.theta_l, window.theta_r
    prev = None
    m = 32
    while m <= 2048:
        val = _separable_integral(model, alpha, lo, hi, m)
        if prev is not None and abs(val - prev) <= rtol * abs(val):
            return max(2.0 * val / (n_test * window.width**2), 0.0)
        prev = val
        m *= 2
    raise QuadratureError("spectral variance did not converge", segment=(lo, hi))


@dataclass(frozen=True)
class PdeltaSolution:
    p_delta_star: float
    variance_at_star: float
    window: ThresholdWindow
    g_max: float
    variance_curve: tuple = ()


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def _unimodal(values):
    i = int(np.argmin(values))
    d = np.diff(values)
    return bool(np.all(d[:i] <= 0) and np.all(d[i:] >= 0))


def optimal_pdelta(model: ClassConditionalModel, n_test: int, alpha_plugin: float = 0.5,
                   tol: float = 1e-4, curve_points: int = 0) -> PdeltaSolution:
    """Gap ``p_delta`` minimizing the Continuous Sweep variance.

    Searches ``[eps, g_max - eps]`` with ``eps = 0.01 * g_max``: an 11-point
    scan brackets the minimum (a 101-point scan if the coarse samples are not
    unimodal), then golden-section search narrows it to ``tol``.
    """
    profile = GapProfile(model)
    g_max = profile.g_max
    if not g_max > 1e-9:
        raise OptimizationError("classes are indistinguishable: maximum tpr - fpr gap is zero")
    eps = 0.01 * g_max
    lo, hi = eps, g_max - eps
    evaluated = {}

    def variance(p):
        if p not in evaluated:
            try:
                w = profile.window(p)
                evaluated[p] = cs_variance_fast(model, alpha_plugin, n_test, w)
            except (NoWindowError, NumericalError) as exc:
                raise OptimizationError(f"variance evaluation failed at p_delta={p:.6g}: {exc}",
                                        curve=sorted(evaluated.items())) from exc
        return evaluated[p]

    grid = np.linspace(lo, hi, 11)
    vals = np.array([variance(p) for p in grid])
    if not _unimodal(vals):
        grid = np.linspace(lo, hi, 101)
        vals = np.array([variance(p) for p in grid])
    i = int(np.argmin(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]

    c, d = b - _INV_PHI * (b - a), a + _INV_PHI * (b - a)
    fc, fd = variance(c), variance(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = variance(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = variance(d)

    if curve_points:
        for p in np.linspace(lo, hi, curve_points):
            variance(float(p))
    p_star = min(evaluated, key=evaluated.get)
    window = profile.window(p_star)
    exact = cs_variance(model, alpha_plugin, n_test, window).variance
    curve = tuple(sorted(evaluated.items()))
    return PdeltaSolution(float(p_star), exact, window, g_max, curve)


def cs_variance_at(model, alpha, n_test, p_delta) -> VarianceReport:
    """Convenience: :func:`cs_variance` on the window implied by ``p_delta``."""
    return cs_variance(model, alpha, n_test, decision_boundaries(model, p_delta))
