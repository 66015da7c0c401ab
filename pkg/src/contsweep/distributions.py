"""Class-conditional score distributions: Normal and SkewNormal.

All tail probabilities are upper-tail, ``survival(p, s) = P(S >= s)``, so for a
:class:`ClassConditionalModel` the true positive rate is the survival function
of the positive class and the false positive rate that of the negative class.

The skew-normal CDF is evaluated through Owen's T function,
``P(S <= s) = Phi(z) - 2 T(z, shape)`` with ``z = (s - location) / scale``,
which reduces to the normal CDF when ``shape == 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import optimize
from scipy.special import log_ndtr, ndtr, ndtri, owens_t

from .exceptions import FitError, InputError
from .scores import LabeledScores, ScoreSet

_LOG_2 = math.log(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


class Family(str, Enum):
    NORMAL = "normal"
    SKEW_NORMAL = "skew-normal"

    @classmethod
    def parse(cls, value) -> "Family":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"normal": cls.NORMAL, "skew-normal": cls.SKEW_NORMAL,
                   "skewnormal": cls.SKEW_NORMAL, "family.normal": cls.NORMAL,
                   "family.skew-normal": cls.SKEW_NORMAL}
        try:
            return aliases[key]
        except KeyError:
            raise InputError(f"unknown distribution family {value!r}") from None


@dataclass(frozen=True)
class DistributionParams:
    """Location/scale/shape parameters of a score distribution.

    For ``Family.NORMAL`` the location is the mean, the scale the standard
    deviation and ``shape`` must be 0.
    """

    family: Family
    location: float
    scale: float
    shape: float = 0.0

    def __post_init__(self):
        family = Family.parse(self.family)
        object.__setattr__(self, "family", family)
        for name in ("location", "scale", "shape"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise InputError(f"{name} must be finite, got {v}")
            object.__setattr__(self, name, v)
        if self.scale <= 0:
            raise InputError(f"scale must be strictly positive, got {self.scale}")
        if family is Family.NORMAL and self.shape != 0.0:
            raise InputError("normal distributions have shape 0")

    @classmethod
    def normal(cls, mean, sd):
        return cls(Family.NORMAL, mean, sd, 0.0)

    @classmethod
    def skew_normal(cls, location, scale, shape):
        return cls(Family.SKEW_NORMAL, location, scale, shape)

    @property
    def delta(self) -> float:
        return self.shape / math.sqrt(1.0 + self.shape * self.shape)

    def mean(self) -> float:
        return self.location + self.scale * _SQRT_2_OVER_PI * self.delta

    def var(self) -> float:
        return self.scale**2 * (1.0 - 2.0 * self.delta**2 / math.pi)

    def skewness(self) -> float:
        m = _SQRT_2_OVER_PI * self.delta
        return 0.5 * (4.0 - math.pi) * m**3 / (1.0 - m * m) ** 1.5


def _z(params, s):
    return (np.asarray(s, dtype=float) - params.location) / params.scale


def _scalar_or_array(out, s):
    return float(out) if np.ndim(s) == 0 else out


def logpdf(params: DistributionParams, s):
    s_arr = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(s_arr)):
        raise InputError("pdf evaluated at a non-finite score")
    z = _z(params, s_arr)
    out = -0.5 * z * z - _LOG_SQRT_2PI - math.log(params.scale)
    if params.shape != 0.0:
        out = out + _LOG_2 + log_ndtr(params.shape * z)
    return _scalar_or_array(out, s)


def pdf(params: DistributionParams, s):
    """Density at ``s``; ``2/scale * phi(z) * Phi(shape * z)`` for the skew-normal."""
    return _scalar_or_array(np.exp(logpdf(params, s)), s)


def survival(params: DistributionParams, s):
    """Upper-tail probability ``P(S >= s)``. Accepts +-inf."""
    if isinstance(s, float):
        # scalar fast path for root finders
        z = (s - params.location) / params.scale
        out = float(ndtr(-z))
        if params.shape != 0.0 and math.isfinite(z):
            out = min(1.0, max(0.0, out + 2.0 * float(owens_t(z, params.shape))))
        return out
    z = _z(params, s)
    if params.shape == 0.0:
        out = ndtr(-z)
    else:
        with np.errstate(invalid="ignore"):
            out = ndtr(-z) + 2.0 * owens_t(np.where(np.isfinite(z), z, 0.0), params.shape)
        out = np.where(np.isfinite(z), out, ndtr(-z))
        out = np.clip(out, 0.0, 1.0)
    return _scalar_or_array(out, s)


def cdf(params: DistributionParams, s):
    """Lower-tail probability ``P(S <= s)``; ``survival + cdf == 1``."""
    z = _z(params, s)
    if params.shape == 0.0:
        out = ndtr(z)
    else:
        with np.errstate(invalid="ignore"):
            out = ndtr(z) - 2.0 * owens_t(np.where(np.isfinite(z), z, 0.0), params.shape)
        out = np.where(np.isfinite(z), out, ndtr(z))
        out = np.clip(out, 0.0, 1.0)
    return _scalar_or_array(out, s)


def quantile(params: DistributionParams, p: float) -> float:
    """Inverse of :func:`cdf`. Closed form for zero shape, Brent root-find otherwise."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise InputError(f"quantile level must lie in (0, 1), got {p}")
    if params.shape == 0.0:
        return params.location + params.scale * float(ndtri(p))

    guess = params.mean() + math.sqrt(params.var()) * float(ndtri(p))
    step = params.scale
    lo, hi = guess - step, guess + step
    f = lambda x: cdf(params, x) - p
    while f(lo) > 0:
        step *= 2.0
        lo -= step
    step = params.scale
    while f(hi) < 0:
        step *= 2.0
        hi += step
    return optimize.brentq(f, lo, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps, maxiter=200)


def draw(params: DistributionParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` scores using ``rng`` (stochastic representation for the skew-normal)."""
    if params.shape == 0.0:
        z = rng.standard_normal(n)
    else:
        d = params.delta
        u0 = np.abs(rng.standard_normal(n))
        v = rng.standard_normal(n)
        z = d * u0 + math.sqrt(1.0 - d * d) * v
    return params.location + params.scale * z


def sample(params: DistributionParams, n: int, seed: int) -> ScoreSet:
    if n < 1:
        raise InputError("sample size must be at least 1")
    return ScoreSet(draw(params, n, np.random.default_rng(seed)))


def loglik(params: DistributionParams, scores) -> float:
    return float(np.sum(logpdf(params, np.asarray(scores, dtype=float))))


def fit_normal_mle(scores) -> DistributionParams:
    """Normal maximum likelihood fit (variance divisor ``n``)."""
    x = np.sort(np.asarray(scores, dtype=float).ravel())  # sorted: exact permutation invariance
    if x.size < 2:
        raise InputError("normal fit needs at least 2 scores")
    mu = math.fsum(x) / x.size
    var = math.fsum((x - mu) ** 2) / x.size
    if not var > 0.0:
        raise InputError("normal fit needs scores with non-zero variance")
    return DistributionParams.normal(mu, math.sqrt(var))


_MAX_SHAPE = 50.0


def _moment_start(z):
    """Method-of-moments (location, log scale, shape) for standardized data."""
    g = float(np.mean(z**3))
    g = max(-0.99, min(0.99, g))
    c = (2.0 * abs(g) / (4.0 - math.pi)) ** (2.0 / 3.0)
    d = math.copysign(math.sqrt(c / (1.0 + c)) / _SQRT_2_OVER_PI, g) if g else 0.0
    d = max(-0.99, min(0.99, d))
    omega = 1.0 / math.sqrt(1.0 - 2.0 * d * d / math.pi)
    xi = -omega * _SQRT_2_OVER_PI * d
    return np.array([xi, math.log(omega), d / math.sqrt(1.0 - d * d)])


def _sn_negloglik(theta, z):
    xi, log_omega, beta = theta
    omega = math.exp(log_omega)
    u = (z - xi) / omega
    lg = log_ndtr(beta * u)
    # phi(beta u) / Phi(beta u), evaluated in log space to survive the far tail
    m = np.exp(-0.5 * (beta * u) ** 2 - _LOG_SQRT_2PI - lg)
    nll = -(z.size * (_LOG_2 - log_omega - _LOG_SQRT_2PI) + np.sum(-0.5 * u * u + lg))
    grad = -np.array([
        np.sum(u - beta * m) / omega,
        np.sum(u * u - beta * m * u) - z.size,
        np.sum(u * m),
    ])
    return nll, grad


def fit_skew_normal_mle(scores, max_iter: int = 500) -> DistributionParams:
    """Skew-normal maximum likelihood fit.

    Starts from the method-of-moments estimate and falls back to the normal
    MLE start (shape 0) when that gives a lower likelihood, so the result is
    never worse than the normal fit. Raises :class:`FitError` if the optimizer
    stops with a non-negligible gradient.
    """
    x = np.asarray(scores, dtype=float).ravel()
    if x.size < 3:
        raise InputError("skew-normal fit needs at least 3 scores")
    base = fit_normal_mle(x)
    m, sd = base.location, base.scale
    z = (x - m) / sd
    normal_nll = _sn_negloglik(np.array([0.0, 0.0, 0.0]), z)[0]
    bounds = [(None, None), (-20.0, 20.0), (-_MAX_SHAPE, _MAX_SHAPE)]

    best = None
    for start in (_moment_start(z), np.zeros(3)):
        res = optimize.minimize(_sn_negloglik, start, args=(z,), jac=True, method="L-BFGS-B",
                                bounds=bounds, options={"maxiter": max_iter, "gtol": 1e-9, "ftol": 1e-15})
        if best is None or res.fun < best.fun:
            best = res
        if best.fun <= normal_nll + 1e-9:
            break

    xi, log_omega, beta = best.x
    params = DistributionParams.skew_normal(m + sd * xi, sd * math.exp(log_omega), beta)
    grad = np.abs(best.jac)
    grad[2] = 0.0 if abs(beta) >= _MAX_SHAPE - 1e-9 else grad[2]
    if not (best.success or np.max(grad) / x.size < 1e-6):
        raise FitError(f"skew-normal fit did not converge: {best.message}", best=params)
    return params


def fit(scores, family) -> DistributionParams:
    family = Family.parse(family)
    if family is Family.NORMAL:
        return fit_normal_mle(scores)
    return fit_skew_normal_mle(scores)


@dataclass(frozen=True)
class ClassConditionalModel:
    """Score distributions of the positive and negative class."""

    positive: DistributionParams
    negative: DistributionParams

    def tpr(self, theta):
        return survival(self.positive, theta)

    def fpr(self, theta):
        return survival(self.negative, theta)

    def gap(self, theta):
        """``tpr(theta) - fpr(theta)``."""
        return survival(self.positive, theta) - survival(self.negative, theta)

    def bracket(self, width: float = 10.0):
        """Score interval covering both classes' location +- ``width`` scales."""
        p, q = self.positive, self.negative
        return (min(p.location - width * p.scale, q.location - width * q.scale),
                max(p.location + width * p.scale, q.location + width * q.scale))

    @classmethod
    def fit(cls, train: LabeledScores, family) -> "ClassConditionalModel":
        return cls(fit(train.positives, family), fit(train.negatives, family))

    @classmethod
    def normal(cls, mu_pos, sd_pos, mu_neg, sd_neg):
        return cls(DistributionParams.normal(mu_pos, sd_pos), DistributionParams.normal(mu_neg, sd_neg))


@dataclass(frozen=True)
class EmpiricalCdf:
    """Step-function upper tail ``P(S >= theta)`` of observed scores."""

    sorted_scores: np.ndarray

    def __post_init__(self):
        arr = np.sort(np.asarray(self.sorted_scores, dtype=float).ravel())
        if arr.size == 0:
            raise InputError("empirical CDF of an empty score set")
        arr.setflags(write=False)
        object.__setattr__(self, "sorted_scores", arr)

    def eval_ge(self, theta):
        n = self.sorted_scores.size
        out = (n - np.searchsorted(self.sorted_scores, theta, side="left")) / n
        return _scalar_or_array(out, theta)

    __call__ = eval_ge


def ecdf_ge(scores) -> EmpiricalCdf:
    return EmpiricalCdf(np.asarray(scores, dtype=float))


# -- parameter files --------------------------------------------------------

def format_params(params: DistributionParams, label: str | None = None) -> str:
    lines = [] if label is None else [f"class = {label}"]
    lines += [f"family = {params.family.value}",
              f"location = {params.location:.17g}",
              f"scale = {params.scale:.17g}",
              f"shape = {params.shape:.17g}"]
    return "\n".join(lines) + "\n"


def write_model(path, model: ClassConditionalModel, extra: dict | None = None):
    """Write both class records as ``key = value`` blocks separated by blank lines."""
    blocks = []
    for label, params in (("positive", model.positive), ("negative", model.negative)):
        text = format_params(params, label)
        for k, v in (extra or {}).get(label, {}).items():
            text += f"{k} = {v}\n"
        blocks.append(text)
    Path(path).write_text("\n".join(blocks), encoding="utf-8")


def parse_records(text: str, source="<params>") -> list[dict]:
    records, cur = [], {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            if cur:
                records.append(cur)
                cur = {}
            continue
        if "=" not in line:
            raise InputError(f"{source}:{lineno}: expected 'key = value'")
        k, v = (t.strip() for t in line.split("=", 1))
        cur[k.lower()] = v
    if cur:
        records.append(cur)
    return records


def params_from_record(rec: dict, source="<params>") -> DistributionParams:
    try:
        return DistributionParams(rec["family"], float(rec["location"]), float(rec["scale"]),
                                  float(rec.get("shape", 0.0)))
    except KeyError as exc:
        raise InputError(f"{source}: parameter record missing {exc.args[0]!r}") from None
    except ValueError as exc:
        raise InputError(f"{source}: {exc}") from None


def read_model(path) -> ClassConditionalModel:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    found = {}
    for rec in parse_records(text, path):
        label = rec.get("class", "").lower()
        if label not in ("positive", "negative"):
            raise InputError(f"{path}: record without class = positive|negative")
        found[label] = params_from_record(rec, path)
    if set(found) != {"positive", "negative"}:
        raise InputError(f"{path}: need one positive and one negative record")
    return ClassConditionalModel(found["positive"], found["negative"])
