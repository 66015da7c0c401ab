"""Factorial simulation studies, score-file evaluation and Monte Carlo oracles.

Three studies are available:

* Study 1 -- normal class distributions with known parameters.
* Study 2 -- normal class distributions fitted by maximum likelihood on a
  simulated training set.
* Study 3 -- skew-normal class distributions; Continuous Sweep is run with
  both a skew-normal (correct) and a normal (misspecified) fit.

Every replication draws its data from a seed derived from
``(master_seed, study, condition ordinal, replication ordinal, stream)``, so a
study's output is a pure function of ``(study_id, scale, master_seed)`` and
conditions can be evaluated in any order or in parallel.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import math
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .baselines import Histogram, dys, histogram, nb_posterior, sld
from .distributions import ClassConditionalModel, DistributionParams, Family, draw
from .exceptions import ContSweepError, InputError
from .quantifiers import (TRADITIONAL_P_DELTA, continuous_sweep, decision_boundaries,
                          median_sweep)
from .scores import LabeledScores, ScoreSet, read_test_csv, read_train_csv
from .theory import optimal_pdelta

REPLICATIONS = {"paper": 10_000, "desk": 2_000}
REFERENCE_SAMPLES = 10**7
DYS_BINS = 8


def derive_seed(*keys: int) -> int:
    """Stable 64-bit seed from a tuple of integers."""
    # keys wrap to 64 bits, so derived seeds can be fed back in as keys
    data = struct.pack(f"<{len(keys)}Q", *(int(k) % 2**64 for k in keys))
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")


def _positive_count(alpha, n):
    return int(math.floor(alpha * n + 0.5))


def generate_test_set(model: ClassConditionalModel, alpha: float, n: int, seed: int) -> ScoreSet:
    """``round(alpha * n)`` positive draws and the rest negative, shuffled."""
    if n < 1:
        raise InputError("test set size must be at least 1")
    rng = np.random.default_rng(seed)
    k = _positive_count(alpha, n)
    scores = np.concatenate([draw(model.positive, k, rng), draw(model.negative, n - k, rng)])
    return ScoreSet(scores[rng.permutation(n)])


def generate_train_set(model: ClassConditionalModel, alpha_train: float, n_train: int, seed: int) -> LabeledScores:
    rng = np.random.default_rng(seed)
    k = _positive_count(alpha_train, n_train)
    if k == 0 or k == n_train:
        raise InputError(f"alpha_train={alpha_train} with n_train={n_train} leaves a class empty")
    scores = np.concatenate([draw(model.positive, k, rng), draw(model.negative, n_train - k, rng)])
    labels = np.concatenate([np.ones(k, dtype=int), -np.ones(n_train - k, dtype=int)])
    order = rng.permutation(n_train)
    return LabeledScores(scores[order], labels[order])


# -- study design -----------------------------------------------------------

@dataclass(frozen=True)
class StudyCondition:
    study: int
    index: int
    n_test: int
    n_train: int | None  # None: class distributions are known
    alpha_test: float
    alpha_train: float | None
    sigma_plus: float
    sigma_minus: float
    mu_plus: float = 1.0
    mu_minus: float = 0.0
    skew: float = 0.0
    replications: int = REPLICATIONS["desk"]
    master_seed: int = 0

    def true_model(self) -> ClassConditionalModel:
        if self.skew == 0:
            return ClassConditionalModel.normal(self.mu_plus, self.sigma_plus, self.mu_minus, self.sigma_minus)
        # same positive shape for both classes; location/scale play the role of mu/sigma
        return ClassConditionalModel(
            DistributionParams.skew_normal(self.mu_plus, self.sigma_plus, self.skew),
            DistributionParams.skew_normal(self.mu_minus, self.sigma_minus, self.skew))

    def seed(self, rep: int, stream: int = 0) -> int:
        return derive_seed(self.master_seed, self.study, self.index, rep, stream)


STUDY_QUANTIFIERS = {
    1: ("O-CS", "T-CS", "O-MS", "T-MS", "SLD", "DyS"),
    2: ("O-CS", "T-CS", "O-MS", "T-MS", "SLD", "DyS"),
    3: ("O-CS (skew)", "T-CS (skew)", "O-CS (norm)", "T-CS (norm)", "O-MS", "T-MS", "SLD", "DyS"),
}
REFERENCE_QUANTIFIER = {1: "O-CS", 2: "O-CS", 3: "O-CS (skew)"}

_N_TEST = (100, 1000)
_ALPHA_TEST = (0.3, 0.5, 0.9)


def study_conditions(study_id: int, scale: str = "desk", master_seed: int = 0,
                     replications: int | None = None) -> list[StudyCondition]:
    """The full factorial grid of a study, in a fixed order."""
    if scale not in REPLICATIONS:
        raise InputError(f"scale must be one of {sorted(REPLICATIONS)}, got {scale!r}")
    reps = REPLICATIONS[scale] if replications is None else int(replications)
    if reps < 1:
        raise InputError("replications must be at least 1")
    sig = (0.5, 1.0, 1.5)
    if study_id == 1:
        grid = [dict(n_test=n, sigma_plus=sp, sigma_minus=sm, alpha_test=a, n_train=None, alpha_train=None)
                for n, sp, sm, a in itertools.product(_N_TEST, sig, sig, _ALPHA_TEST)]
    elif study_id == 2:
        grid = [dict(n_train=nt, alpha_train=at, n_test=n, sigma_plus=sp, sigma_minus=sm, alpha_test=a)
                for nt, at, n, sp, sm, a in itertools.product((100, 1000), (0.4, 0.5, 0.6), _N_TEST,
                                                              sig, sig, _ALPHA_TEST)]
    elif study_id == 3:
        grid = [dict(skew=k, n_test=n, sigma_plus=sp, sigma_minus=sm, alpha_test=a, n_train=1000, alpha_train=0.5)
                for k, n, sp, sm, a in itertools.product((1.0, 2.0, 4.0), _N_TEST, (0.5, 1.5), (0.5, 1.5),
                                                         _ALPHA_TEST)]
    else:
        raise InputError(f"unknown study {study_id!r}; expected 1, 2 or 3")
    return [StudyCondition(study=study_id, index=i, replications=reps, master_seed=master_seed, **g)
            for i, g in enumerate(grid)]


# -- per-condition evaluation -----------------------------------------------

@dataclass(frozen=True)
class QuantifierSummary:
    n: int
    failures: int
    mean: float
    bias: float
    variance: float
    mse: float
    rmse: float


def summarize(estimates, truth: float, failures: int = 0) -> QuantifierSummary:
    """Bias, population variance, MSE and RMSE of clipped estimates against ``truth``."""
    e = np.asarray(estimates, dtype=float)
    if e.size == 0:
        nan = float("nan")
        return QuantifierSummary(0, failures, nan, nan, nan, nan, nan)
    mean = float(np.mean(e))
    variance = float(np.mean((e - mean) ** 2))
    mse = float(np.mean((e - truth) ** 2))
    return QuantifierSummary(int(e.size), failures, mean, mean - truth, variance, mse, math.sqrt(mse))


@dataclass
class ConditionResult:
    condition: StudyCondition
    summaries: dict[str, QuantifierSummary]
    estimates: dict[str, np.ndarray] = field(default_factory=dict, repr=False)
    p_delta_optimal: float | None = None

    def rmse(self, name: str) -> float:
        return self.summaries[name].rmse


_REFERENCE_CACHE: dict = {}


def reference_histograms(model: ClassConditionalModel, prior: float, seed: int,
                         n: int = REFERENCE_SAMPLES, bins: int = DYS_BINS):
    """Class histograms of posteriors from ``n`` draws per class ("known" distributions)."""
    key = (model, prior, seed, n, bins)
    if key not in _REFERENCE_CACHE:
        rng = np.random.default_rng(seed)
        out = []
        for params in (model.positive, model.negative):
            counts = np.zeros(bins)
            for chunk in np.array_split(np.arange(n), max(1, n // 1_000_000)):
                p = nb_posterior(model, prior, draw(params, chunk.size, rng))
                counts += np.histogram(p, bins=bins, range=(0.0, 1.0))[0]
            out.append(histogram_from_counts(counts))
        _REFERENCE_CACHE[key] = tuple(out)
    return _REFERENCE_CACHE[key]


def histogram_from_counts(counts):
    counts = np.asarray(counts, dtype=float)
    return Histogram(np.linspace(0.0, 1.0, counts.size + 1), counts / counts.sum())


def _try(fn: Callable[[], float]):
    try:
        return fn()
    except ContSweepError:
        return None


def _clip(est):
    return est.clipped


def _suite_known(cond: StudyCondition):
    """Study 1: quantifiers use the true class distributions."""
    model = cond.true_model()
    t_win = decision_boundaries(model, TRADITIONAL_P_DELTA)
    opt = optimal_pdelta(model, cond.n_test)
    h_pos, h_neg = reference_histograms(model, 0.5, derive_seed(cond.master_seed, cond.study, -1,
                                                                *_model_key(cond)))

    def run(test: ScoreSet):
        post = nb_posterior(model, 0.5, test.scores)
        return {
            "O-CS": _try(lambda: _clip(continuous_sweep(model, test, opt.window))),
            "T-CS": _try(lambda: _clip(continuous_sweep(model, test, t_win))),
            "O-MS": _try(lambda: _clip(median_sweep(model, test, opt.p_delta_star))),
            "T-MS": _try(lambda: _clip(median_sweep(model, test, TRADITIONAL_P_DELTA))),
            "SLD": _try(lambda: _clip(sld(0.5, post))),
            "DyS": _try(lambda: _clip(dys(h_pos, h_neg, histogram(post, DYS_BINS)))),
        }
    return run, opt.p_delta_star


def _model_key(cond):
    # integer key of the class-distribution parameters, for the reference-sample seed
    return tuple(int(round(v * 1000)) for v in (cond.sigma_plus, cond.sigma_minus, cond.skew))


def _cs_pair(model_fit, test, n_test, want_o=True, want_t=True, need_p=False):
    """Optimal and traditional Continuous Sweep with a fitted model; returns (O, T, p_star)."""
    if model_fit is None:
        return None, None, None
    opt = _try(lambda: optimal_pdelta(model_fit, n_test)) if (want_o or need_p) else None
    o = t = None
    if want_o and opt is not None:
        o = _try(lambda: _clip(continuous_sweep(model_fit, test, opt.window)))
    if want_t:
        t = _try(lambda: _clip(continuous_sweep(model_fit, test,
                                                decision_boundaries(model_fit, TRADITIONAL_P_DELTA))))
    return o, t, None if opt is None else opt.p_delta_star


def _baselines(model_true, cond, train: LabeledScores, test: ScoreSet):
    # scores become probabilities through the true densities at the training prevalence
    prior = cond.alpha_train
    post_train = nb_posterior(model_true, prior, train.scores)
    post_test = nb_posterior(model_true, prior, test.scores)
    pos = post_train[train.labels == 1]
    neg = post_train[train.labels == -1]
    return {
        "SLD": _try(lambda: _clip(sld(prior, post_test))),
        "DyS": _try(lambda: _clip(dys(histogram(pos, DYS_BINS), histogram(neg, DYS_BINS),
                                      histogram(post_test, DYS_BINS)))),
    }


def _suite_fitted(cond: StudyCondition, names):
    """Studies 2 and 3: class distributions are estimated from a training set."""
    model_true = cond.true_model()
    want = set(names)
    if cond.study == 2:
        norm_o, norm_t = "O-CS", "T-CS"
    else:
        norm_o, norm_t = "O-CS (norm)", "T-CS (norm)"
    need_norm = bool(want & {norm_o, norm_t, "O-MS"})
    need_skew = bool(want & {"O-CS (skew)", "T-CS (skew)"})

    def run(test: ScoreSet, train: LabeledScores):
        out = {}
        p_norm = None
        if need_norm:
            norm = _try(lambda: ClassConditionalModel.fit(train, Family.NORMAL))
            out[norm_o], out[norm_t], p_norm = _cs_pair(norm, test, cond.n_test, norm_o in want,
                                                        norm_t in want, "O-MS" in want)
        if need_skew:
            skew = _try(lambda: ClassConditionalModel.fit(train, Family.SKEW_NORMAL))
            out["O-CS (skew)"], out["T-CS (skew)"], _ = _cs_pair(skew, test, cond.n_test,
                                                                 "O-CS (skew)" in want, "T-CS (skew)" in want)
        if "O-MS" in want:
            out["O-MS"] = None if p_norm is None else _try(lambda: _clip(median_sweep(train, test, p_norm)))
        if "T-MS" in want:
            out["T-MS"] = _try(lambda: _clip(median_sweep(train, test, TRADITIONAL_P_DELTA)))
        if want & {"SLD", "DyS"}:
            out.update(_baselines(model_true, cond, train, test))
        return out
    return run


def run_condition(cond: StudyCondition, quantifier_suite=None, keep_estimates: bool = False) -> ConditionResult:
    """Run all replications of one condition and summarize each quantifier.

    ``quantifier_suite`` optionally restricts the quantifiers reported (names
    from :data:`STUDY_QUANTIFIERS`). Failed estimates are excluded and counted.
    """
    names = STUDY_QUANTIFIERS[cond.study]
    if quantifier_suite is not None:
        unknown = set(quantifier_suite) - set(names)
        if unknown:
            raise InputError(f"quantifiers {sorted(unknown)} are not part of study {cond.study}")
        names = tuple(n for n in names if n in quantifier_suite)
    model = cond.true_model()
    collected = {n: [] for n in names}
    failures = dict.fromkeys(names, 0)
    p_opt = None
    if cond.study == 1:
        run_known, p_opt = _suite_known(cond)
    else:
        run_fitted = _suite_fitted(cond, names)
    for rep in range(cond.replications):
        test = generate_test_set(model, cond.alpha_test, cond.n_test, cond.seed(rep, 0))
        if cond.study == 1:
            est = run_known(test)
        else:
            train = generate_train_set(model, cond.alpha_train, cond.n_train, cond.seed(rep, 1))
            est = run_fitted(test, train)
        for n in names:
            if est[n] is None:
                failures[n] += 1
            else:
                collected[n].append(est[n])
    summaries = {n: summarize(collected[n], cond.alpha_test, failures[n]) for n in names}
    estimates = {n: np.asarray(v) for n, v in collected.items()} if keep_estimates else {}
    return ConditionResult(cond, summaries, estimates, p_opt)


def run_study(study_id: int, scale: str = "desk", master_seed: int = 0, replications: int | None = None,
              skews=None, conditions=None, quantifier_suite=None, workers: int = 1,
              progress=None) -> list[ConditionResult]:
    """Run a study's grid; ``skews`` / ``conditions`` (ordinals) select a subset."""
    conds = study_conditions(study_id, scale, master_seed, replications)
    if skews is not None:
        conds = [c for c in conds if c.skew in set(float(s) for s in skews)]
    if conditions is not None:
        keep = set(conditions)
        conds = [c for c in conds if c.index in keep]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_condition, conds, [quantifier_suite] * len(conds)))
    else:
        results = []
        for c in conds:
            results.append(run_condition(c, quantifier_suite))
            if progress is not None:
                progress(c)
    return results


# -- result files -----------------------------------------------------------

RESULT_FIELDS = ("study", "condition", "n_test", "n_train", "alpha_test", "alpha_train", "sigma_plus",
                 "sigma_minus", "mu_plus", "mu_minus", "skew", "replications", "master_seed",
                 "quantifier", "n_ok", "failures", "mean", "bias", "variance", "mse", "rmse")


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def _condition_fields(c: StudyCondition):
    return [c.study, c.index, c.n_test, "known" if c.n_train is None else c.n_train, c.alpha_test,
            "n/a" if c.alpha_train is None else c.alpha_train, c.sigma_plus, c.sigma_minus,
            c.mu_plus, c.mu_minus, c.skew, c.replications, c.master_seed]


def write_results_csv(path, results: list[ConditionResult]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_FIELDS)
        for r in results:
            for name, s in r.summaries.items():
                w.writerow([fmt(v) for v in _condition_fields(r.condition)]
                           + [name, s.n, s.failures] + [fmt(v) for v in (s.mean, s.bias, s.variance, s.mse, s.rmse)])


def write_comparison_csv(path, results: list[ConditionResult]):
    """Wide table: RMSE per quantifier per condition plus each RMSE minus the reference's."""
    if not results:
        raise InputError("no results to compare")
    study = results[0].condition.study
    ref = REFERENCE_QUANTIFIER[study]
    names = list(results[0].summaries)
    others = [n for n in names if n != ref]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["condition", "n_test", "n_train", "alpha_test", "alpha_train", "sigma_plus", "sigma_minus",
                    "skew"] + [f"rmse[{n}]" for n in names] + [f"rmse[{n}]-rmse[{ref}]" for n in others])
        for r in results:
            c = r.condition
            row = [c.index, c.n_test, "known" if c.n_train is None else c.n_train, c.alpha_test,
                   "n/a" if c.alpha_train is None else c.alpha_train, c.sigma_plus, c.sigma_minus, c.skew]
            row += [r.rmse(n) for n in names] + [r.rmse(n) - r.rmse(ref) for n in others]
            w.writerow([fmt(v) for v in row])


def read_results_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# -- score-file evaluation --------------------------------------------------

SCORE_FILE_SUITE = ("O-CS", "T-MS", "SLD", "DyS")
_ALL_FILE_METHODS = ("O-CS", "T-CS", "O-MS", "T-MS", "SLD", "DyS")


@dataclass(frozen=True)
class EstimateRow:
    test_set_id: str
    method: str
    estimate_raw: float | None
    estimate_clipped: float | None


def _smoothed_rae(est, truth, n_test):
    eps = 1.0 / (2.0 * n_test)
    return abs(est - truth) / max(truth, eps)


def evaluate_score_files(train_file, test_files, quantifier_suite=SCORE_FILE_SUITE, truths=None,
                         family=Family.SKEW_NORMAL):
    """Estimate the prevalence of each test score file.

    Continuous Sweep uses ``family`` fits of the training scores; SLD and DyS
    receive Naive-Bayes posteriors from the same fits at the training
    prevalence. ``truths`` maps test-set ids (file stems) or positions to the
    true prevalence. Returns ``(rows, metrics)``; ``metrics`` is ``None``
    without truths, else ``{method: {"MAE", "RMSE", "RAE", "n"}}``.
    """
    unknown = set(quantifier_suite) - set(_ALL_FILE_METHODS)
    if unknown:
        raise InputError(f"unsupported methods {sorted(unknown)}")
    train = read_train_csv(train_file)
    model = ClassConditionalModel.fit(train, family)
    prior = train.prevalence
    post_train = nb_posterior(model, prior, train.scores)
    h_pos = histogram(post_train[train.labels == 1], DYS_BINS)
    h_neg = histogram(post_train[train.labels == -1], DYS_BINS)
    t_win = _try(lambda: decision_boundaries(model, TRADITIONAL_P_DELTA))
    optimal = {}

    rows, per_method = [], {m: [] for m in quantifier_suite}
    for pos, path in enumerate(test_files):
        test = read_test_csv(path)
        set_id = Path(path).stem
        if test.n_test not in optimal:
            optimal[test.n_test] = optimal_pdelta(model, test.n_test)
        opt = optimal[test.n_test]
        post = nb_posterior(model, prior, test.scores)
        methods = {
            "O-CS": lambda: continuous_sweep(model, test, opt.window),
            "T-CS": lambda: continuous_sweep(model, test, t_win),
            "O-MS": lambda: median_sweep(train, test, opt.p_delta_star),
            "T-MS": lambda: median_sweep(train, test, TRADITIONAL_P_DELTA),
            "SLD": lambda: sld(prior, post),
            "DyS": lambda: dys(h_pos, h_neg, histogram(post, DYS_BINS)),
        }
        truth = None
        if truths is not None:
            truth = truths[set_id] if isinstance(truths, dict) else truths[pos]
        for m in quantifier_suite:
            est = _try(methods[m]) if m != "T-CS" or t_win is not None else None
            rows.append(EstimateRow(set_id, m, None if est is None else est.raw,
                                    None if est is None else est.clipped))
            if truth is not None and est is not None:
                per_method[m].append((est.clipped, float(truth), test.n_test))
    metrics = None
    if truths is not None:
        metrics = {}
        for m, vals in per_method.items():
            if not vals:
                metrics[m] = {"MAE": float("nan"), "RMSE": float("nan"), "RAE": float("nan"), "n": 0}
                continue
            e = np.array([v[0] for v in vals])
            t = np.array([v[1] for v in vals])
            rae = [_smoothed_rae(a, b, n) for a, b, n in vals]
            metrics[m] = {"MAE": float(np.mean(np.abs(e - t))), "RMSE": float(np.sqrt(np.mean((e - t) ** 2))),
                          "RAE": float(np.mean(rae)), "n": len(vals)}
    return rows, metrics


def write_estimates_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["test_set_id", "method", "estimate_raw", "estimate_clipped"])
        for r in rows:
            w.writerow([r.test_set_id, r.method, fmt(r.estimate_raw), fmt(r.estimate_clipped)])


def write_metrics_csv(path, metrics):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "n", "MAE", "RMSE", "RAE"])
        for m, d in metrics.items():
            w.writerow([m, d["n"], fmt(d["MAE"]), fmt(d["RMSE"]), fmt(d["RAE"])])


# -- Monte Carlo oracles ----------------------------------------------------

def monte_carlo_estimates(model: ClassConditionalModel, alpha: float, n_test: int, window, reps: int,
                          seed: int) -> np.ndarray:
    """Raw Continuous Sweep estimates over ``reps`` independent test sets."""
    out = np.empty(reps)
    for r in range(reps):
        test = generate_test_set(model, alpha, n_test, derive_seed(seed, r))
        out[r] = continuous_sweep(model, test, window).raw
    return out


def monte_carlo_variance(model: ClassConditionalModel, alpha: float, n_test: int, window, reps: int,
                         seed: int) -> float:
    """Unbiased sample variance of Continuous Sweep over simulated test sets."""
    if reps < 100:
        raise InputError("monte_carlo_variance needs at least 100 replications")
    return float(np.var(monte_carlo_estimates(model, alpha, n_test, window, reps, seed), ddof=1))
