"""``contsweep`` command line: fit, estimate, optimal-pdelta and simulate.

Exit codes: 0 ok, 2 input error, 3 numerical or fit failure, 4 degenerate
quantification (no admissible thresholds or window), 5 study failure under
``--strict``.
"""

from __future__ import annotations

import argparse
import csv
import shlex
import sys
from pathlib import Path

from . import simulation
from .baselines import dys, histogram, nb_posterior, sld
from .distributions import ClassConditionalModel, Family, loglik, read_model, write_model
from .exceptions import ContSweepError, DegenerateError, InputError, NumericalError
from .quantifiers import (TRADITIONAL_P_DELTA, adjusted_count_estimate, classify_count_estimate,
                          continuous_sweep, decision_boundaries, median_sweep, threshold_max)
from .scores import read_test_csv, read_train_csv
from .theory import cs_variance, optimal_pdelta

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL, EXIT_DEGENERATE, EXIT_STRICT = 0, 2, 3, 4, 5
METHODS = ("cc", "ac", "ms", "cs", "sld", "dys")


def _p_delta(text: str):
    if text in ("optimal", "traditional"):
        return text
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'optimal', 'traditional' or a number, got {text!r}")
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError("p-delta must lie in (0, 1)")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="contsweep", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="FILE", help="plain-text 'key = value' file; flags override it")
        p.add_argument("--out", metavar="DIR", default=".", help="output directory (default: .)")

    p = sub.add_parser("fit", help="fit per-class score distributions to a training CSV")
    p.add_argument("--train", required=True, metavar="CSV", help="training scores with columns score,label")
    p.add_argument("--family", default="skew-normal", choices=[f.value for f in Family])
    common(p)

    p = sub.add_parser("estimate", help="estimate the positive-class prevalence of test sets")
    p.add_argument("--train", metavar="CSV", help="training scores (required for ms, sld, dys)")
    p.add_argument("--params", metavar="FILE", help="fitted parameter file (instead of fitting --train)")
    p.add_argument("--test", required=True, nargs="+", metavar="CSV", help="one or more test score files")
    p.add_argument("--family", default="skew-normal", choices=[f.value for f in Family],
                   help="family fitted to --train when --params is absent")
    p.add_argument("--method", default="cs", choices=METHODS)
    p.add_argument("--p-delta", default="optimal", type=_p_delta,
                   help="optimal | traditional (0.25) | a value in (0, 1); cs and ms only")
    p.add_argument("--threshold", type=float, help="threshold for cc/ac (default: the MAX policy)")
    p.add_argument("--truth", metavar="CSV", help="optional test_set_id,prevalence file for error metrics")
    common(p)

    p = sub.add_parser("optimal-pdelta", help="variance-minimizing p-delta for a fitted model")
    p.add_argument("--params", required=True, metavar="FILE")
    p.add_argument("--n-test", required=True, type=int)
    p.add_argument("--alpha-plugin", type=float, default=0.5)
    p.add_argument("--curve", action="store_true", help="write the sampled variance curve to curve.csv")
    common(p)

    p = sub.add_parser("simulate", help="run a simulation study")
    p.add_argument("--study", required=True, type=int, choices=(1, 2, 3))
    p.add_argument("--scale", default="desk", choices=sorted(simulation.REPLICATIONS))
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--replications", type=int, help="override the replications implied by --scale")
    p.add_argument("--workers", type=int, default=1, help="worker processes (default: 1)")
    p.add_argument("--strict", action="store_true", help="exit 5 if any replication failed")
    p.add_argument("--quiet", action="store_true", help="no per-condition progress on stderr")
    common(p)
    return parser


def _config_argv(path: str, subparser: argparse.ArgumentParser) -> list[str]:
    """Translate a ``key = value`` config file into flags for ``subparser``."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    known = {}
    for action in subparser._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                known[opt[2:]] = action
    argv = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (t.strip() for t in line.split("=", 1))
        key = key.replace("_", "-")
        if key not in known or key == "config":
            raise InputError(f"{path}:{lineno}: unknown option {key!r}")
        action = known[key]
        if action.nargs == 0:
            if value.lower() in ("1", "true", "yes", "on"):
                argv.append(f"--{key}")
            elif value.lower() not in ("0", "false", "no", "off"):
                raise InputError(f"{path}:{lineno}: {key} expects true or false")
        else:
            argv.append(f"--{key}")
            argv.extend(shlex.split(value) if action.nargs == "+" else [value])
    return argv


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    # --config is located before the real parse so that it can supply required flags
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv[1:])
    subparsers = parser._subparsers._group_actions[0].choices
    if known.config and argv and argv[0] in subparsers:
        # config flags come first so that explicit flags win
        argv = [argv[0]] + _config_argv(known.config, subparsers[argv[0]]) + argv[1:]
    return parser.parse_args(argv)


def _require_files(*paths):
    for p in paths:
        if p is not None and not Path(p).is_file():
            raise InputError(f"{p}: no such file")


def _out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"{out}: {exc.strerror}") from exc
    return out


def _emit(record: dict, stream=None):
    stream = stream or sys.stdout
    for k, v in record.items():
        stream.write(f"{k} = {simulation.fmt(v)}\n")


# -- commands ---------------------------------------------------------------

def cmd_fit(args) -> int:
    _require_files(args.train)
    train = read_train_csv(args.train)
    family = Family.parse(args.family)
    model = ClassConditionalModel.fit(train, family)
    out = _out_dir(args.out) / "params.txt"
    extra = {}
    for label, params, scores in (("positive", model.positive, train.positives),
                                  ("negative", model.negative, train.negatives)):
        ll = loglik(params, scores)
        extra[label] = {"n": scores.size, "loglik": f"{ll:.17g}"}
    write_model(out, model, extra)
    sys.stdout.write(out.read_text(encoding="utf-8"))
    print(f"# written to {out}")
    return EXIT_OK


def _read_truths(path):
    truths = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or not {"test_set_id", "prevalence"} <= set(reader.fieldnames):
            raise InputError(f"{path}:1: header must contain test_set_id,prevalence")
        for lineno, row in enumerate(reader, start=2):
            try:
                truths[row["test_set_id"]] = float(row["prevalence"])
            except (TypeError, ValueError):
                raise InputError(f"{path}:{lineno}: bad prevalence {row['prevalence']!r}") from None
    return truths


def cmd_estimate(args) -> int:
    _require_files(args.train, args.params, args.truth, *args.test)
    method = args.method
    if method in ("ms", "sld", "dys") and args.train is None:
        raise InputError(f"--method {method} needs --train")
    if method == "cs" and args.train is None and args.params is None:
        raise InputError("--method cs needs --params or --train")
    train = read_train_csv(args.train) if args.train else None
    model = None
    if args.params:
        model = read_model(args.params)
    elif train is not None and method in ("cs", "sld", "dys"):
        model = ClassConditionalModel.fit(train, Family.parse(args.family))
    tests = [(Path(p).stem, read_test_csv(p)) for p in args.test]
    truths = _read_truths(args.truth) if args.truth else None

    rows = []
    for set_id, test in tests:
        record = {"test_set_id": set_id, "method": method, "n_test": test.n_test}
        if method in ("cs", "ms"):
            if args.p_delta == "optimal":
                if model is None:
                    # empirical MS has no variance model; borrow a fitted one for p-delta
                    model = ClassConditionalModel.fit(train, Family.parse(args.family))
                sol = optimal_pdelta(model, test.n_test)
                p_delta, window = sol.p_delta_star, sol.window
            else:
                p_delta = TRADITIONAL_P_DELTA if args.p_delta == "traditional" else args.p_delta
                window = decision_boundaries(model, p_delta) if method == "cs" else None
            if method == "cs":
                est = continuous_sweep(model, test, window)
                record.update(p_delta=p_delta, theta_l=window.theta_l, theta_r=window.theta_r,
                              n_thresholds=est.n_thresholds,
                              variance_at_plugin=cs_variance(model, 0.5, test.n_test, window).variance)
            else:
                est = median_sweep(train, test, p_delta)
                record.update(p_delta=p_delta, n_thresholds=est.n_thresholds)
        elif method in ("cc", "ac"):
            theta = args.threshold
            if theta is None:
                if train is None:
                    raise InputError(f"--method {method} needs --threshold or --train")
                theta = threshold_max(train)
            if method == "cc":
                est = classify_count_estimate(test, theta)
            else:
                source = model if model is not None else train
                if source is None:
                    raise InputError("--method ac needs --train or --params for its rates")
                est = adjusted_count_estimate(source, test, theta)
            record["threshold"] = theta
        else:
            prior = train.prevalence
            post = nb_posterior(model, prior, test.scores)
            if method == "sld":
                est = sld(prior, post)
                record["iterations"] = est.diagnostics["iterations"]
            else:
                pt = nb_posterior(model, prior, train.scores)
                est = dys(histogram(pt[train.labels == 1], simulation.DYS_BINS),
                          histogram(pt[train.labels == -1], simulation.DYS_BINS),
                          histogram(post, simulation.DYS_BINS))
        record.update(estimate_raw=est.raw, estimate_clipped=est.clipped)
        _emit(record)
        print()
        rows.append(simulation.EstimateRow(set_id, method, est.raw, est.clipped))

    out = _out_dir(args.out)
    simulation.write_estimates_csv(out / "estimates.csv", rows)
    if truths is not None:
        missing = [r.test_set_id for r in rows if r.test_set_id not in truths]
        if missing:
            raise InputError(f"{args.truth}: no prevalence for {missing[0]!r}")
        n = {sid: t.n_test for sid, t in tests}
        err = [r.estimate_clipped - truths[r.test_set_id] for r in rows]
        rae = [simulation._smoothed_rae(r.estimate_clipped, truths[r.test_set_id], n[r.test_set_id]) for r in rows]
        metrics = {method: {"n": len(rows), "MAE": sum(abs(e) for e in err) / len(err),
                            "RMSE": (sum(e * e for e in err) / len(err)) ** 0.5, "RAE": sum(rae) / len(rae)}}
        simulation.write_metrics_csv(out / "metrics.csv", metrics)
        _emit({f"{k}": v for k, v in metrics[method].items()})
    return EXIT_OK


def cmd_optimal_pdelta(args) -> int:
    _require_files(args.params)
    if args.n_test < 1:
        raise InputError("--n-test must be at least 1")
    model = read_model(args.params)
    sol = optimal_pdelta(model, args.n_test, alpha_plugin=args.alpha_plugin,
                         curve_points=101 if args.curve else 0)
    _emit({"p_delta_star": sol.p_delta_star, "variance": sol.variance_at_star,
           "theta_l": sol.window.theta_l, "theta_r": sol.window.theta_r, "g_max": sol.g_max,
           "n_test": args.n_test, "alpha_plugin": args.alpha_plugin})
    if args.curve:
        path = _out_dir(args.out) / "curve.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["p_delta", "variance"])
            for p, v in sol.variance_curve:
                w.writerow([simulation.fmt(float(p)), simulation.fmt(float(v))])
        print(f"# curve written to {path}")
    return EXIT_OK


def _ocs_wins(results):
    """Conditions where the reference quantifier has the lowest RMSE among the sweep quantifiers."""
    wins = 0
    for r in results:
        ref = simulation.REFERENCE_QUANTIFIER[r.condition.study]
        sweep = [n for n in r.summaries if "CS" in n or "MS" in n]
        wins += r.rmse(ref) <= min(r.rmse(n) for n in sweep)
    return wins


def cmd_simulate(args) -> int:
    out = _out_dir(args.out)

    def progress(cond):
        if not args.quiet:
            print(f"condition {cond.index} done", file=sys.stderr)

    results = simulation.run_study(args.study, args.scale, args.seed, replications=args.replications,
                                   workers=args.workers, progress=progress)
    groups = {"": results}
    if args.study == 3:
        groups = {}
        for r in results:
            groups.setdefault(f"_skew{r.condition.skew:g}", []).append(r)
    for suffix, group in groups.items():
        stem = f"study{args.study}{suffix}"
        simulation.write_results_csv(out / f"{stem}_results.csv", group)
        simulation.write_comparison_csv(out / f"{stem}_comparison.csv", group)
        ref = simulation.REFERENCE_QUANTIFIER[args.study]
        print(f"{stem}: {len(group)} conditions, {ref} lowest sweep RMSE in {_ocs_wins(group)}")
    failures = sum(s.failures for r in results for s in r.summaries.values())
    print(f"failed estimates: {failures}")
    if args.strict and failures:
        return EXIT_STRICT
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "estimate": cmd_estimate, "optimal-pdelta": cmd_optimal_pdelta,
            "simulate": cmd_simulate}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        return COMMANDS[args.command](args)
    except DegenerateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ContSweepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
