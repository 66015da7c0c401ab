import math

import numpy as np
import pytest

from contsweep import simulation as sim
from contsweep.distributions import ClassConditionalModel, DistributionParams
from contsweep.exceptions import DegenerateError, InputError
from contsweep.quantifiers import decision_boundaries
from contsweep.scores import ScoreSet, write_test_csv, write_train_csv
from contsweep.theory import cs_variance

N11 = ClassConditionalModel.normal(1, 1, 0, 1)


def test_grid_sizes():
    assert len(sim.study_conditions(1)) == 54
    assert len(sim.study_conditions(2)) == 324
    s3 = sim.study_conditions(3)
    assert len(s3) == 72 and {c.skew for c in s3} == {1.0, 2.0, 4.0}
    assert all(sum(c.skew == k for c in s3) == 24 for k in (1.0, 2.0, 4.0))
    assert all(c.n_train == 1000 and c.alpha_train == 0.5 for c in s3)
    assert sim.study_conditions(1, "paper")[0].replications == 10_000
    with pytest.raises(InputError):
        sim.study_conditions(4)


def test_generate_test_set_counts():
    t = sim.generate_test_set(N11, 0.3, 100, seed=1)
    assert t.n_test == 100
    same = sim.generate_test_set(N11, 0.5, 1000, seed=2)
    assert np.array_equal(same.scores, sim.generate_test_set(N11, 0.5, 1000, seed=2).scores)
    sep = ClassConditionalModel.normal(100, 1, 0, 1)
    assert np.count_nonzero(sim.generate_test_set(sep, 0.3, 100, 3).scores > 50) == 30
    assert np.count_nonzero(sim.generate_test_set(sep, 0.0, 100, 3).scores > 50) == 0


def test_generate_train_set_counts():
    assert sim.generate_train_set(N11, 0.5, 100, 1).positives.size == 50
    t = sim.generate_train_set(N11, 0.4, 1000, 2)
    assert t.positives.size == 400
    assert np.array_equal(t.scores, sim.generate_train_set(N11, 0.4, 1000, 2).scores)
    with pytest.raises(InputError):
        sim.generate_train_set(N11, 0.001, 100, 3)


def test_derive_seed_stable():
    assert sim.derive_seed(7, 1, 3, 5) == sim.derive_seed(7, 1, 3, 5)
    assert sim.derive_seed(7, 1, 3, 5) != sim.derive_seed(7, 1, 5, 3)
    assert 0 <= sim.derive_seed(0) < 2**64
    assert sim.derive_seed(7, -1) == sim.derive_seed(7, 2**64 - 1)
    big = max(sim.derive_seed(k) for k in range(64))
    assert big >= 2**63 and 0 <= sim.derive_seed(big, 1) < 2**64


def test_summarize_identities():
    rng = np.random.default_rng(0)
    e = rng.uniform(size=500)
    s = sim.summarize(e, 0.4)
    assert s.mse == pytest.approx(s.bias**2 + s.variance, abs=1e-12)
    assert s.rmse == math.sqrt(s.mse)
    one = sim.summarize([0.7], 0.5)
    assert one.variance == 0.0 and one.bias == pytest.approx(0.2)
    # adding a zero-error replication never increases RMSE
    assert sim.summarize(np.append(e, 0.4), 0.4).rmse <= s.rmse


def test_run_condition_deterministic_and_single_replication():
    cond = sim.study_conditions(1, replications=1, master_seed=3)[13]
    r = sim.run_condition(cond)
    assert all(s.variance == 0.0 and s.n == 1 for s in r.summaries.values())
    cond = sim.study_conditions(1, replications=30, master_seed=3)[40]
    a, b = sim.run_condition(cond), sim.run_condition(cond)
    assert a.summaries == b.summaries
    assert set(a.summaries) == set(sim.STUDY_QUANTIFIERS[1])


def test_run_condition_t_cs_unbiased():
    cond = [c for c in sim.study_conditions(1, replications=2000, master_seed=1)
            if c.n_test == 1000 and c.sigma_plus == c.sigma_minus == 1.0 and c.alpha_test == 0.5][0]
    r = sim.run_condition(cond, ("T-CS",), keep_estimates=True)
    e = r.estimates["T-CS"]
    assert abs(e.mean() - 0.5) < 3 * e.std(ddof=1) / math.sqrt(e.size)


def test_run_condition_fitted_studies_smoke():
    for study, idx in ((2, 0), (3, 70)):
        cond = sim.study_conditions(study, replications=3, master_seed=2)[idx]
        r = sim.run_condition(cond)
        assert set(r.summaries) == set(sim.STUDY_QUANTIFIERS[study])
        assert all(s.n + s.failures == 3 for s in r.summaries.values())


def test_failures_are_counted(monkeypatch):
    calls = {"n": 0}
    real = sim.continuous_sweep

    def flaky(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] % 3 == 0:
            raise DegenerateError("forced")
        return real(*args, **kwargs)

    monkeypatch.setattr(sim, "continuous_sweep", flaky)
    cond = sim.study_conditions(1, replications=6, master_seed=0)[0]
    r = sim.run_condition(cond, ("O-CS", "T-CS"))
    total = sum(s.failures for s in r.summaries.values())
    assert total == 4 and all(s.n + s.failures == 6 for s in r.summaries.values())


def test_quantifier_suite_validation():
    with pytest.raises(InputError):
        sim.run_condition(sim.study_conditions(1, replications=1)[0], ("SVM",))


def test_results_csv_round_trip(tmp_path):
    results = sim.run_study(1, replications=2, master_seed=4, conditions=[0, 1])
    path = tmp_path / "r.csv"
    sim.write_results_csv(path, results)
    rows = sim.read_results_csv(path)
    assert len(rows) == 2 * 6
    assert rows[0]["n_train"] == "known" and rows[0]["alpha_train"] == "n/a"
    assert float(rows[0]["rmse"]) == results[0].summaries[rows[0]["quantifier"]].rmse
    sim.write_comparison_csv(tmp_path / "c.csv", results)
    header = (tmp_path / "c.csv").read_text().splitlines()[0]
    assert "rmse[T-MS]-rmse[O-CS]" in header


def _score_files(tmp_path, model, n_sets=3):
    train = sim.generate_train_set(model, 0.5, 1000, 11)
    write_train_csv(tmp_path / "train.csv", train)
    paths, truths = [], {}
    for i, a in enumerate((0.2, 0.5, 0.8)[:n_sets]):
        p = tmp_path / f"set{i}.csv"
        write_test_csv(p, sim.generate_test_set(model, a, 250, 20 + i))
        paths.append(p)
        truths[f"set{i}"] = sim._positive_count(a, 250) / 250
    return train, paths, truths


def test_evaluate_score_files(tmp_path):
    model = ClassConditionalModel(DistributionParams.skew_normal(1, 1, 2), DistributionParams.skew_normal(-1, 1, 2))
    _, paths, truths = _score_files(tmp_path, model)
    rows, metrics = sim.evaluate_score_files(tmp_path / "train.csv", paths)
    assert metrics is None and len(rows) == 3 * len(sim.SCORE_FILE_SUITE)
    rows, metrics = sim.evaluate_score_files(tmp_path / "train.csv", paths, truths=truths)
    assert set(metrics) == set(sim.SCORE_FILE_SUITE)
    for m in metrics.values():
        assert m["n"] == 3 and 0 <= m["MAE"] <= m["RMSE"] < 0.1
    sim.write_estimates_csv(tmp_path / "est.csv", rows)
    assert (tmp_path / "est.csv").read_text().startswith("test_set_id,method,estimate_raw,estimate_clipped\n")


def test_evaluate_score_files_dys_on_positives(tmp_path):
    train = sim.generate_train_set(N11, 0.5, 400, 5)
    write_train_csv(tmp_path / "train.csv", train)
    write_test_csv(tmp_path / "pos.csv", ScoreSet(train.positives))
    rows, _ = sim.evaluate_score_files(tmp_path / "train.csv", [tmp_path / "pos.csv"], ("DyS",))
    assert rows[0].estimate_raw == pytest.approx(1.0, abs=1e-5)


def test_perfect_estimates_give_zero_metrics(tmp_path, monkeypatch):
    _, paths, truths = _score_files(tmp_path, N11, n_sets=2)
    rows, _ = sim.evaluate_score_files(tmp_path / "train.csv", paths, ("T-MS",))
    exact = {r.test_set_id: r.estimate_clipped for r in rows}
    _, metrics = sim.evaluate_score_files(tmp_path / "train.csv", paths, ("T-MS",), truths=exact)
    assert metrics["T-MS"]["MAE"] == metrics["T-MS"]["RMSE"] == metrics["T-MS"]["RAE"] == 0.0


def test_evaluate_score_files_bad_row(tmp_path):
    _score_files(tmp_path, N11, n_sets=1)
    bad = tmp_path / "bad.csv"
    bad.write_text("score\n0.1\nnope\n", encoding="utf-8")
    with pytest.raises(InputError, match=r"bad\.csv:3"):
        sim.evaluate_score_files(tmp_path / "train.csv", [bad])


def test_monte_carlo_variance_properties():
    w = decision_boundaries(N11, 0.25)
    v100 = sim.monte_carlo_variance(N11, 0.5, 100, w, 1500, seed=8)
    assert v100 == sim.monte_carlo_variance(N11, 0.5, 100, w, 1500, seed=8)
    v200 = sim.monte_carlo_variance(N11, 0.5, 200, w, 1500, seed=9)
    assert v200 / v100 == pytest.approx(0.5, rel=0.15)
    assert v100 == pytest.approx(cs_variance(N11, 0.5, 100, w).variance, rel=0.12)
    with pytest.raises(InputError):
        sim.monte_carlo_variance(N11, 0.5, 100, w, 50, seed=1)


def test_true_model_skew_interpretation():
    c = sim.study_conditions(3)[0]
    m = c.true_model()
    assert m.positive == DistributionParams.skew_normal(1.0, c.sigma_plus, c.skew)
    assert m.negative.shape == c.skew
