"""Prevalence estimation with Continuous Sweep and its competitors.

Continuous Sweep averages the Adjusted Count over a window of decision
thresholds using parametric class-conditional score distributions; the window
can be chosen to minimize the estimator's analytic variance.
"""

from .baselines import Histogram, dys, histogram, nb_posterior, sld, topsoe
from .distributions import (ClassConditionalModel, DistributionParams, Family, cdf, fit, fit_normal_mle,
                            fit_skew_normal_mle, loglik, pdf, quantile, read_model, sample, survival,
                            write_model)
from .exceptions import (ContSweepError, DegenerateError, FitError, InputError, NoAdmissibleThresholdsError,
                         NoWindowError, NumericalError, OptimizationError, QuadratureError)
from .quantifiers import (TRADITIONAL_P_DELTA, GapProfile, Method, PrevalenceEstimate, ThresholdWindow,
                          adjusted_count, classify_count, continuous_sweep, decision_boundaries, median_sweep,
                          threshold_max, threshold_t50)
from .scores import LabeledScores, ScoreSet, read_test_csv, read_train_csv, write_test_csv, write_train_csv
from .simulation import (StudyCondition, evaluate_score_files, generate_test_set, generate_train_set,
                         monte_carlo_variance, run_condition, run_study, study_conditions)
from .theory import (PdeltaSolution, VarianceReport, ac_variance, cc_bias, cc_expectation, cc_variance,
                     cov_cc, cs_variance, optimal_pdelta, unbiased_prevalence)

__version__ = "0.1.0"
