"""Conditional variance estimation by model-selection (MS) and convex (C)
aggregation of residual-based estimators, with a reject-option layer and a
seeded simulation harness."""

from ._errors import InputError, NumericalError
from .aggregate import (CandidateSet, convex_weights, empirical_risk, ms_select,
                        predict_convex, predict_ms, project_simplex)
from .reject import (EmpiricalCdf, RejectOutcome, RejectPredictor, calibrate_cdf, decide,
                     evaluate_reject, oracle_predictor)
from .harness import ExperimentConfig, run_oracle_reject, run_plugin_reject, run_table1
from .regressors import DictionaryConfig, TreeParams, build_dictionary, machine_names
from .rng import stream
from .simdata import (MODELS, Dataset, ModelSpec, draw_features, eval_f_star, eval_sigma2_star,
                      generate, split)
from .varpipe import (VariancePipeline, best_candidate_oracle, empirical_l2_error,
                      fit_variance, fit_variance_pair)

__version__ = "0.1.0"
