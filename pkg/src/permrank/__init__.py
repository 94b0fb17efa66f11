"""permrank: rank multivariate populations with directional permutation tests.

Pairwise dominance evidence comes from conditional Monte Carlo permutation
tests, combined across variables by nonparametric combination; the pairwise
matrix is multiplicity-adjusted and folded into a single global ranking.
"""

from .config import AnalysisConfig, run_analyze
from .dataset import (Dataset, DatasetView, VariableMeta, load_dataset,
                      orient, partition_views)
from .errors import (ConfigError, DataError, DegenerateAnalysisError,
                     PermrankError)
from .multiplicity import (AdjustedUpperMatrix, adjust_upper, holm_adjust,
                           shaffer_adjust, shaffer_multipliers,
                           shaffer_truth_counts)
from .npc import (Combiner, DirectionalPMatrix, DirectionalResults,
                  IteratedResult, NpcResult, PairDirectional, apply_combiner,
                  csample_equality_test, directional_matrices,
                  dominance_scores, iterated_combination, npc_pvalue,
                  pairwise_directional, rank_lambdas)
from .partial_tests import (AspectBundle, PartialStatSpec,
                            anderson_darling_dir, evaluate_bundle,
                            heterogeneity_diff, ks_dir, mean_diff,
                            median_diff, midrank_diff, quantile_diff,
                            scale_diff)
from .perm_engine import (PermutationPlan, StatisticTableau, cardinality,
                          cmc_run, cmc_run_csample, enumerate_orders,
                          generate_relabeling, significance_level,
                          significance_levels)
from .ranking import (GlobalRanking, build_upper, competition_ranks,
                      eliminate_subset_rows, global_ranking,
                      order_populations, rank_from_matrix, rank_scores,
                      threshold_S)
from .report import build_report, render_text, validate_report
from .simulate import SimulationScenario, run_simulate
from .time_to_time import (ProfileDataset, profile_global_test,
                           rank_curve_populations, time_partial_stat)

__version__ = "0.1.0"

__all__ = [
    "AdjustedUpperMatrix", "AnalysisConfig", "AspectBundle", "Combiner",
    "ConfigError", "SimulationScenario",
    "DataError", "Dataset", "DatasetView", "DegenerateAnalysisError",
    "DirectionalPMatrix", "DirectionalResults", "GlobalRanking",
    "IteratedResult", "NpcResult", "PairDirectional", "PartialStatSpec",
    "PermrankError", "PermutationPlan", "ProfileDataset", "StatisticTableau",
    "VariableMeta", "adjust_upper", "anderson_darling_dir", "apply_combiner",
    "build_report", "build_upper", "cardinality", "cmc_run",
    "cmc_run_csample", "competition_ranks", "csample_equality_test",
    "directional_matrices", "dominance_scores", "eliminate_subset_rows",
    "enumerate_orders", "evaluate_bundle", "generate_relabeling",
    "global_ranking", "heterogeneity_diff", "holm_adjust",
    "iterated_combination", "ks_dir", "load_dataset", "mean_diff",
    "median_diff", "midrank_diff", "npc_pvalue", "order_populations",
    "orient", "pairwise_directional", "partition_views",
    "profile_global_test", "quantile_diff", "rank_curve_populations",
    "rank_from_matrix", "rank_lambdas", "rank_scores", "render_text",
    "run_analyze", "run_simulate", "scale_diff", "shaffer_adjust",
    "shaffer_multipliers", "shaffer_truth_counts", "significance_level",
    "significance_levels", "threshold_S", "time_partial_stat",
    "validate_report",
]
