"""Fast (conditional) independence testing with decision-tree regression."""

from .core import Dataset, SeedStream, concat_features, mse, permute_rows, split_train_test
from .dtree import RegressionTree, TreeParams, cross_validate, fit_tree, predict
from .fit import FitConfig, TestOutcome, auto_test, fit_test, fit_test_unconditional
from .stats import aupc, bootstrap_one_tailed_p, ks_uniform_p, one_sample_t, one_tailed_p, t_cdf

__all__ = [
    "Dataset", "SeedStream", "concat_features", "mse", "permute_rows", "split_train_test",
    "RegressionTree", "TreeParams", "cross_validate", "fit_tree", "predict",
    "FitConfig", "TestOutcome", "auto_test", "fit_test", "fit_test_unconditional",
    "aupc", "bootstrap_one_tailed_p", "ks_uniform_p", "one_sample_t", "one_tailed_p", "t_cdf",
]
__version__ = "0.1.0"
