"""First-level forecasters: regression tree, random forest, gradient
boosting, and epsilon-insensitive support vector regression."""

from ._boosting import GradientBoosting
from ._forest import RandomForest
from ._svr import SupportVectorRegression, rbf_kernel
from ._tree import RegressionTree

__all__ = [
    "GradientBoosting",
    "RandomForest",
    "RegressionTree",
    "SupportVectorRegression",
    "rbf_kernel",
]
