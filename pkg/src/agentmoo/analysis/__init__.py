from .forest import ForestParams, RegressionForest, feature_importance, fit_regression_forest
from .utest import UTestResult, mann_whitney_u, significant_gain

__all__ = [
    "ForestParams",
    "RegressionForest",
    "UTestResult",
    "feature_importance",
    "fit_regression_forest",
    "mann_whitney_u",
    "significant_gain",
]
