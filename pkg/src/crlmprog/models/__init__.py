from .ensemble import (
    DEFAULT_ENSEMBLE,
    FeatureImportanceReport,
    MultiHorizonModel,
    VotingEnsemble,
    feature_importance,
    fit_member,
    fit_model,
    fit_multi_horizon,
    fit_voting_ensemble,
    load_model,
    model_from_dict,
    save_model,
)
from .lasso import (
    ConvergenceReport,
    LassoLogisticModel,
    fit_lasso_cv,
    fit_lasso_logistic,
    kkt_violation,
    lambda_grid,
    lambda_max,
    lasso_objective,
    select_lambda_cv,
    stratified_folds,
)
from .tree import LEAF, ModelError, Tree, fit_tree
from .trees import CartModel, TreeEnsembleModel, fit_cart, fit_gradient_boosting, fit_random_forest, logistic_loss

__all__ = [
    "DEFAULT_ENSEMBLE",
    "LEAF",
    "CartModel",
    "ConvergenceReport",
    "FeatureImportanceReport",
    "LassoLogisticModel",
    "ModelError",
    "MultiHorizonModel",
    "Tree",
    "TreeEnsembleModel",
    "VotingEnsemble",
    "feature_importance",
    "fit_cart",
    "fit_gradient_boosting",
    "fit_lasso_cv",
    "fit_lasso_logistic",
    "fit_member",
    "fit_model",
    "fit_multi_horizon",
    "fit_random_forest",
    "fit_tree",
    "fit_voting_ensemble",
    "kkt_violation",
    "lambda_grid",
    "lambda_max",
    "lasso_objective",
    "load_model",
    "logistic_loss",
    "model_from_dict",
    "save_model",
    "select_lambda_cv",
    "stratified_folds",
]
