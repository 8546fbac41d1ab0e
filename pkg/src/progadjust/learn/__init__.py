from .forest import (ForestConfig, ScoreModel, Tree, estimate_r2_oos, estimate_rho,
                     evaluate_score, fit_forest, predict_score)

__all__ = ["ForestConfig", "ScoreModel", "Tree", "estimate_r2_oos", "estimate_rho",
           "evaluate_score", "fit_forest", "predict_score"]
