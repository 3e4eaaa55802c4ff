from .ensemble import (BOOSTED, FOREST, MODEL_FORMAT, BoostConfig, ForestConfig, TreeEnsemble, load_model,
                       logistic_loss, predict_proba, save_model, sigmoid, train_boosted, train_forest)
from .estimators import GradientBoostedTreesClassifier, RandomForestClassifier
from .tree import LEAF, DecisionTree

__all__ = [
    "BOOSTED", "FOREST", "LEAF", "MODEL_FORMAT", "BoostConfig", "DecisionTree", "ForestConfig",
    "GradientBoostedTreesClassifier", "RandomForestClassifier", "TreeEnsemble", "load_model",
    "logistic_loss", "predict_proba", "save_model", "sigmoid", "train_boosted", "train_forest",
]
