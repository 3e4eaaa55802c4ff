"""scikit-learn compatible wrappers around the native ensembles."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import unique_labels
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..errors import DegenerateLabels
from .ensemble import BoostConfig, ForestConfig, TreeEnsemble, train_boosted, train_forest


class _EnsembleClassifier(ClassifierMixin, BaseEstimator):

    def _train(self, X, y) -> TreeEnsemble:
        raise NotImplementedError

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_ = unique_labels(y)
        if self.classes_.size != 2:
            raise DegenerateLabels(f"binary labels required, got classes {self.classes_.tolist()}")
        self.n_features_in_ = X.shape[1]
        self.ensemble_ = self._train(X, (y == self.classes_[1]).astype(int))
        return self

    def decision_function(self, X):
        check_is_fitted(self, "ensemble_")
        return self.ensemble_.margin(check_array(X))

    def predict_proba(self, X):
        check_is_fitted(self, "ensemble_")
        p = self.ensemble_.predict_proba(check_array(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return self.classes_[(self.predict_proba(X)[:, 1] >= 0.5).astype(int)]


class RandomForestClassifier(_EnsembleClassifier):
    """Bagged Gini trees; ``predict_proba`` is the mean leaf class-1 fraction."""

    def __init__(self, n_trees=200, max_depth=8, mtry=None, min_leaf=2, random_state=42):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.mtry = mtry
        self.min_leaf = min_leaf
        self.random_state = random_state

    def _train(self, X, y):
        cfg = ForestConfig(self.n_trees, self.max_depth, self.mtry, self.min_leaf, self.random_state)
        return train_forest(X, y, cfg)


class GradientBoostedTreesClassifier(_EnsembleClassifier):
    """Newton-boosted regression trees on the logistic loss."""

    def __init__(self, n_rounds=300, max_depth=4, learning_rate=0.1, reg_lambda=1.0,
                 min_child_weight=1.0, random_state=42):
        self.n_rounds = n_rounds
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.reg_lambda = reg_lambda
        self.min_child_weight = min_child_weight
        self.random_state = random_state

    def _train(self, X, y):
        cfg = BoostConfig(self.n_rounds, self.max_depth, self.learning_rate, self.reg_lambda,
                          self.min_child_weight, self.random_state)
        return train_boosted(X, y, cfg)
