"""scikit-learn style wrappers around the functional core.

ConstrainedLasso fits at a fixed penalty, ConstrainedLassoCV picks the
penalty by cross-validation, StabilitySelector exposes subsample
selection frequencies as a feature selector. X is an already-built
design matrix (e.g. a CorrectedDesign.matrix); y is the response.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin

from .constraints import ConstraintSpec, RegressionData
from .selection import cv_select_lambda, refit_on_support, stability_select
from .solver import SolverConfig, solve_constrained_lasso
from .validation import check_matrix, check_vector


def _make_constraint(constraint, p: int) -> ConstraintSpec:
    if isinstance(constraint, ConstraintSpec):
        if constraint.p != p:
            raise ValueError(f"constraint expects p={constraint.p}, design has p={p}")
        return constraint
    if constraint is None or (isinstance(constraint, str) and constraint == "sum_zero"):
        return ConstraintSpec.sum_zero(p)
    if isinstance(constraint, str):
        raise ValueError(f"unknown constraint {constraint!r}; use 'sum_zero', an array, or a ConstraintSpec")
    return ConstraintSpec.from_matrix(np.asarray(constraint, dtype=float))


def _validate_xy(X, y):
    X = check_matrix(X, "X")
    y = check_vector(y, length=X.shape[0], name="y")
    return X, y


class ConstrainedLasso(RegressorMixin, BaseEstimator):
    """l1-penalized least squares under C^T beta = 0 at a fixed penalty.

    Parameters mirror the solver: lam is the penalty level, constraint is
    "sum_zero" (default), a p x r array, or a ConstraintSpec.
    """

    def __init__(self, lam=0.1, constraint="sum_zero", max_iter=10000, tol=1e-7, polish=True):
        self.lam = lam
        self.constraint = constraint
        self.max_iter = max_iter
        self.tol = tol
        self.polish = polish

    def _config(self) -> SolverConfig:
        return SolverConfig(
            max_iter=self.max_iter, tol_primal=self.tol, tol_dual=self.tol, polish=self.polish
        )

    def fit(self, X, y):
        X, y = _validate_xy(X, y)
        spec = _make_constraint(self.constraint, X.shape[1])
        data = RegressionData(design=X, response=y, constraint=spec)
        result = solve_constrained_lasso(data, self.lam, self._config())
        self.coef_ = np.asarray(result.beta_hat)
        self.n_iter_ = result.iterations
        self.kkt_gap_ = result.kkt_gap
        self.objective_ = result.objective
        self.fit_result_ = result
        self.constraint_ = spec
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        X = check_matrix(X, "X")
        return X @ self.coef_


class ConstrainedLassoCV(RegressorMixin, BaseEstimator):
    """ConstrainedLasso with the penalty chosen by k-fold cross-validation."""

    def __init__(
        self,
        constraint="sum_zero",
        folds=5,
        num=30,
        ratio=0.01,
        seed=0,
        max_iter=10000,
        tol=1e-7,
        polish=True,
    ):
        self.constraint = constraint
        self.folds = folds
        self.num = num
        self.ratio = ratio
        self.seed = seed
        self.max_iter = max_iter
        self.tol = tol
        self.polish = polish

    def fit(self, X, y, groups=None):
        X, y = _validate_xy(X, y)
        spec = _make_constraint(self.constraint, X.shape[1])
        data = RegressionData(design=X, response=y, constraint=spec)
        config = SolverConfig(
            max_iter=self.max_iter, tol_primal=self.tol, tol_dual=self.tol, polish=self.polish
        )
        self.lam_, self.cv_curve_ = cv_select_lambda(
            data, folds=self.folds, num=self.num, ratio=self.ratio,
            seed=self.seed, groups=groups, config=config,
        )
        result = solve_constrained_lasso(data, self.lam_, config)
        self.coef_ = np.asarray(result.beta_hat)
        self.kkt_gap_ = result.kkt_gap
        self.fit_result_ = result
        self.constraint_ = spec
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        X = check_matrix(X, "X")
        return X @ self.coef_


class StabilitySelector(TransformerMixin, BaseEstimator):
    """Feature selection by stability of the constrained lasso.

    fit() runs the subsample/CV/refit protocol; transform() keeps only
    the columns whose selection frequency reaches the threshold.
    """

    def __init__(
        self,
        constraint="sum_zero",
        num_bootstrap=100,
        subsample_size=None,
        threshold=0.6,
        folds=5,
        seed=0,
        num=30,
        ratio=0.01,
    ):
        self.constraint = constraint
        self.num_bootstrap = num_bootstrap
        self.subsample_size = subsample_size
        self.threshold = threshold
        self.folds = folds
        self.seed = seed
        self.num = num
        self.ratio = ratio

    def fit(self, X, y, groups=None):
        X, y = _validate_xy(X, y)
        spec = _make_constraint(self.constraint, X.shape[1])
        data = RegressionData(design=X, response=y, constraint=spec)
        self.report_ = stability_select(
            data,
            num_bootstrap=self.num_bootstrap,
            subsample_size=self.subsample_size,
            threshold=self.threshold,
            folds=self.folds,
            seed=self.seed,
            num=self.num,
            ratio=self.ratio,
            groups=groups,
        )
        self.frequencies_ = np.asarray(self.report_.selection_frequency)
        self.selected_ = np.asarray(self.report_.selected, dtype=np.int64)
        if self.selected_.size >= 2:
            self.refit_coef_ = refit_on_support(data, self.selected_)
        else:
            self.refit_coef_ = None
        self.n_features_in_ = X.shape[1]
        return self

    def get_support(self) -> np.ndarray:
        mask = np.zeros(self.n_features_in_, dtype=bool)
        mask[self.selected_] = True
        return mask

    def transform(self, X):
        X = check_matrix(X, "X")
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, expected {self.n_features_in_}")
        return X[:, self.selected_]
