"""From-scratch base learners: multinomial Naive Bayes for the text view and
L2-regularized logistic regression for the code view."""

import math
from typing import Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .errors import (
    ConfigInvalid,
    DimensionMismatch,
    EmptyInput,
    IndexOutOfVocabulary,
    NonFiniteLoss,
    SingleClassInput,
)
from .textview import SparseVector, to_csr

DEFAULT_ALPHA = 1.0
DEFAULT_L2 = 1e-2
DEFAULT_LEARNING_RATE = 0.1
DEFAULT_EPOCHS = 500

CLASSES = np.array([0, 1])


def _check_labels(y) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError("labels must be one-dimensional")
    if y.size and not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    return y.astype(int)


def confidence(p):
    """Selection confidence shared by both learners: ``max(p, 1 - p)``."""
    return np.maximum(p, 1.0 - p)


class MultinomialNaiveBayes(ClassifierMixin, BaseEstimator):
    """Binary multinomial Naive Bayes over term counts with additive smoothing.

    Parameters
    ----------
    alpha : float, default 1.0
        Smoothing constant added to every term count (Laplace for 1.0).

    Attributes
    ----------
    class_log_prior_ : ndarray of shape (2,)
    feature_log_prob_ : ndarray of shape (2, n_features)
    """

    def __init__(self, alpha=DEFAULT_ALPHA):
        self.alpha = alpha

    def fit(self, X, y):
        if not self.alpha > 0:
            raise ConfigInvalid(f"alpha must be > 0, got {self.alpha}")
        X = sp.csr_matrix(X, dtype=float)
        y = _check_labels(y)
        if X.shape[0] == 0:
            raise EmptyInput("no training documents")
        if X.shape[0] != y.shape[0]:
            raise DimensionMismatch("X and y have different lengths")
        doc_counts = np.bincount(y, minlength=2)
        if (doc_counts == 0).any():
            raise SingleClassInput("Naive Bayes needs documents from both classes")

        n_terms = X.shape[1]
        term_counts = np.vstack([
            np.asarray(X[y == c].sum(axis=0)).ravel() for c in (0, 1)
        ])
        smoothed = term_counts + self.alpha
        self.class_log_prior_ = np.log(doc_counts / doc_counts.sum())
        self.feature_log_prob_ = np.log(smoothed) - np.log(
            smoothed.sum(axis=1, keepdims=True)
        )
        self.classes_ = CLASSES
        self.n_features_in_ = n_terms
        return self

    def _check_fitted(self):
        if not hasattr(self, "feature_log_prob_"):
            raise NotFittedError("MultinomialNaiveBayes is not fitted yet")

    def joint_log_likelihood(self, X) -> np.ndarray:
        self._check_fitted()
        X = sp.csr_matrix(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise IndexOutOfVocabulary(
                f"expected {self.n_features_in_} terms, got {X.shape[1]}"
            )
        return np.asarray(X @ self.feature_log_prob_.T) + self.class_log_prior_

    def predict_proba(self, X) -> np.ndarray:
        jll = self.joint_log_likelihood(X)
        top = jll.max(axis=1, keepdims=True)
        log_norm = top + np.log(np.exp(jll - top).sum(axis=1, keepdims=True))
        return np.exp(jll - log_norm)

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)


class LogisticRegressionGD(ClassifierMixin, BaseEstimator):
    """Binary logistic regression fitted by full-batch gradient descent.

    Minimizes mean cross-entropy + ``l2 / 2 * ||w||^2`` (bias unpenalized),
    starting from all-zero parameters. The penalty is applied as an exact
    proximal shrink after each gradient step, which keeps the iteration
    stable for arbitrarily large ``l2``. ``seed`` is unused by the
    deterministic solver and kept only as a recorded setting.

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
    intercept_ : float
    loss_curve_ : list of float
        Objective before training followed by its value after every epoch.
    """

    def __init__(self, l2=DEFAULT_L2, learning_rate=DEFAULT_LEARNING_RATE,
                 epochs=DEFAULT_EPOCHS, seed=0):
        self.l2 = l2
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.seed = seed

    def _validate_params(self):
        if not self.l2 >= 0:
            raise ConfigInvalid(f"l2 must be >= 0, got {self.l2}")
        if not self.learning_rate > 0:
            raise ConfigInvalid(f"learning_rate must be > 0, got {self.learning_rate}")
        if int(self.epochs) < 1:
            raise ConfigInvalid(f"epochs must be >= 1, got {self.epochs}")

    def fit(self, X, y):
        self._validate_params()
        X = np.asarray(X, dtype=float)
        y = _check_labels(y)
        if X.ndim != 2 or X.shape[0] == 0:
            raise EmptyInput("no training rows")
        if X.shape[0] != y.shape[0]:
            raise DimensionMismatch("X and y have different lengths")

        w = np.zeros(X.shape[1])
        b = 0.0
        lr, l2 = self.learning_rate, self.l2
        curve = [objective(w, b, X, y, l2)]
        for _ in range(int(self.epochs)):
            gw, gb = _cross_entropy_gradient(w, b, X, y)
            w = (w - lr * gw) / (1.0 + lr * l2)
            b = b - lr * gb
            loss = objective(w, b, X, y, l2)
            if not math.isfinite(loss) or not np.isfinite(w).all():
                raise NonFiniteLoss(
                    f"loss diverged after {len(curve)} epochs; try a smaller learning rate"
                )
            curve.append(loss)
        self.coef_ = w
        self.intercept_ = float(b)
        self.loss_curve_ = curve
        self.classes_ = CLASSES
        self.n_features_in_ = X.shape[1]
        return self

    def _check_fitted(self):
        if not hasattr(self, "coef_"):
            raise NotFittedError("LogisticRegressionGD is not fitted yet")

    def decision_function(self, X) -> np.ndarray:
        self._check_fitted()
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.coef_.shape[0]:
            raise DimensionMismatch(
                f"expected {self.coef_.shape[0]} features, got {X.shape[-1]}"
            )
        return X @ self.coef_ + self.intercept_

    def predict_proba(self, X) -> np.ndarray:
        p1 = expit(self.decision_function(X))
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)

    def gradient(self, X, y) -> Tuple[np.ndarray, float]:
        """Analytic gradient of the regularized objective at the current fit."""
        self._check_fitted()
        X = np.asarray(X, dtype=float)
        y = _check_labels(y)
        gw, gb = _cross_entropy_gradient(self.coef_, self.intercept_, X, y)
        return gw + self.l2 * self.coef_, gb


def objective(w, b, X, y, l2) -> float:
    """Mean cross-entropy plus ``l2 / 2 * ||w||^2``."""
    z = X @ w + b
    ce = np.mean(np.logaddexp(0.0, z) - y * z)
    return float(ce + 0.5 * l2 * np.dot(w, w))


def _cross_entropy_gradient(w, b, X, y):
    residual = expit(X @ w + b) - y
    n = X.shape[0]
    return X.T @ residual / n, float(residual.sum() / n)


# Functional interface over (vector, label) example lists.

def nb_train(examples: Sequence[Tuple[SparseVector, int]], V: int,
             alpha: float = DEFAULT_ALPHA) -> MultinomialNaiveBayes:
    if not examples:
        raise EmptyInput("no training documents")
    X = to_csr([vec for vec, _ in examples], V)
    y = [label for _, label in examples]
    return MultinomialNaiveBayes(alpha=alpha).fit(X, y)


def nb_predict_proba(model: MultinomialNaiveBayes, x: SparseVector) -> float:
    model._check_fitted()
    return float(model.predict_proba(to_csr([x], model.n_features_in_))[0, 1])


def lr_train(examples, l2: float = DEFAULT_L2, lr: float = DEFAULT_LEARNING_RATE,
             epochs: int = DEFAULT_EPOCHS, seed: int = 0) -> LogisticRegressionGD:
    if not examples:
        raise EmptyInput("no training rows")
    X = np.vstack([np.asarray(x, dtype=float) for x, _ in examples])
    y = [label for _, label in examples]
    return LogisticRegressionGD(l2=l2, learning_rate=lr, epochs=epochs, seed=seed).fit(X, y)


def lr_predict_proba(model: LogisticRegressionGD, x) -> float:
    x = np.asarray(x, dtype=float)
    return float(model.predict_proba(x.reshape(1, -1))[0, 1])


def lr_gradient(model: LogisticRegressionGD, examples):
    if not examples:
        raise EmptyInput("no rows")
    X = np.vstack([np.asarray(x, dtype=float) for x, _ in examples])
    y = [label for _, label in examples]
    return model.gradient(X, y)


def logistic_from_params(weights, bias, l2=DEFAULT_L2, learning_rate=DEFAULT_LEARNING_RATE,
                         epochs=DEFAULT_EPOCHS, seed=0) -> LogisticRegressionGD:
    """Build a fitted logistic model directly from its parameters."""
    model = LogisticRegressionGD(l2=l2, learning_rate=learning_rate, epochs=epochs, seed=seed)
    model.coef_ = np.asarray(weights, dtype=float)
    model.intercept_ = float(bias)
    model.loss_curve_ = []
    model.classes_ = CLASSES
    model.n_features_in_ = model.coef_.shape[0]
    return model


def naive_bayes_from_params(log_prior, log_likelihood, alpha=DEFAULT_ALPHA) -> MultinomialNaiveBayes:
    model = MultinomialNaiveBayes(alpha=alpha)
    model.class_log_prior_ = np.asarray(log_prior, dtype=float)
    model.feature_log_prob_ = np.asarray(log_likelihood, dtype=float)
    model.classes_ = CLASSES
    model.n_features_in_ = model.feature_log_prob_.shape[1]
    return model
