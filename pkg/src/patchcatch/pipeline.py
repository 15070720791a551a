"""End-to-end estimator over :class:`~patchcatch.ingest.Commit` records."""

from typing import List, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .codeview import DEFAULT_SENSITIVE_TOKENS, CodeFeatureExtractor, FeatureScaler
from .cotrain import (
    CoTrainConfig,
    LabeledPool,
    TrainLog,
    TwoViewExample,
    cotrain,
    fit_views,
)
from .errors import ConfigInvalid, SingleClassLabeledInput
from .ingest import Commit
from .learners import DEFAULT_ALPHA, DEFAULT_EPOCHS, DEFAULT_L2, DEFAULT_LEARNING_RATE
from .textview import DEFAULT_MAX_TERMS, DEFAULT_MIN_DF, MessageVectorizer


class SecurityPatchClassifier(ClassifierMixin, BaseEstimator):
    """Classify commits as security patches from message text and diff.

    Commits whose label is ``None`` (or ``-1`` in ``y``) form the unlabeled
    set used for co-training; with ``use_unlabeled=False`` or no unlabeled
    commits, each view is trained once on the labeled commits.

    The vocabulary and the code-feature scaler never look at labels. With
    ``feature_fit="all"`` they are fitted on every commit passed to ``fit``,
    so terms that only occur in unlabeled messages can still be learned from
    pseudo-labels; ``feature_fit="labeled"`` restricts them to labeled
    commits.

    Attributes
    ----------
    vectorizer_ : MessageVectorizer
    extractor_ : CodeFeatureExtractor
    scaler_ : FeatureScaler
    text_estimator_ : MultinomialNaiveBayes
    code_estimator_ : LogisticRegressionGD
    train_log_ : TrainLog
    """

    def __init__(self, stopwords=None, min_df=DEFAULT_MIN_DF, max_terms=DEFAULT_MAX_TERMS,
                 sensitive_tokens=DEFAULT_SENSITIVE_TOKENS, alpha=DEFAULT_ALPHA, l2=DEFAULT_L2,
                 learning_rate=DEFAULT_LEARNING_RATE, epochs=DEFAULT_EPOCHS, iterations=30,
                 pool_size=75, positives=1, negatives=3, min_confidence=0.6, seed=0,
                 threshold=0.5, use_unlabeled=True, feature_fit="all"):
        self.stopwords = stopwords
        self.min_df = min_df
        self.max_terms = max_terms
        self.sensitive_tokens = sensitive_tokens
        self.alpha = alpha
        self.l2 = l2
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.iterations = iterations
        self.pool_size = pool_size
        self.positives = positives
        self.negatives = negatives
        self.min_confidence = min_confidence
        self.seed = seed
        self.threshold = threshold
        self.use_unlabeled = use_unlabeled
        self.feature_fit = feature_fit

    def cotrain_config(self) -> CoTrainConfig:
        return CoTrainConfig(
            iterations=self.iterations, pool_size=self.pool_size, positives=self.positives,
            negatives=self.negatives, min_confidence=self.min_confidence, seed=self.seed,
            alpha=self.alpha, l2=self.l2, learning_rate=self.learning_rate, epochs=self.epochs,
        ).validate()

    def _check_threshold(self):
        if not 0 < self.threshold < 1:
            raise ConfigInvalid(f"threshold must lie in (0, 1), got {self.threshold}")

    def fit(self, commits: Sequence[Commit], y=None):
        cfg = self.cotrain_config()
        self._check_threshold()
        if self.feature_fit not in ("all", "labeled"):
            raise ConfigInvalid(f"feature_fit must be 'all' or 'labeled', got {self.feature_fit!r}")
        commits = list(commits)
        labels = [c.label for c in commits] if y is None else [
            None if v is None or int(v) < 0 else int(v) for v in y
        ]
        labeled = [c for c, lab in zip(commits, labels) if lab is not None]
        unlabeled = [c for c, lab in zip(commits, labels) if lab is None]
        y_lab = [lab for lab in labels if lab is not None]
        if len(set(y_lab)) < 2:
            raise SingleClassLabeledInput("labeled commits must contain both classes")

        basis = commits if self.feature_fit == "all" else labeled
        self.vectorizer_ = MessageVectorizer(self.stopwords, self.min_df, self.max_terms)
        self.vectorizer_.fit([c.message for c in basis])
        self.extractor_ = CodeFeatureExtractor(tuple(self.sensitive_tokens))
        self.scaler_ = FeatureScaler().fit(self.extractor_.transform([c.diff for c in basis]))

        human = self.featurize(labeled, y_lab)
        n_terms = self.vectorizer_.vocabulary_.size
        if unlabeled and self.use_unlabeled:
            self.text_estimator_, self.code_estimator_, self.train_log_ = cotrain(
                human, self.featurize(unlabeled), cfg, n_terms
            )
        else:
            pool = LabeledPool(human)
            self.text_estimator_, self.code_estimator_ = fit_views(pool.examples, n_terms, cfg)
            self.train_log_ = TrainLog(pool=pool)
        self.classes_ = np.array([0, 1])
        return self

    def featurize(self, commits: Sequence[Commit], labels: Optional[Sequence] = None) -> List[TwoViewExample]:
        """Both views of each commit; code features are scaled."""
        if not hasattr(self, "scaler_"):
            raise NotFittedError("SecurityPatchClassifier is not fitted yet")
        commits = list(commits)
        if not commits:
            return []
        text = self.vectorizer_.vectors([c.message for c in commits])
        code = self.scaler_.transform(self.extractor_.transform([c.diff for c in commits]))
        if labels is None:
            labels = [None] * len(commits)
        return [
            TwoViewExample(c.id, t, row, lab)
            for c, t, row, lab in zip(commits, text, code, labels)
        ]

    def view_proba(self, commits: Sequence[Commit]) -> np.ndarray:
        """``(n, 2)`` class-1 probabilities: column 0 text view, column 1 code view."""
        if not hasattr(self, "text_estimator_"):
            raise NotFittedError("SecurityPatchClassifier is not fitted yet")
        commits = list(commits)
        if not commits:
            return np.zeros((0, 2))
        X_text = self.vectorizer_.transform([c.message for c in commits])
        X_code = self.scaler_.transform(self.extractor_.transform([c.diff for c in commits]))
        return np.column_stack([
            self.text_estimator_.predict_proba(X_text)[:, 1],
            self.code_estimator_.predict_proba(X_code)[:, 1],
        ])

    def predict_proba(self, commits: Sequence[Commit]) -> np.ndarray:
        p = self.view_proba(commits).mean(axis=1)
        return np.column_stack([1.0 - p, p])

    def predict(self, commits: Sequence[Commit]) -> np.ndarray:
        self._check_threshold()
        return (self.predict_proba(commits)[:, 1] >= self.threshold).astype(int)
