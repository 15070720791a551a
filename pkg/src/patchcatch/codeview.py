"""Code-change view: fixed-length lexical metrics computed from a parsed diff."""

import re
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .errors import DimensionMismatch, EmptyInput
from .ingest import FileDiff, parse_unified_diff

SCHEMA_VERSION = 1

STRUCTURAL_FEATURES = (
    "files_changed",
    "hunks_total",
    "lines_added",
    "lines_removed",
    "net_lines",
    "churn",
    "max_hunk_size",
    "touches_test_path",
    "binary_files",
)

DEFAULT_SENSITIVE_TOKENS = (
    "memcpy", "strcpy", "strncpy", "strcat", "sprintf", "malloc", "calloc",
    "realloc", "free", "kfree", "sizeof", "strlen", "lock", "unlock", "mutex",
    "overflow", "bounds", "length", "size", "null",
)

_WORD_RE = re.compile(r"[A-Za-z0-9_]+")
_PATH_SPLIT_RE = re.compile(r"[/\\]")


@dataclass(frozen=True)
class FeatureSchema:
    sensitive_tokens: Tuple[str, ...] = DEFAULT_SENSITIVE_TOKENS
    version: int = SCHEMA_VERSION

    def __post_init__(self):
        object.__setattr__(self, "sensitive_tokens", tuple(self.sensitive_tokens))
        if len(set(self.names)) != len(self.names):
            raise ValueError("feature names must be unique")

    @property
    def names(self) -> Tuple[str, ...]:
        names = list(STRUCTURAL_FEATURES)
        for tok in self.sensitive_tokens:
            names.append(f"{tok}_added")
            names.append(f"{tok}_removed")
        return tuple(names)

    @property
    def n_features(self) -> int:
        return len(STRUCTURAL_FEATURES) + 2 * len(self.sensitive_tokens)


def default_schema() -> FeatureSchema:
    return FeatureSchema()


def _is_test_path(path: str) -> bool:
    return any(seg in ("test", "tests") for seg in _PATH_SPLIT_RE.split(path))


def extract_code_features(diffs: Sequence[FileDiff], schema: FeatureSchema = None) -> np.ndarray:
    """Dense feature vector for one commit, ordered as ``schema.names``.

    All features are sums, maxima or flags over files, so the order of
    ``diffs`` does not matter.
    """
    if schema is None:
        schema = default_schema()
    out = np.zeros(schema.n_features, dtype=float)
    if not diffs:
        return out

    token_pos = {tok: i for i, tok in enumerate(schema.sensitive_tokens)}
    added_counts = np.zeros(len(schema.sensitive_tokens))
    removed_counts = np.zeros(len(schema.sensitive_tokens))
    hunks = added = removed = max_hunk = binary = 0
    touches_test = False

    for fd in diffs:
        hunks += len(fd.hunks)
        binary += int(fd.binary)
        touches_test = touches_test or _is_test_path(fd.path_new)
        for h in fd.hunks:
            a, r = h.added, h.removed
            added += a
            removed += r
            max_hunk = max(max_hunk, a + r)
        if token_pos:
            for text in fd.added_lines():
                for word in _WORD_RE.findall(text):
                    if word in token_pos:
                        added_counts[token_pos[word]] += 1
            for text in fd.removed_lines():
                for word in _WORD_RE.findall(text):
                    if word in token_pos:
                        removed_counts[token_pos[word]] += 1

    out[:9] = (
        len(diffs), hunks, added, removed, added - removed, added + removed,
        max_hunk, float(touches_test), binary,
    )
    out[9::2] = added_counts
    out[10::2] = removed_counts
    return out


class FeatureScaler(TransformerMixin, BaseEstimator):
    """Standardize each column with its population mean and std.

    Zero-variance columns get ``std_ = 1`` so they scale to 0 rather than NaN.
    Applying the transform twice is not the identity.
    """

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[0] == 0:
            raise EmptyInput("cannot fit a scaler on zero rows")
        self.mean_ = X.mean(axis=0)
        std = X.std(axis=0)
        std[std == 0] = 1.0
        self.std_ = std
        return self

    def transform(self, X):
        if not hasattr(self, "mean_"):
            raise NotFittedError("FeatureScaler is not fitted yet")
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.mean_.shape[0]:
            raise DimensionMismatch(
                f"expected {self.mean_.shape[0]} features, got {X.shape[-1]}"
            )
        return (X - self.mean_) / self.std_


def fit_scaler(rows) -> FeatureScaler:
    return FeatureScaler().fit(rows)


def apply_scaler(x, scaler: FeatureScaler) -> np.ndarray:
    return scaler.transform(x)


class CodeFeatureExtractor(TransformerMixin, BaseEstimator):
    """Stateless transformer: raw diff texts (or parsed diffs) to a dense
    ``(n_commits, n_features)`` array."""

    def __init__(self, sensitive_tokens=DEFAULT_SENSITIVE_TOKENS):
        self.sensitive_tokens = sensitive_tokens

    @property
    def schema_(self) -> FeatureSchema:
        return FeatureSchema(tuple(self.sensitive_tokens))

    def fit(self, X=None, y=None):
        return self

    def transform(self, X) -> np.ndarray:
        schema = self.schema_
        rows: List[np.ndarray] = []
        for item in X:
            diffs = parse_unified_diff(item) if isinstance(item, str) else item
            rows.append(extract_code_features(diffs, schema))
        if not rows:
            return np.zeros((0, schema.n_features))
        return np.vstack(rows)
