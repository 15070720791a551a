"""Commit-message text view: tokenizer, stop words, suffix stemmer and a
bag-of-words vectorizer."""

import re
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .errors import EmptyVocabulary, IndexOutOfVocabulary

DEFAULT_MIN_DF = 2
DEFAULT_MAX_TERMS = 20000

DEFAULT_STOPWORDS = frozenset("""
a about above after again against all am an and any are as at be because been
before being below between both but by can could did do does doing down during
each few for from further had has have having he her here hers herself him
himself his how if in into is it its itself just me more most my myself no nor
not now of off on once only or other our ours ourselves out over own same she
should so some such than that the their theirs them themselves then there these
they this those through to too under until up very was we were what when where
which while who whom why will with would you your yours yourself yourselves
also etc via per may might must shall ok yes
""".split())

_SPLIT_RE = re.compile(r"[^a-z0-9]+")
_VOWELS = frozenset("aeiou")


def tokenize(message: str) -> List[str]:
    """Lowercase, split on non-alphanumerics, drop 1-char and all-digit tokens."""
    return [
        tok for tok in _SPLIT_RE.split(message.lower())
        if len(tok) >= 2 and not tok.isdigit()
    ]


def remove_stopwords(tokens: Sequence[str], stoplist) -> List[str]:
    return [tok for tok in tokens if tok not in stoplist]


def _strippable(stem: str) -> bool:
    return len(stem) >= 3 and any(ch in _VOWELS for ch in stem)


def _strip_once(token: str) -> str:
    if token.endswith("sses"):
        return token[:-2]
    if token.endswith("ies"):
        return token[:-2]
    if token.endswith("s") and not token.endswith("ss"):
        return token[:-1]
    if token.endswith("ing") and _strippable(token[:-3]):
        return token[:-3]
    if token.endswith("ed") and _strippable(token[:-2]):
        return token[:-2]
    return token


def stem(token: str) -> str:
    """Light suffix stripper.

    Each pass applies the first matching rule; passes repeat until nothing
    changes so that ``stem`` is idempotent ("fixeds" -> "fixed" -> "fix").

    >>> [stem(t) for t in ("classes", "flies", "overflows", "fixed", "ss")]
    ['class', 'fli', 'overflow', 'fix', 'ss']
    """
    while True:
        stripped = _strip_once(token)
        if stripped == token:
            return token
        token = stripped


def analyze(message: str, stoplist=DEFAULT_STOPWORDS) -> List[str]:
    """Full message pipeline: tokenize, remove stop words, stem."""
    return [stem(tok) for tok in remove_stopwords(tokenize(message), stoplist)]


def load_stoplist(path) -> frozenset:
    """Read a stop list: one lowercase word per line, ``#`` starts a comment."""
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            word = line.split("#", 1)[0].strip()
            if word:
                words.add(word.lower())
    return frozenset(words)


@dataclass(frozen=True)
class SparseVector:
    """Term counts keyed by vocabulary index; indices strictly increasing."""

    entries: Tuple[Tuple[int, float], ...] = ()

    def __post_init__(self):
        prev = -1
        for idx, value in self.entries:
            if idx <= prev:
                raise ValueError("SparseVector indices must be strictly increasing")
            if not value > 0:
                raise ValueError("SparseVector values must be positive")
            prev = idx

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def indices(self) -> List[int]:
        return [i for i, _ in self.entries]

    @property
    def values(self) -> List[float]:
        return [v for _, v in self.entries]

    def l1_norm(self) -> float:
        return float(sum(v for _, v in self.entries))

    def check_bounds(self, size: int) -> None:
        if self.entries and self.entries[-1][0] >= size:
            raise IndexOutOfVocabulary(
                f"feature index {self.entries[-1][0]} outside vocabulary of size {size}"
            )


def to_csr(vectors: Sequence[SparseVector], size: int) -> sp.csr_matrix:
    """Stack sparse vectors into an ``(n, size)`` CSR matrix."""
    indptr = [0]
    indices: List[int] = []
    data: List[float] = []
    for vec in vectors:
        vec.check_bounds(size)
        for idx, value in vec.entries:
            indices.append(idx)
            data.append(value)
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.asarray(data, dtype=float), np.asarray(indices, dtype=np.int64), np.asarray(indptr)),
        shape=(len(vectors), size),
    )


def from_csr_row(matrix, row: int) -> SparseVector:
    start, end = matrix.indptr[row], matrix.indptr[row + 1]
    pairs = sorted(zip(matrix.indices[start:end].tolist(), matrix.data[start:end].tolist()))
    return SparseVector(tuple((int(i), float(v)) for i, v in pairs if v > 0))


@dataclass(frozen=True)
class Vocabulary:
    """Stemmed, lowercase terms in index order with their document frequency."""

    terms: Tuple[str, ...]
    document_frequency: Tuple[int, ...]

    def __post_init__(self):
        if len(self.terms) != len(self.document_frequency):
            raise ValueError("terms and document_frequency differ in length")
        if len(set(self.terms)) != len(self.terms):
            raise ValueError("duplicate vocabulary terms")
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.terms)})

    @property
    def term_to_index(self) -> Dict[str, int]:
        return dict(self._index)

    @property
    def size(self) -> int:
        return len(self.terms)

    def __len__(self):
        return len(self.terms)

    def index(self, term: str) -> Optional[int]:
        return self._index.get(term)


def fit_vocabulary(corpora: Iterable[Sequence[str]], min_df: int = DEFAULT_MIN_DF,
                   max_terms: int = DEFAULT_MAX_TERMS) -> Vocabulary:
    """Keep terms with document frequency >= ``min_df``, at most ``max_terms``
    of them (highest df first, ties lexicographic), indexed in lexicographic
    order."""
    if min_df < 1 or max_terms < 1:
        raise ValueError("min_df and max_terms must be >= 1")
    df: Counter = Counter()
    for doc in corpora:
        df.update(set(doc))
    kept = [(term, count) for term, count in df.items() if count >= min_df]
    if not kept:
        raise EmptyVocabulary(f"no term reaches document frequency {min_df}")
    if len(kept) > max_terms:
        kept.sort(key=lambda tc: (-tc[1], tc[0]))
        kept = kept[:max_terms]
    kept.sort()
    return Vocabulary(tuple(t for t, _ in kept), tuple(c for _, c in kept))


def vectorize(tokens: Sequence[str], vocab: Vocabulary) -> SparseVector:
    """Count in-vocabulary tokens; unknown tokens are ignored."""
    counts: Counter = Counter()
    for tok in tokens:
        idx = vocab.index(tok)
        if idx is not None:
            counts[idx] += 1
    return SparseVector(tuple((idx, float(c)) for idx, c in sorted(counts.items())))


class MessageVectorizer(TransformerMixin, BaseEstimator):
    """Bag-of-words transformer over raw commit messages.

    Parameters
    ----------
    stopwords : iterable of str or None
        Stop list; ``None`` uses the built-in English list.
    min_df, max_terms : int
        Vocabulary pruning, see :func:`fit_vocabulary`.

    Attributes
    ----------
    vocabulary_ : Vocabulary
    """

    def __init__(self, stopwords=None, min_df=DEFAULT_MIN_DF, max_terms=DEFAULT_MAX_TERMS):
        self.stopwords = stopwords
        self.min_df = min_df
        self.max_terms = max_terms

    @property
    def stoplist_(self) -> frozenset:
        return DEFAULT_STOPWORDS if self.stopwords is None else frozenset(self.stopwords)

    def fit(self, messages, y=None):
        stoplist = self.stoplist_
        self.vocabulary_ = fit_vocabulary(
            (analyze(m, stoplist) for m in messages), self.min_df, self.max_terms
        )
        return self

    def vectors(self, messages) -> List[SparseVector]:
        if not hasattr(self, "vocabulary_"):
            raise NotFittedError("MessageVectorizer is not fitted yet")
        stoplist = self.stoplist_
        return [vectorize(analyze(m, stoplist), self.vocabulary_) for m in messages]

    def transform(self, messages):
        vecs = self.vectors(messages)
        return to_csr(vecs, self.vocabulary_.size)
