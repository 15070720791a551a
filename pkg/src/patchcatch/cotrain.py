"""Two-view co-training: each view's learner pseudo-labels its most confident
unlabeled commits for the shared training pool."""

import enum
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .errors import ConfigInvalid, SingleClassLabeledInput
from .learners import (
    DEFAULT_ALPHA,
    DEFAULT_EPOCHS,
    DEFAULT_L2,
    DEFAULT_LEARNING_RATE,
    LogisticRegressionGD,
    MultinomialNaiveBayes,
    confidence,
)
from .rng import LCG64, sample_without_replacement
from .textview import SparseVector, to_csr, from_csr_row

logger = logging.getLogger(__name__)


class Provenance(str, enum.Enum):
    HUMAN = "human"
    TEXT = "pseudo_text_view"
    CODE = "pseudo_code_view"


@dataclass(frozen=True, eq=False)
class TwoViewExample:
    id: str
    text_vec: SparseVector
    code_vec: np.ndarray
    label: Optional[int] = None
    provenance: Provenance = Provenance.HUMAN

    def __eq__(self, other):
        if not isinstance(other, TwoViewExample):
            return NotImplemented
        return (
            self.id == other.id
            and self.text_vec == other.text_vec
            and np.array_equal(self.code_vec, other.code_vec)
            and self.label == other.label
            and self.provenance == other.provenance
        )

    __hash__ = None


@dataclass(frozen=True)
class CoTrainConfig:
    """Co-training and base-learner hyperparameters.

    ``pool_size = 0`` scores the whole unlabeled set every iteration instead
    of a replenished working pool.
    """

    iterations: int = 30
    pool_size: int = 75
    positives: int = 1
    negatives: int = 3
    min_confidence: float = 0.6
    seed: int = 0
    alpha: float = DEFAULT_ALPHA
    l2: float = DEFAULT_L2
    learning_rate: float = DEFAULT_LEARNING_RATE
    epochs: int = DEFAULT_EPOCHS

    def validate(self) -> "CoTrainConfig":
        problems = []
        if self.iterations < 1:
            problems.append("iterations must be >= 1")
        if self.positives < 0 or self.negatives < 0 or self.positives + self.negatives < 1:
            problems.append("positives + negatives must be >= 1 (each >= 0)")
        if self.pool_size != 0 and self.pool_size < self.positives + self.negatives:
            problems.append("pool_size must be 0 or >= positives + negatives")
        if not 0.5 <= self.min_confidence <= 1.0:
            problems.append("min_confidence must lie in [0.5, 1]")
        if not self.alpha > 0:
            problems.append("alpha must be > 0")
        if not self.l2 >= 0:
            problems.append("l2 must be >= 0")
        if not self.learning_rate > 0:
            problems.append("learning_rate must be > 0")
        if self.epochs < 1:
            problems.append("epochs must be >= 1")
        if problems:
            raise ConfigInvalid("; ".join(problems))
        return self

    def to_dict(self) -> dict:
        return asdict(self)


class LabeledPool:
    """Growing labeled set; ids are unique and human labels are never replaced."""

    def __init__(self, examples: Sequence[TwoViewExample] = ()):
        self.examples: List[TwoViewExample] = []
        self._by_id: Dict[str, TwoViewExample] = {}
        for ex in examples:
            self.add(ex)

    def add(self, example: TwoViewExample) -> None:
        if example.label not in (0, 1):
            raise ValueError(f"example {example.id!r} has no label")
        existing = self._by_id.get(example.id)
        if existing is not None:
            if existing.provenance is Provenance.HUMAN:
                raise ValueError(f"refusing to overwrite human label of {example.id!r}")
            raise ValueError(f"duplicate id {example.id!r} in labeled pool")
        self.examples.append(example)
        self._by_id[example.id] = example

    def __len__(self):
        return len(self.examples)

    def __contains__(self, example_id):
        return example_id in self._by_id

    def get(self, example_id) -> Optional[TwoViewExample]:
        return self._by_id.get(example_id)

    @property
    def labels(self) -> np.ndarray:
        return np.array([ex.label for ex in self.examples], dtype=int)

    def class_counts(self) -> Tuple[int, int]:
        labels = self.labels
        return int((labels == 0).sum()), int((labels == 1).sum())


@dataclass
class TrainLog:
    records: List[dict] = field(default_factory=list)
    # final labeled pool, kept in memory only
    pool: Optional[LabeledPool] = field(default=None, repr=False, compare=False)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in self.records)

    def digest(self) -> str:
        return hashlib.sha256(self.to_jsonl().encode("utf-8")).hexdigest()

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_jsonl())


def _text_matrix(examples: Sequence[TwoViewExample], n_terms: int):
    return to_csr([ex.text_vec for ex in examples], n_terms)


def _code_matrix(examples: Sequence[TwoViewExample]) -> np.ndarray:
    return np.vstack([np.asarray(ex.code_vec, dtype=float) for ex in examples])


def fit_views(pool: Sequence[TwoViewExample], n_terms: int, cfg: CoTrainConfig,
              cross_only: bool = False):
    """Fit the text learner and the code learner on a labeled pool.

    With ``cross_only`` each learner sees the human labels plus only the
    pseudo-labels chosen by the *other* view.
    """
    text_pool = code_pool = pool
    if cross_only:
        text_pool = [ex for ex in pool if ex.provenance is not Provenance.TEXT]
        code_pool = [ex for ex in pool if ex.provenance is not Provenance.CODE]
    nb = MultinomialNaiveBayes(alpha=cfg.alpha).fit(
        _text_matrix(text_pool, n_terms), [ex.label for ex in text_pool]
    )
    lr = LogisticRegressionGD(
        l2=cfg.l2, learning_rate=cfg.learning_rate, epochs=cfg.epochs, seed=cfg.seed
    ).fit(_code_matrix(code_pool), [ex.label for ex in code_pool])
    return nb, lr


def _select(examples, p1, n_pos, n_neg, min_conf) -> Dict[str, Tuple[int, float]]:
    """Up to ``n_pos`` confident positives and ``n_neg`` confident negatives,
    ranked by confidence then id."""
    conf = confidence(p1)
    ranked = sorted(
        (
            (-float(c), ex.id, int(p >= 0.5))
            for ex, p, c in zip(examples, p1, conf)
            if c >= min_conf
        )
    )
    chosen: Dict[str, Tuple[int, float]] = {}
    quota = {1: n_pos, 0: n_neg}
    for neg_conf, ex_id, label in ranked:
        if quota[label] > 0:
            chosen[ex_id] = (label, -neg_conf)
            quota[label] -= 1
    return chosen


def sample_pool(unlabeled: Sequence, u: int, seed: int) -> Tuple[list, list]:
    """Seeded uniform sample of ``u`` items without replacement; returns
    ``(pool, remainder)``. See :mod:`patchcatch.rng` for the generator."""
    return sample_without_replacement(unlabeled, u, LCG64(seed))


def cotrain(labeled, unlabeled: Sequence[TwoViewExample], cfg: CoTrainConfig,
            n_terms: int):
    """Run co-training and return ``(text_model, code_model, train_log)``.

    Labels on ``unlabeled`` are stripped before use, so hidden ground truth
    can never leak into training. ``n_terms`` is the text vocabulary size.
    """
    cfg.validate()
    pool = labeled if isinstance(labeled, LabeledPool) else LabeledPool(labeled)
    pool = LabeledPool(pool.examples)
    if not unlabeled:
        raise ConfigInvalid("co-training needs a non-empty unlabeled set")
    if 0 in pool.class_counts():
        raise SingleClassLabeledInput("labeled pool must contain both classes")
    seen = {ex.id for ex in pool.examples}
    for ex in unlabeled:
        if ex.id in seen:
            raise ConfigInvalid(f"id {ex.id!r} appears more than once across pools")
        seen.add(ex.id)

    remaining = [replace(ex, label=None) for ex in unlabeled]
    rng = LCG64(cfg.seed)
    u = cfg.pool_size
    if u == 0:
        work, remaining = remaining, []
    else:
        work, remaining = sample_without_replacement(remaining, u, rng)

    log = TrainLog()
    for it in range(1, cfg.iterations + 1):
        if not work:
            break
        nb, lr = fit_views(pool.examples, n_terms, cfg, cross_only=True)
        p_text = nb.predict_proba(_text_matrix(work, n_terms))[:, 1]
        p_code = lr.predict_proba(_code_matrix(work))[:, 1]
        by_text = _select(work, p_text, cfg.positives, cfg.negatives, cfg.min_confidence)
        by_code = _select(work, p_code, cfg.positives, cfg.negatives, cfg.min_confidence)

        decisions: Dict[str, Tuple[int, float, Provenance]] = {}
        conflicts = 0
        for ex_id in sorted(set(by_text) | set(by_code)):
            t, c = by_text.get(ex_id), by_code.get(ex_id)
            if t is None:
                decisions[ex_id] = (c[0], c[1], Provenance.CODE)
            elif c is None:
                decisions[ex_id] = (t[0], t[1], Provenance.TEXT)
            elif t[0] == c[0]:
                winner = Provenance.TEXT if t[1] >= c[1] else Provenance.CODE
                decisions[ex_id] = (t[0], max(t[1], c[1]), winner)
            else:
                conflicts += 1
                if t[1] > c[1]:
                    decisions[ex_id] = (t[0], t[1], Provenance.TEXT)
                elif c[1] > t[1]:
                    decisions[ex_id] = (c[0], c[1], Provenance.CODE)
                # exact tie: example stays unlabeled

        counts = {(v, lab): 0 for v in Provenance for lab in (0, 1)}
        selected = []
        kept = []
        for ex in work:
            decision = decisions.get(ex.id)
            if decision is None:
                kept.append(ex)
                continue
            label, conf, prov = decision
            pool.add(replace(ex, label=label, provenance=prov))
            counts[(prov, label)] += 1
            selected.append({"id": ex.id, "label": label, "view": prov.value, "confidence": conf})
        work = kept

        refill = 0
        if u and remaining and len(work) < u:
            extra, remaining = sample_without_replacement(remaining, u - len(work), rng)
            work.extend(extra)
            refill = len(extra)

        log.records.append({
            "iter": it,
            "labeled_size": len(pool),
            "text_added_pos": counts[(Provenance.TEXT, 1)],
            "text_added_neg": counts[(Provenance.TEXT, 0)],
            "code_added_pos": counts[(Provenance.CODE, 1)],
            "code_added_neg": counts[(Provenance.CODE, 0)],
            "conflicts": conflicts,
            "pool_refill": refill,
            "pool_size": len(work),
            "selected": selected,
        })
        logger.debug("iteration %d: labeled=%d added=%d", it, len(pool), len(selected))
        if not by_text and not by_code:
            break

    nb, lr = fit_views(pool.examples, n_terms, cfg)
    log.pool = pool
    return nb, lr, log


def predict_combined(nb: MultinomialNaiveBayes, lr: LogisticRegressionGD,
                     x: TwoViewExample, threshold: float = 0.5) -> Tuple[float, int]:
    """Mean of the two view probabilities; label 1 iff it reaches ``threshold``."""
    if not 0 < threshold < 1:
        raise ConfigInvalid(f"threshold must lie in (0, 1), got {threshold}")
    p_text = nb.predict_proba(_text_matrix([x], nb.n_features_in_))[0, 1]
    p_code = lr.predict_proba(np.asarray(x.code_vec, dtype=float).reshape(1, -1))[0, 1]
    prob = float((p_text + p_code) / 2.0)
    return prob, int(prob >= threshold)


class CoTrainingClassifier(ClassifierMixin, BaseEstimator):
    """Estimator wrapper over :func:`cotrain` for two-view array data.

    ``fit(Xs, y)`` takes ``Xs = [X_text, X_code]`` (term-count matrix and
    scaled code features) and ``y`` with ``-1`` marking unlabeled rows.
    Without unlabeled rows it reduces to fitting each view once.
    """

    def __init__(self, iterations=30, pool_size=75, positives=1, negatives=3,
                 min_confidence=0.6, seed=0, alpha=DEFAULT_ALPHA, l2=DEFAULT_L2,
                 learning_rate=DEFAULT_LEARNING_RATE, epochs=DEFAULT_EPOCHS, threshold=0.5):
        self.iterations = iterations
        self.pool_size = pool_size
        self.positives = positives
        self.negatives = negatives
        self.min_confidence = min_confidence
        self.seed = seed
        self.alpha = alpha
        self.l2 = l2
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.threshold = threshold

    def config(self) -> CoTrainConfig:
        return CoTrainConfig(
            iterations=self.iterations, pool_size=self.pool_size,
            positives=self.positives, negatives=self.negatives,
            min_confidence=self.min_confidence, seed=self.seed, alpha=self.alpha,
            l2=self.l2, learning_rate=self.learning_rate, epochs=self.epochs,
        ).validate()

    @staticmethod
    def to_examples(Xs, y=None, ids=None) -> List[TwoViewExample]:
        import scipy.sparse as sp

        X_text = sp.csr_matrix(Xs[0], dtype=float)
        X_code = np.asarray(Xs[1], dtype=float)
        n = X_text.shape[0]
        if X_code.shape[0] != n:
            raise ValueError("views have different numbers of rows")
        if ids is None:
            width = len(str(max(n - 1, 0)))
            ids = [str(i).zfill(width) for i in range(n)]
        labels = [None] * n if y is None else [None if int(v) < 0 else int(v) for v in y]
        return [
            TwoViewExample(str(ids[i]), from_csr_row(X_text, i), X_code[i], labels[i])
            for i in range(n)
        ]

    def fit(self, Xs, y, ids=None):
        cfg = self.config()
        examples = self.to_examples(Xs, y, ids)
        labeled = [ex for ex in examples if ex.label is not None]
        unlabeled = [ex for ex in examples if ex.label is None]
        n_terms = Xs[0].shape[1]
        if unlabeled:
            self.text_estimator_, self.code_estimator_, self.train_log_ = cotrain(
                labeled, unlabeled, cfg, n_terms
            )
        else:
            pool = LabeledPool(labeled)
            if 0 in pool.class_counts():
                raise SingleClassLabeledInput("labeled pool must contain both classes")
            self.text_estimator_, self.code_estimator_ = fit_views(pool.examples, n_terms, cfg)
            self.train_log_ = TrainLog()
        self.classes_ = np.array([0, 1])
        return self

    def predict_proba(self, Xs) -> np.ndarray:
        if not hasattr(self, "text_estimator_"):
            raise NotFittedError("CoTrainingClassifier is not fitted yet")
        p = (self.text_estimator_.predict_proba(Xs[0])[:, 1]
             + self.code_estimator_.predict_proba(Xs[1])[:, 1]) / 2.0
        return np.column_stack([1.0 - p, p])

    def predict(self, Xs) -> np.ndarray:
        return (self.predict_proba(Xs)[:, 1] >= self.threshold).astype(int)
