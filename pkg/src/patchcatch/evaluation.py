"""Metrics, stratified k-fold splitting and the four-system comparison
harness (text-only, code-only, combined, co-trained)."""

import json
from dataclasses import dataclass, replace
from typing import Dict, List, Sequence, Tuple

import numpy as np
from sklearn.base import clone

from .errors import ConfigInvalid, EmptyMatrix, TooFewExamples
from .ingest import Commit
from .pipeline import SecurityPatchClassifier
from .rng import LCG64

DEFAULT_FOLDS = 10

SYSTEMS = ("text_only", "code_only", "combined", "cotrain")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp,
                               self.fn + other.fn, self.tn + other.tn)

    @classmethod
    def from_predictions(cls, y_true, y_pred) -> "ConfusionMatrix":
        y_true = np.asarray(y_true, dtype=int)
        y_pred = np.asarray(y_pred, dtype=int)
        return cls(
            tp=int(((y_true == 1) & (y_pred == 1)).sum()),
            fp=int(((y_true == 0) & (y_pred == 1)).sum()),
            fn=int(((y_true == 1) & (y_pred == 0)).sum()),
            tn=int(((y_true == 0) & (y_pred == 0)).sum()),
        )

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


def _ratio(num, den) -> float:
    return num / den if den else 0.0


def metrics(cm: ConfusionMatrix) -> Tuple[float, float, float, float]:
    """``(precision, recall, f1, accuracy)``; every 0/0 ratio counts as 0."""
    if cm.total == 0:
        raise EmptyMatrix("confusion matrix is empty")
    precision = _ratio(cm.tp, cm.tp + cm.fp)
    recall = _ratio(cm.tp, cm.tp + cm.fn)
    f1 = _ratio(2 * precision * recall, precision + recall)
    accuracy = (cm.tp + cm.tn) / cm.total
    return precision, recall, f1, accuracy


def _metric_dict(cm: ConfusionMatrix) -> dict:
    precision, recall, f1, accuracy = metrics(cm)
    return {"confusion": cm.to_dict(), "precision": precision, "recall": recall,
            "f1": f1, "accuracy": accuracy}


def stratified_kfold(labels: Sequence[int], folds: int, seed: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Stratified ``(train_indices, test_indices)`` splits.

    Each class is shuffled with the seeded generator and dealt round-robin
    over the folds, continuing where the previous class stopped, so every
    fold holds floor or ceil of its share of each class.
    """
    if folds < 2:
        raise ConfigInvalid(f"folds must be >= 2, got {folds}")
    labels = np.asarray(labels, dtype=int)
    rng = LCG64(seed)
    assignment = np.empty(len(labels), dtype=int)
    offset = 0
    for cls in (0, 1):
        members = [int(i) for i in np.flatnonzero(labels == cls)]
        if len(members) < folds:
            raise TooFewExamples(
                f"class {cls} has {len(members)} examples, fewer than {folds} folds"
            )
        rng.shuffle(members)
        for k, idx in enumerate(members):
            assignment[idx] = (offset + k) % folds
        offset = (offset + len(members)) % folds
    everything = np.arange(len(labels))
    return [
        (everything[assignment != f], everything[assignment == f])
        for f in range(folds)
    ]


@dataclass
class EvalReport:
    system: str
    per_fold: List[dict]
    aggregate: dict
    config: dict
    seed: int

    def to_dict(self) -> dict:
        return {"system": self.system, "per_fold": self.per_fold,
                "aggregate": self.aggregate, "config": self.config, "seed": self.seed}


@dataclass
class ComparisonReport:
    systems: Dict[str, EvalReport]
    f1_delta: List[dict]
    folds: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "folds": self.folds,
            "seed": self.seed,
            "systems": {name: rep.to_dict() for name, rep in self.systems.items()},
            "f1_delta": self.f1_delta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def table(self) -> str:
        rows = [f"{'system':<12} {'precision':>9} {'recall':>9} {'f1':>9} {'accuracy':>9}"]
        for name in SYSTEMS:
            agg = self.systems[name].aggregate
            rows.append(
                f"{name:<12} {agg['precision']:>9.4f} {agg['recall']:>9.4f} "
                f"{agg['f1']:>9.4f} {agg['accuracy']:>9.4f}"
            )
        rows.append("")
        rows.append(f"{'fold':<6} {'combined':>9} {'cotrain':>9} {'delta':>9}")
        for d in self.f1_delta:
            rows.append(f"{d['fold']:<6} {d['combined_f1']:>9.4f} {d['cotrain_f1']:>9.4f} {d['delta']:>+9.4f}")
        return "\n".join(rows)


def run_experiment(labeled: Sequence[Commit], unlabeled: Sequence[Commit], estimator=None,
                   folds: int = DEFAULT_FOLDS, seed: int = 0) -> ComparisonReport:
    """Cross-validate the four systems on ``labeled``.

    ``estimator`` is a :class:`SecurityPatchClassifier` template (cloned per
    fold). Labels on ``unlabeled`` are dropped before any training.
    """
    labeled = list(labeled)
    if any(c.label is None for c in labeled):
        raise ConfigInvalid("every commit in the labeled set needs a label")
    template = SecurityPatchClassifier() if estimator is None else estimator
    template = clone(template).set_params(seed=seed)
    blind = [replace(c, label=None) for c in unlabeled]
    y = np.array([c.label for c in labeled], dtype=int)
    threshold = template.threshold

    confusions: Dict[str, List[ConfusionMatrix]] = {name: [] for name in SYSTEMS}
    for train_idx, test_idx in stratified_kfold(y, folds, seed):
        train = [labeled[i] for i in train_idx]
        test = [labeled[i] for i in test_idx]
        y_test = y[test_idx]

        # same unsupervised feature space for both; only pseudo-labels differ
        base = clone(template).set_params(use_unlabeled=False).fit(train + blind)
        views = base.view_proba(test)
        combined = views.mean(axis=1)
        co = clone(template).set_params(use_unlabeled=True).fit(train + blind)
        co_prob = co.predict_proba(test)[:, 1]

        for name, prob in (("text_only", views[:, 0]), ("code_only", views[:, 1]),
                           ("combined", combined), ("cotrain", co_prob)):
            pred = (prob >= threshold).astype(int)
            confusions[name].append(ConfusionMatrix.from_predictions(y_test, pred))

    config = {k: (list(v) if isinstance(v, tuple) else v)
              for k, v in template.get_params().items() if k != "stopwords"}
    systems = {}
    for name in SYSTEMS:
        per_fold = [dict(fold=i, **_metric_dict(cm)) for i, cm in enumerate(confusions[name])]
        total = ConfusionMatrix()
        for cm in confusions[name]:
            total = total + cm
        systems[name] = EvalReport(name, per_fold, _metric_dict(total), config, seed)

    deltas = []
    for c, d in zip(systems["combined"].per_fold, systems["cotrain"].per_fold):
        deltas.append({"fold": c["fold"], "combined_f1": c["f1"], "cotrain_f1": d["f1"],
                       "delta": d["f1"] - c["f1"]})
    return ComparisonReport(systems, deltas, folds, seed)
