"""PCH1 model files.

Layout::

    b"PCH1"                 magic
    u8                      format version (currently 1)
    u32 big-endian          body length in bytes
    body                    canonical JSON, UTF-8
    u32 big-endian          CRC-32 of the body

The body is JSON with sorted keys, no insignificant whitespace and ASCII
escapes; every float is stored as a decimal string with 17 significant
digits (``format(x, ".17g")``), which round-trips IEEE doubles exactly.
Saving the same bundle twice therefore produces identical bytes.
"""

import json
import math
import os
import struct
import tempfile
import zlib
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from .codeview import CodeFeatureExtractor, FeatureSchema, FeatureScaler
from .cotrain import CoTrainConfig, TrainLog
from .errors import ChecksumError, ConfigInvalid, FormatError, VersionError
from .learners import logistic_from_params, naive_bayes_from_params
from .textview import MessageVectorizer, Vocabulary

MAGIC = b"PCH1"
FORMAT_VERSION = 1
_HEADER = struct.Struct(">4sBI")
_TRAILER = struct.Struct(">I")
_NB_TOLERANCE = 1e-9


def _f(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite value {x!r}")
    return format(x, ".17g")


def _floats(values) -> list:
    return [_f(v) for v in np.asarray(values, dtype=float).ravel()]


def _parse_floats(values, what: str) -> np.ndarray:
    try:
        out = np.array([float(v) for v in values], dtype=float)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{what}: {exc}") from None
    if not np.all(np.isfinite(out)):
        raise FormatError(f"{what}: non-finite value")
    return out


@dataclass(eq=False)
class ModelBundle:
    """Everything needed to score new commits."""

    stopwords: Tuple[str, ...]
    min_df: int
    max_terms: int
    vocabulary: Vocabulary
    schema: FeatureSchema
    scaler_mean: np.ndarray
    scaler_std: np.ndarray
    nb_log_prior: np.ndarray
    nb_log_likelihood: np.ndarray
    lr_coef: np.ndarray
    lr_intercept: float
    config: CoTrainConfig
    train_log_digest: str
    threshold: float = 0.5
    format_version: int = FORMAT_VERSION
    extra: dict = field(default_factory=dict)

    def __eq__(self, other):
        if not isinstance(other, ModelBundle):
            return NotImplemented
        arrays = ("scaler_mean", "scaler_std", "nb_log_prior", "nb_log_likelihood", "lr_coef")
        plain = ("stopwords", "min_df", "max_terms", "vocabulary", "schema", "lr_intercept",
                 "config", "train_log_digest", "threshold", "format_version", "extra")
        return (all(np.array_equal(getattr(self, a), getattr(other, a)) for a in arrays)
                and all(getattr(self, a) == getattr(other, a) for a in plain))

    __hash__ = None

    @classmethod
    def from_classifier(cls, clf) -> "ModelBundle":
        """Snapshot a fitted :class:`~patchcatch.pipeline.SecurityPatchClassifier`."""
        nb, lr = clf.text_estimator_, clf.code_estimator_
        return cls(
            stopwords=tuple(sorted(clf.vectorizer_.stoplist_)),
            min_df=int(clf.min_df),
            max_terms=int(clf.max_terms),
            vocabulary=clf.vectorizer_.vocabulary_,
            schema=clf.extractor_.schema_,
            scaler_mean=np.array(clf.scaler_.mean_, dtype=float),
            scaler_std=np.array(clf.scaler_.std_, dtype=float),
            nb_log_prior=np.array(nb.class_log_prior_, dtype=float),
            nb_log_likelihood=np.array(nb.feature_log_prob_, dtype=float),
            lr_coef=np.array(lr.coef_, dtype=float),
            lr_intercept=float(lr.intercept_),
            config=clf.cotrain_config(),
            train_log_digest=clf.train_log_.digest(),
            threshold=float(clf.threshold),
        )

    def to_classifier(self):
        """A fitted classifier equivalent to the one that was saved."""
        from .pipeline import SecurityPatchClassifier

        cfg = self.config
        clf = SecurityPatchClassifier(
            stopwords=self.stopwords, min_df=self.min_df, max_terms=self.max_terms,
            sensitive_tokens=self.schema.sensitive_tokens, alpha=cfg.alpha, l2=cfg.l2,
            learning_rate=cfg.learning_rate, epochs=cfg.epochs, iterations=cfg.iterations,
            pool_size=cfg.pool_size, positives=cfg.positives, negatives=cfg.negatives,
            min_confidence=cfg.min_confidence, seed=cfg.seed, threshold=self.threshold,
        )
        clf.vectorizer_ = MessageVectorizer(self.stopwords, self.min_df, self.max_terms)
        clf.vectorizer_.vocabulary_ = self.vocabulary
        clf.extractor_ = CodeFeatureExtractor(self.schema.sensitive_tokens)
        clf.scaler_ = FeatureScaler()
        clf.scaler_.mean_ = self.scaler_mean.copy()
        clf.scaler_.std_ = self.scaler_std.copy()
        clf.text_estimator_ = naive_bayes_from_params(
            self.nb_log_prior, self.nb_log_likelihood, alpha=cfg.alpha
        )
        clf.code_estimator_ = logistic_from_params(
            self.lr_coef, self.lr_intercept, l2=cfg.l2, learning_rate=cfg.learning_rate,
            epochs=cfg.epochs, seed=cfg.seed,
        )
        clf.train_log_ = TrainLog()
        clf.classes_ = np.array([0, 1])
        return clf

    def validate(self) -> "ModelBundle":
        """Re-check cross-field invariants; raises :class:`FormatError`."""
        v, f = self.vocabulary.size, self.schema.n_features
        if list(self.vocabulary.terms) != sorted(self.vocabulary.terms):
            raise FormatError("vocabulary terms are not in lexicographic order")
        if any(df < self.min_df for df in self.vocabulary.document_frequency):
            raise FormatError("vocabulary term below min_df")
        if v > self.max_terms:
            raise FormatError("vocabulary larger than max_terms")
        if self.scaler_mean.shape != (f,) or self.scaler_std.shape != (f,):
            raise FormatError(f"scaler does not match the {f}-feature schema")
        if np.any(self.scaler_std <= 0):
            raise FormatError("scaler std must be positive")
        if self.lr_coef.shape != (f,):
            raise FormatError(f"logistic weights do not match the {f}-feature schema")
        if self.nb_log_prior.shape != (2,) or self.nb_log_likelihood.shape != (2, v):
            raise FormatError(f"naive Bayes tables do not match a {v}-term vocabulary")
        if abs(np.exp(self.nb_log_prior).sum() - 1.0) > _NB_TOLERANCE:
            raise FormatError("naive Bayes class priors do not sum to 1")
        sums = np.exp(self.nb_log_likelihood).sum(axis=1)
        if np.any(np.abs(sums - 1.0) > _NB_TOLERANCE):
            raise FormatError("naive Bayes term likelihoods do not sum to 1 per class")
        if not 0 < self.threshold < 1:
            raise FormatError("threshold must lie in (0, 1)")
        try:
            self.config.validate()
        except ConfigInvalid as exc:
            raise FormatError(f"stored config is invalid: {exc}") from None
        return self

    def to_body(self) -> dict:
        cfg = self.config
        return {
            "text": {
                "stopwords": list(self.stopwords),
                "min_df": self.min_df,
                "max_terms": self.max_terms,
                "terms": list(self.vocabulary.terms),
                "document_frequency": list(self.vocabulary.document_frequency),
            },
            "code": {
                "schema_version": self.schema.version,
                "sensitive_tokens": list(self.schema.sensitive_tokens),
                "scaler_mean": _floats(self.scaler_mean),
                "scaler_std": _floats(self.scaler_std),
            },
            "naive_bayes": {
                "log_prior": _floats(self.nb_log_prior),
                "log_likelihood": [_floats(row) for row in self.nb_log_likelihood],
            },
            "logistic": {
                "weights": _floats(self.lr_coef),
                "bias": _f(self.lr_intercept),
            },
            "config": {
                "iterations": cfg.iterations, "pool_size": cfg.pool_size,
                "positives": cfg.positives, "negatives": cfg.negatives,
                "min_confidence": _f(cfg.min_confidence), "seed": cfg.seed,
                "alpha": _f(cfg.alpha), "l2": _f(cfg.l2),
                "learning_rate": _f(cfg.learning_rate), "epochs": cfg.epochs,
            },
            "threshold": _f(self.threshold),
            "train_log_sha256": self.train_log_digest,
            "extra": self.extra,
        }

    @classmethod
    def from_body(cls, body: dict, version: int = FORMAT_VERSION) -> "ModelBundle":
        try:
            text, code = body["text"], body["code"]
            nb, lr, cfg = body["naive_bayes"], body["logistic"], body["config"]
            vocab = Vocabulary(tuple(text["terms"]), tuple(int(d) for d in text["document_frequency"]))
            schema = FeatureSchema(tuple(code["sensitive_tokens"]), int(code["schema_version"]))
            config = CoTrainConfig(
                iterations=int(cfg["iterations"]), pool_size=int(cfg["pool_size"]),
                positives=int(cfg["positives"]), negatives=int(cfg["negatives"]),
                min_confidence=float(cfg["min_confidence"]), seed=int(cfg["seed"]),
                alpha=float(cfg["alpha"]), l2=float(cfg["l2"]),
                learning_rate=float(cfg["learning_rate"]), epochs=int(cfg["epochs"]),
            )
            rows = [_parse_floats(r, "naive_bayes.log_likelihood") for r in nb["log_likelihood"]]
            if len({len(r) for r in rows}) > 1:
                raise FormatError("naive_bayes.log_likelihood rows differ in length")
            likelihood = np.vstack(rows) if rows else np.zeros((0, 0))
            bundle = cls(
                stopwords=tuple(text["stopwords"]),
                min_df=int(text["min_df"]),
                max_terms=int(text["max_terms"]),
                vocabulary=vocab,
                schema=schema,
                scaler_mean=_parse_floats(code["scaler_mean"], "code.scaler_mean"),
                scaler_std=_parse_floats(code["scaler_std"], "code.scaler_std"),
                nb_log_prior=_parse_floats(nb["log_prior"], "naive_bayes.log_prior"),
                nb_log_likelihood=likelihood,
                lr_coef=_parse_floats(lr["weights"], "logistic.weights"),
                lr_intercept=float(_parse_floats([lr["bias"]], "logistic.bias")[0]),
                config=config,
                train_log_digest=str(body["train_log_sha256"]),
                threshold=float(body["threshold"]),
                format_version=version,
                extra=dict(body.get("extra", {})),
            )
        except FormatError:
            raise
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise FormatError(f"malformed model body: {exc!r}") from None
        return bundle.validate()


def encode(bundle: ModelBundle) -> bytes:
    body = json.dumps(bundle.to_body(), sort_keys=True, separators=(",", ":"),
                      ensure_ascii=True).encode("ascii")
    return (_HEADER.pack(MAGIC, bundle.format_version, len(body)) + body
            + _TRAILER.pack(zlib.crc32(body)))


def decode(data: bytes) -> ModelBundle:
    if len(data) < 4 or data[:4] != MAGIC:
        raise FormatError("not a PCH1 model file (bad magic)")
    if len(data) < _HEADER.size:
        raise ChecksumError("file truncated inside the header")
    _, version, length = _HEADER.unpack_from(data)
    if version != FORMAT_VERSION:
        raise VersionError(version, FORMAT_VERSION)
    end = _HEADER.size + length
    if len(data) < end + _TRAILER.size:
        raise ChecksumError(f"file truncated: body declares {length} bytes")
    if len(data) > end + _TRAILER.size:
        raise FormatError("trailing bytes after checksum")
    body = data[_HEADER.size:end]
    (stored,) = _TRAILER.unpack_from(data, end)
    if zlib.crc32(body) != stored:
        raise ChecksumError(f"checksum mismatch: stored {stored:08x}, computed {zlib.crc32(body):08x}")
    try:
        parsed = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise FormatError(f"model body is not valid JSON: {exc}") from None
    if not isinstance(parsed, dict):
        raise FormatError("model body must be a JSON object")
    return ModelBundle.from_body(parsed, version)


def save_model(bundle: ModelBundle, path) -> None:
    """Write atomically: a temp file in the target directory, then rename."""
    data = encode(bundle)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".pch1-", dir=directory)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_model(path) -> ModelBundle:
    with open(path, "rb") as fh:
        return decode(fh.read())
