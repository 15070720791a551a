"""Security-patch classification from commit messages and diffs, with
two-view co-training over unlabeled commits."""

__version__ = "0.1.0"

from .codeview import CodeFeatureExtractor, FeatureScaler, extract_code_features
from .cotrain import CoTrainConfig, CoTrainingClassifier, LabeledPool, TrainLog, cotrain
from .evaluation import ConfusionMatrix, metrics, run_experiment, stratified_kfold
from .ingest import Commit, parse_unified_diff, read_commits_jsonl, write_commits_jsonl
from .learners import LogisticRegressionGD, MultinomialNaiveBayes
from .persist import ModelBundle, load_model, save_model
from .pipeline import SecurityPatchClassifier
from .textview import MessageVectorizer

__all__ = [
    "CoTrainConfig", "CoTrainingClassifier", "CodeFeatureExtractor", "Commit",
    "ConfusionMatrix", "FeatureScaler", "LabeledPool", "LogisticRegressionGD",
    "MessageVectorizer", "ModelBundle", "MultinomialNaiveBayes", "SecurityPatchClassifier",
    "TrainLog", "cotrain", "extract_code_features", "load_model", "metrics",
    "parse_unified_diff", "read_commits_jsonl", "run_experiment", "save_model",
    "stratified_kfold", "write_commits_jsonl",
]
