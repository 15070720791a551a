"""``patchcatch`` command line.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
Every flag is validated before any input is read or output written.

Settings may also come from an INI file passed with ``--config``; keys live
in a ``[patchcatch]`` section and use the long flag names with dashes or
underscores (``min-df = 2``, ``sensitive_tokens = memcpy, strcpy``).
Command-line flags override the file.
"""

import argparse
import configparser
import json
import logging
import sys
from dataclasses import replace

from . import __version__
from .codeview import DEFAULT_SENSITIVE_TOKENS, CodeFeatureExtractor, extract_code_features
from .cotrain import CoTrainConfig
from .errors import ConfigInvalid, PatchCatchError
from .evaluation import run_experiment
from .ingest import enumerate_repo, parse_unified_diff, read_commits_jsonl, write_commits_jsonl
from .persist import ModelBundle, load_model, save_model
from .pipeline import SecurityPatchClassifier
from .synth import generate
from .textview import MessageVectorizer, load_stoplist

logger = logging.getLogger("patchcatch")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2

# name -> (type, default); defaults mirror SecurityPatchClassifier
MODEL_SETTINGS = {
    "stoplist": (str, None),
    "sensitive_tokens": (str, None),
    "min_df": (int, 2),
    "max_terms": (int, 20000),
    "alpha": (float, 1.0),
    "l2": (float, 1e-2),
    "learning_rate": (float, 0.1),
    "epochs": (int, 500),
    "iterations": (int, 30),
    "pool": (int, 75),
    "positives": (int, 1),
    "negatives": (int, 3),
    "min_confidence": (float, 0.6),
    "seed": (int, 0),
    "threshold": (float, 0.5),
}


class UsageError(Exception):
    pass


def _flag(name):
    return "--" + name.replace("_", "-")


def _add_model_flags(parser):
    group = parser.add_argument_group("model settings")
    for name, (kind, default) in MODEL_SETTINGS.items():
        group.add_argument(_flag(name), dest=name, type=kind, default=None,
                           help=f"default: {default}")


def _add_config_flag(parser):
    parser.add_argument("--config", help="INI file with a [patchcatch] section")


def _read_config(path):
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise UsageError(f"bad config {path}: {exc}") from None
    if not parser.has_section("patchcatch"):
        return {}
    out = {}
    for key, raw in parser.items("patchcatch"):
        name = key.replace("-", "_")
        if name not in MODEL_SETTINGS:
            raise UsageError(f"unknown config key {key!r}")
        kind = MODEL_SETTINGS[name][0]
        try:
            out[name] = kind(raw)
        except ValueError:
            raise UsageError(f"config key {key!r}: expected {kind.__name__}, got {raw!r}") from None
    return out


def resolve_settings(args) -> dict:
    """Defaults < config file < flags."""
    settings = {name: default for name, (_, default) in MODEL_SETTINGS.items()}
    if getattr(args, "config", None):
        settings.update(_read_config(args.config))
    for name in MODEL_SETTINGS:
        value = getattr(args, name, None)
        if value is not None:
            settings[name] = value
    _validate_settings(settings)
    return settings


def _validate_settings(s):
    if s["min_df"] < 1 or s["max_terms"] < 1:
        raise UsageError("--min-df and --max-terms must be >= 1")
    if not 0 < s["threshold"] < 1:
        raise UsageError("--threshold must lie in (0, 1)")
    if s["sensitive_tokens"] is not None and not _tokens(s["sensitive_tokens"]):
        raise UsageError("--sensitive-tokens must name at least one token")
    try:
        _config(s).validate()
    except ConfigInvalid as exc:
        raise UsageError(str(exc)) from None


def _tokens(raw):
    return tuple(t.strip() for t in raw.split(",") if t.strip())


def _config(s) -> CoTrainConfig:
    return CoTrainConfig(
        iterations=s["iterations"], pool_size=s["pool"], positives=s["positives"],
        negatives=s["negatives"], min_confidence=s["min_confidence"], seed=s["seed"],
        alpha=s["alpha"], l2=s["l2"], learning_rate=s["learning_rate"], epochs=s["epochs"],
    )


def build_estimator(s) -> SecurityPatchClassifier:
    stopwords = None if s["stoplist"] is None else tuple(sorted(load_stoplist(s["stoplist"])))
    tokens = DEFAULT_SENSITIVE_TOKENS if s["sensitive_tokens"] is None else _tokens(s["sensitive_tokens"])
    return SecurityPatchClassifier(
        stopwords=stopwords, min_df=s["min_df"], max_terms=s["max_terms"],
        sensitive_tokens=tokens, alpha=s["alpha"], l2=s["l2"],
        learning_rate=s["learning_rate"], epochs=s["epochs"], iterations=s["iterations"],
        pool_size=s["pool"], positives=s["positives"], negatives=s["negatives"],
        min_confidence=s["min_confidence"], seed=s["seed"], threshold=s["threshold"],
    )


def _write_text(path, text):
    if path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


# -- commands ---------------------------------------------------------------

def cmd_ingest(args):
    if (args.repo is None) == (args.jsonl is None):
        raise UsageError("give exactly one of --repo or --jsonl")
    if args.limit is not None and args.limit < 1:
        raise UsageError("--limit must be >= 1")
    if args.repo is not None:
        commits = enumerate_repo(args.repo, args.limit)
    else:
        source = read_commits_jsonl(args.jsonl)
        commits = source if args.limit is None else (c for _, c in zip(range(args.limit), source))
    # materialize first so a parse error leaves no partial output file
    commits = list(commits)
    count = write_commits_jsonl(commits, args.out)
    logger.info("%d commits written", count)
    print(count, file=sys.stderr)
    return EXIT_OK


def cmd_extract(args):
    s = resolve_settings(args)
    commits = list(read_commits_jsonl(args.input))
    if args.model:
        clf = load_model(args.model).to_classifier()
        vectorizer, extractor, scaler = clf.vectorizer_, clf.extractor_, clf.scaler_
    else:
        clf = build_estimator(s)
        vectorizer = MessageVectorizer(clf.stopwords, clf.min_df, clf.max_terms)
        vectorizer.fit([c.message for c in commits])
        extractor, scaler = CodeFeatureExtractor(tuple(clf.sensitive_tokens)), None
    terms = vectorizer.vocabulary_.terms
    names = extractor.schema_.names
    lines = []
    for commit, vec in zip(commits, vectorizer.vectors([c.message for c in commits])):
        row = extract_code_features(parse_unified_diff(commit.diff), extractor.schema_)
        if scaler is not None:
            row = scaler.transform(row.reshape(1, -1))[0]
        record = {
            "id": commit.id,
            "text": {terms[i]: int(v) for i, v in vec},
            "code": {n: float(v) for n, v in zip(names, row)},
        }
        lines.append(json.dumps(record, ensure_ascii=False) + "\n")
    _write_text(args.out, "".join(lines))
    return EXIT_OK


def cmd_train(args):
    s = resolve_settings(args)
    estimator = build_estimator(s)
    labeled = list(read_commits_jsonl(args.labeled))
    missing = [c.id for c in labeled if c.label is None]
    if missing:
        raise ConfigInvalid(f"labeled file has {len(missing)} records without a label, e.g. {missing[0]!r}")
    unlabeled = []
    if args.unlabeled:
        unlabeled = [replace(c, label=None) for c in read_commits_jsonl(args.unlabeled)]
    else:
        logger.warning("no --unlabeled given: training baselines only, no co-training")
    estimator.fit(labeled + unlabeled)
    save_model(ModelBundle.from_classifier(estimator), args.out)
    log_path = args.out + ".trainlog.jsonl"
    estimator.train_log_.write(log_path)
    logger.info("model written to %s, train log to %s (%d iterations)",
                args.out, log_path, len(estimator.train_log_.records))
    return EXIT_OK


def cmd_predict(args):
    if args.threshold is not None and not 0 < args.threshold < 1:
        raise UsageError("--threshold must lie in (0, 1)")
    clf = load_model(args.model).to_classifier()
    threshold = clf.threshold if args.threshold is None else args.threshold
    commits = list(read_commits_jsonl(args.input))
    probs = clf.predict_proba(commits)[:, 1]
    lines = [
        json.dumps({"id": c.id, "probability": float(p), "label": int(p >= threshold)}) + "\n"
        for c, p in zip(commits, probs)
    ]
    _write_text(args.out, "".join(lines))
    return EXIT_OK


def cmd_eval(args):
    if args.folds < 2:
        raise UsageError("--folds must be >= 2")
    s = resolve_settings(args)
    estimator = build_estimator(s)
    labeled = list(read_commits_jsonl(args.labeled))
    unlabeled = list(read_commits_jsonl(args.unlabeled)) if args.unlabeled else []
    report = run_experiment(labeled, unlabeled, estimator, folds=args.folds, seed=s["seed"])
    if args.report:
        _write_text(args.report, report.to_json() + "\n")
    sys.stdout.write(report.table() + "\n")
    return EXIT_OK


def cmd_synth(args):
    if args.n_labeled < 4:
        raise UsageError("--n-labeled must be >= 4")
    if args.n_unlabeled < 0:
        raise UsageError("--n-unlabeled must be >= 0")
    if not 0 <= args.noise < 0.5:
        raise UsageError("--noise must lie in [0, 0.5)")
    if not 0 <= args.pos_rate <= 1:
        raise UsageError("--pos-rate must lie in [0, 1]")
    data = generate(args.n_labeled, args.n_unlabeled, args.noise, args.seed, args.pos_rate)
    write_commits_jsonl(data.labeled, f"{args.out}_labeled.jsonl")
    write_commits_jsonl(data.unlabeled, f"{args.out}_unlabeled.jsonl")
    return EXIT_OK


# -- parser -----------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="patchcatch", description="Classify commits as security patches.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="normalize commits from a git repository or JSONL file")
    p.add_argument("--repo")
    p.add_argument("--jsonl")
    p.add_argument("--limit", type=int)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("extract", help="dump both feature views per commit as JSONL")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", default="-")
    p.add_argument("--model", help="use this model's vocabulary and scaler")
    _add_config_flag(p)
    _add_model_flags(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="fit a model, co-training when unlabeled commits are given")
    p.add_argument("--labeled", required=True)
    p.add_argument("--unlabeled")
    p.add_argument("--out", required=True)
    _add_config_flag(p)
    _add_model_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score commits with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", default="-")
    p.add_argument("--threshold", type=float)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="cross-validate the four systems")
    p.add_argument("--labeled", required=True)
    p.add_argument("--unlabeled")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--report")
    _add_config_flag(p)
    _add_model_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic two-view dataset")
    p.add_argument("--n-labeled", type=int, required=True)
    p.add_argument("--n-unlabeled", type=int, required=True)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--pos-rate", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"patchcatch: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"patchcatch: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PatchCatchError, OSError) as exc:
        print(f"patchcatch: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
