"""Commit ingestion: JSON Lines datasets, git subprocess enumeration and
unified-diff parsing."""

import json
import logging
import re
import shutil
import subprocess
import sys
from dataclasses import dataclass, field
from typing import Iterable, Iterator, List, Optional, Tuple

from .errors import MalformedHunkHeader, SchemaError, SubprocessFailure, ToolNotFound

logger = logging.getLogger(__name__)

CONTEXT, ADDED, REMOVED = "context", "added", "removed"

_HUNK_RE = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")
_GIT_HEADER_RE = re.compile(r"^diff --git a/(.*) b/(.*)$")
_BINARY_RE = re.compile(r"^Binary files (.*) and (.*) differ$")


@dataclass(frozen=True)
class Commit:
    id: str
    message: str
    diff: str
    label: Optional[int] = None

    def to_json(self) -> str:
        record = {"id": self.id, "message": self.message, "diff": self.diff}
        if self.label is not None:
            record["label"] = self.label
        return json.dumps(record, ensure_ascii=False)


@dataclass
class Hunk:
    old_start: int
    old_len: int
    new_start: int
    new_len: int
    lines: List[Tuple[str, str]] = field(default_factory=list)
    # False when the header omitted ",len" (implied length 1)
    lengths_declared: bool = True

    @property
    def added(self) -> int:
        return sum(1 for kind, _ in self.lines if kind == ADDED)

    @property
    def removed(self) -> int:
        return sum(1 for kind, _ in self.lines if kind == REMOVED)

    def is_consistent(self) -> bool:
        old = sum(1 for kind, _ in self.lines if kind != ADDED)
        new = sum(1 for kind, _ in self.lines if kind != REMOVED)
        return old == self.old_len and new == self.new_len


@dataclass
class FileDiff:
    path_old: str = ""
    path_new: str = ""
    hunks: List[Hunk] = field(default_factory=list)
    binary: bool = False

    @property
    def added(self) -> int:
        return sum(h.added for h in self.hunks)

    @property
    def removed(self) -> int:
        return sum(h.removed for h in self.hunks)

    def added_lines(self) -> Iterator[str]:
        for h in self.hunks:
            for kind, text in h.lines:
                if kind == ADDED:
                    yield text

    def removed_lines(self) -> Iterator[str]:
        for h in self.hunks:
            for kind, text in h.lines:
                if kind == REMOVED:
                    yield text


def _strip_path(raw: str) -> str:
    # "--- a/foo.c\t2020-01-01 ..." -> "foo.c"
    path = raw.split("\t", 1)[0].rstrip()
    if path.startswith('"') and path.endswith('"') and len(path) >= 2:
        path = path[1:-1]
    if path.startswith(("a/", "b/")):
        path = path[2:]
    return path


def parse_unified_diff(diff_text: str, errors: Optional[list] = None) -> List[FileDiff]:
    """Parse unified-diff text into a list of :class:`FileDiff`.

    Malformed ``@@`` headers never abort the parse: a
    :class:`MalformedHunkHeader` is logged (and appended to ``errors`` when a
    list is given) and the parser resynchronises at the next file header.
    """
    lines = diff_text.replace("\r\n", "\n").split("\n")
    if lines and lines[-1] == "":
        lines.pop()

    files: List[FileDiff] = []
    current: Optional[FileDiff] = None
    hunk: Optional[Hunk] = None
    # fresh file opened by "diff --git" still waiting for its ---/+++ pair
    awaiting_paths = False
    skipping = False

    i = 0
    n = len(lines)
    while i < n:
        line = lines[i]

        m = _GIT_HEADER_RE.match(line)
        if m or line.startswith("diff --git "):
            current = FileDiff()
            if m:
                current.path_old, current.path_new = m.group(1), m.group(2)
            files.append(current)
            hunk = None
            awaiting_paths = True
            skipping = False
            i += 1
            continue

        if line.startswith("---"):
            if i + 1 < n and lines[i + 1].startswith("+++"):
                old = _strip_path(line[3:].lstrip(" "))
                new = _strip_path(lines[i + 1][3:].lstrip(" "))
                if current is None or not awaiting_paths:
                    current = FileDiff()
                    files.append(current)
                current.path_old, current.path_new = old, new
                hunk = None
                awaiting_paths = False
                skipping = False
                i += 2
                continue
            # stray "---" line: never a removal
            i += 1
            continue

        if skipping or line.startswith("+++"):
            i += 1
            continue

        if line.startswith("@@"):
            m = _HUNK_RE.match(line)
            if m is None:
                err = MalformedHunkHeader(i + 1, line)
                logger.warning("%s", err)
                if errors is not None:
                    errors.append(err)
                hunk = None
                skipping = True
                i += 1
                continue
            if current is None:
                current = FileDiff()
                files.append(current)
            hunk = Hunk(
                old_start=int(m.group(1)),
                old_len=int(m.group(2)) if m.group(2) is not None else 1,
                new_start=int(m.group(3)),
                new_len=int(m.group(4)) if m.group(4) is not None else 1,
                lengths_declared=m.group(2) is not None and m.group(4) is not None,
            )
            current.hunks.append(hunk)
            awaiting_paths = False
            i += 1
            continue

        if current is not None:
            m = _BINARY_RE.match(line)
            if m or line.startswith("GIT binary patch"):
                current.binary = True
                if m and not current.path_new:
                    current.path_old = _strip_path(m.group(1))
                    current.path_new = _strip_path(m.group(2))
                hunk = None
                i += 1
                continue
            if hunk is None and line.startswith("rename to "):
                current.path_new = line[len("rename to "):]
            elif hunk is None and line.startswith("rename from "):
                current.path_old = line[len("rename from "):]

        if hunk is not None:
            if line.startswith("+"):
                hunk.lines.append((ADDED, line[1:]))
            elif line.startswith("-"):
                hunk.lines.append((REMOVED, line[1:]))
            elif line.startswith(" "):
                hunk.lines.append((CONTEXT, line[1:]))
            elif line == "" and not _hunk_full(hunk):
                # some tools strip the single space of blank context lines
                hunk.lines.append((CONTEXT, ""))
        i += 1

    return files


def _hunk_full(hunk: Hunk) -> bool:
    old = sum(1 for kind, _ in hunk.lines if kind != ADDED)
    new = sum(1 for kind, _ in hunk.lines if kind != REMOVED)
    return old >= hunk.old_len and new >= hunk.new_len


def count_changes(files: Iterable[FileDiff]) -> Tuple[int, int]:
    """Total (added, removed) line counts across parsed files."""
    added = removed = 0
    for f in files:
        added += f.added
        removed += f.removed
    return added, removed


def _commit_from_record(record, lineno: int) -> Commit:
    if not isinstance(record, dict):
        raise SchemaError(lineno, "expected a JSON object")
    for key in ("id", "message", "diff"):
        if key not in record:
            raise SchemaError(lineno, f"missing required key {key!r}")
        if not isinstance(record[key], str):
            raise SchemaError(lineno, f"key {key!r} must be a string")
    if not record["id"]:
        raise SchemaError(lineno, "id must be non-empty")
    label = record.get("label")
    if label is not None and (isinstance(label, bool) or label not in (0, 1)):
        raise SchemaError(lineno, f"label must be 0 or 1, got {label!r}")
    return Commit(record["id"], record["message"], record["diff"], label)


def read_commits_jsonl(path) -> Iterator[Commit]:
    """Yield commits from a JSON Lines file, in file order.

    Blank lines are skipped. Raises :class:`SchemaError` (with the 1-based
    line number) on malformed records or duplicate ids, ``OSError`` when the
    file cannot be read.
    """
    seen = set()
    stream = sys.stdin if str(path) == "-" else open(path, encoding="utf-8")
    try:
        for lineno, line in enumerate(stream, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(lineno, f"invalid JSON: {exc.msg}") from None
            commit = _commit_from_record(record, lineno)
            if commit.id in seen:
                raise SchemaError(lineno, f"duplicate id {commit.id!r}")
            seen.add(commit.id)
            yield commit
    finally:
        if stream is not sys.stdin:
            stream.close()


def write_commits_jsonl(commits: Iterable[Commit], path) -> int:
    """Write commits as JSON Lines; returns the number of records written."""
    count = 0
    stream = sys.stdout if str(path) == "-" else open(path, "w", encoding="utf-8", newline="\n")
    try:
        for commit in commits:
            stream.write(commit.to_json())
            stream.write("\n")
            count += 1
    finally:
        if stream is not sys.stdout:
            stream.close()
    return count


def _run_git(args: List[str]) -> bytes:
    git = shutil.which("git")
    if git is None:
        raise ToolNotFound("git executable not found on PATH")
    cmd = [git, *args]
    proc = subprocess.run(cmd, capture_output=True)
    if proc.returncode != 0:
        raise SubprocessFailure(cmd, proc.returncode, proc.stderr.decode("utf-8", "replace"))
    return proc.stdout


def enumerate_repo(repo_path, limit: Optional[int] = None) -> Iterator[Commit]:
    """Yield commits of a git checkout, newest first.

    Every commit is fetched with its full message and a 3-line-context
    unified diff; undecodable bytes are replaced.
    """
    base = ["-C", str(repo_path), "-c", "core.quotepath=off", "-c", "i18n.logOutputEncoding=UTF-8"]
    log_args = base + ["log", "--format=%H"]
    if limit is not None:
        log_args.append(f"--max-count={int(limit)}")
    hashes = _run_git(log_args).decode("ascii", "replace").split()
    for sha in hashes:
        raw = _run_git(base + [
            "show", "--format=%B%x00", "--patch", "--no-color", "--no-ext-diff",
            "--encoding=UTF-8", "-U3", sha,
        ])
        text = raw.decode("utf-8", "replace")
        message, _, diff = text.partition("\x00")
        yield Commit(sha, message.rstrip("\n"), diff.lstrip("\n"))
