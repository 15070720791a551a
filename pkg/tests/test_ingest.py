import io
import json
import shutil
import subprocess

import pytest
from hypothesis import given, settings, strategies as st

from oracles import HAND_DIFFS, scan_counts
from patchcatch.errors import MalformedHunkHeader, SchemaError, SubprocessFailure
from patchcatch.ingest import (
    Commit,
    count_changes,
    enumerate_repo,
    parse_unified_diff,
    read_commits_jsonl,
    write_commits_jsonl,
)


def test_empty_diff_parses_to_nothing():
    assert parse_unified_diff("") == []


def test_single_hunk_counts():
    files = parse_unified_diff("--- a/f.c\n+++ b/f.c\n@@ -1,3 +1,4 @@\n a\n b\n+new\n c\n")
    assert len(files) == 1
    (hunk,) = files[0].hunks
    assert (hunk.added, hunk.removed) == (1, 0)
    assert (hunk.old_start, hunk.old_len, hunk.new_start, hunk.new_len) == (1, 3, 1, 4)
    assert hunk.is_consistent()
    assert files[0].path_new == "f.c"


def test_plus_header_of_second_file_is_not_an_addition():
    files = parse_unified_diff(HAND_DIFFS[2])
    assert [f.path_new for f in files] == ["x", "y"]
    assert (files[1].added, files[1].removed) == (0, 1)


def test_malformed_header_is_reported_and_parsing_resumes(caplog):
    errors = []
    files = parse_unified_diff(HAND_DIFFS[7], errors)
    assert len(errors) == 1 and isinstance(errors[0], MalformedHunkHeader)
    assert errors[0].lineno == 4
    assert count_changes(files) == (1, 0)
    assert "malformed hunk header" in caplog.text


def test_binary_file_has_flag_and_no_hunks():
    files = parse_unified_diff(HAND_DIFFS[6])
    assert files[0].binary and files[0].hunks == []
    assert not files[1].binary


def test_crlf_is_normalized():
    lf = parse_unified_diff(HAND_DIFFS[5].replace("\r\n", "\n"))
    crlf = parse_unified_diff(HAND_DIFFS[5])
    assert [h.lines for h in crlf[0].hunks] == [h.lines for h in lf[0].hunks]


def test_omitted_lengths_default_to_one():
    (fd,) = parse_unified_diff(HAND_DIFFS[4])
    hunk = fd.hunks[0]
    assert (hunk.old_len, hunk.new_len, hunk.lengths_declared) == (1, 1, False)


def test_hunk_lines_keep_order_and_text():
    (fd,) = parse_unified_diff(HAND_DIFFS[3])
    assert fd.hunks[0].lines == [("removed", "old"), ("added", "new"), ("context", "ctx")]


line_text = st.text(alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters="\r\n"),
                    max_size=12)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["+", "-", " ", "@@ ", "+++", "---", "diff --git a/a b/b", ""]),
                          line_text), max_size=30))
def test_parser_is_total_and_never_overcounts(lines):
    text = "\n".join(prefix + body for prefix, body in lines)
    errors = []
    files = parse_unified_diff(text, errors)
    added, removed = count_changes(files)
    # the parser can only skip lines, never invent them
    scan_added = sum(1 for p, b in lines if (p + b).startswith("+") and not (p + b).startswith("+++"))
    scan_removed = sum(1 for p, b in lines if (p + b).startswith("-") and not (p + b).startswith("---"))
    assert added <= scan_added and removed <= scan_removed


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("+- "), st.sampled_from(["a", "x = 1;", "", "free(p);"])),
                min_size=1, max_size=15))
def test_well_formed_hunks_match_scanner(body):
    body = [k + t for k, t in body]
    old = sum(1 for b in body if b[0] != "+")
    new = sum(1 for b in body if b[0] != "-")
    text = f"--- a/f\n+++ b/f\n@@ -1,{old} +1,{new} @@\n" + "\n".join(body) + "\n"
    files = parse_unified_diff(text)
    assert count_changes(files) == scan_counts(text)
    assert files[0].hunks[0].is_consistent()


# -- JSONL -------------------------------------------------------------------

def _write(tmp_path, text):
    path = tmp_path / "in.jsonl"
    path.write_text(text, encoding="utf-8")
    return path


def test_jsonl_maps_fields(tmp_path):
    path = _write(tmp_path, '{"id":"a1","message":"fix","diff":"","label":1}\n{"id":"a2","message":"m","diff":"d"}\n')
    commits = list(read_commits_jsonl(path))
    assert commits == [Commit("a1", "fix", "", 1), Commit("a2", "m", "d", None)]


@pytest.mark.parametrize("line", [
    '{"id":"a1","message":"fix","diff":"","label":2}',
    '{"id":"a1","message":"fix","diff":"","label":true}',
    '{"id":"a1","message":"fix"}',
    '{"id":"","message":"fix","diff":""}',
    '{"id":"a1","message":3,"diff":""}',
    "not json",
    "[1, 2]",
])
def test_jsonl_schema_errors_carry_line_number(tmp_path, line):
    path = _write(tmp_path, '{"id":"ok","message":"","diff":""}\n' + line + "\n")
    with pytest.raises(SchemaError) as info:
        list(read_commits_jsonl(path))
    assert info.value.lineno == 2


def test_jsonl_rejects_duplicate_ids(tmp_path):
    path = _write(tmp_path, '{"id":"a","message":"","diff":""}\n{"id":"a","message":"","diff":""}\n')
    with pytest.raises(SchemaError):
        list(read_commits_jsonl(path))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.text(min_size=1, max_size=8), st.text(max_size=20), st.text(max_size=40),
                          st.sampled_from([None, 0, 1])),
                max_size=6, unique_by=lambda t: t[0]))
def test_jsonl_round_trip(tmp_path_factory, records):
    path = tmp_path_factory.mktemp("rt") / "c.jsonl"
    commits = [Commit(*r) for r in records]
    assert write_commits_jsonl(commits, path) == len(commits)
    assert list(read_commits_jsonl(path)) == commits


def test_jsonl_reads_stdin(monkeypatch):
    monkeypatch.setattr("sys.stdin", io.StringIO('{"id":"s","message":"m","diff":""}\n'))
    assert [c.id for c in read_commits_jsonl("-")] == ["s"]


def test_to_json_key_order():
    assert list(json.loads(Commit("i", "m", "d", 0).to_json())) == ["id", "message", "diff", "label"]


# -- git -----------------------------------------------------------------------

needs_git = pytest.mark.skipif(shutil.which("git") is None, reason="git not installed")


def _git(repo, *args):
    subprocess.run(["git", "-C", str(repo), *args], check=True, capture_output=True)


@pytest.fixture
def repo(tmp_path):
    path = tmp_path / "repo"
    path.mkdir()
    _git(path, "init", "-q")
    _git(path, "config", "user.email", "dev@example.org")
    _git(path, "config", "user.name", "Dev")
    _git(path, "config", "commit.gpgsign", "false")
    (path / "a.c").write_text("int a;\n")
    _git(path, "add", "a.c")
    _git(path, "commit", "-q", "-m", "first")
    (path / "a.c").write_text("int a;\nint b;\n")
    _git(path, "commit", "-q", "-am", "second\n\nbody line")
    (path / "a.c").write_text("int b;\n")
    _git(path, "commit", "-q", "-am", "third")
    return path


@needs_git
def test_enumerate_repo_newest_first_with_limit(repo):
    commits = list(enumerate_repo(repo, limit=2))
    assert [c.message for c in commits] == ["third", "second\n\nbody line"]
    assert all(len(c.id) == 40 for c in commits)


@needs_git
def test_enumerate_repo_diff_counts(repo):
    commits = list(enumerate_repo(repo))
    assert len(commits) == 3
    second = commits[1]
    assert count_changes(parse_unified_diff(second.diff)) == (1, 0)
    assert count_changes(parse_unified_diff(commits[0].diff)) == (0, 1)


@needs_git
def test_enumerate_missing_repo_fails(tmp_path):
    with pytest.raises(SubprocessFailure) as info:
        list(enumerate_repo(tmp_path / "nope"))
    assert info.value.returncode != 0 and info.value.stderr
