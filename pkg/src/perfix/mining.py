"""Mine git repositories for performance-fix commits and method pairs."""

from __future__ import annotations

import json
import logging
import subprocess
from dataclasses import dataclass, field

from perfix.cs.parser import (
    SourceFile,
    SourceMethod,
    Statement,
    extract_methods,
    parse_file,
    parse_method_text,
)
from perfix.errors import NoDifference, ParseError, RepoAccessError

log = logging.getLogger(__name__)

PERF_TITLE_PREFIXES = ("PERF:", "[PERF]")


@dataclass
class CommitFilters:
    prefixes: tuple[str, ...] = PERF_TITLE_PREFIXES
    branch: str | None = None  # default: the repo's current HEAD branch


@dataclass
class PerfCommit:
    repo_id: str
    commit_id: str
    title: str
    changeset: list[tuple[SourceFile, SourceFile]] = field(default_factory=list)


@dataclass
class MethodPair:
    before: SourceMethod
    after: SourceMethod
    repo_id: str
    commit_id: str

    @property
    def key(self):
        return (self.before.type_name, self.before.name, self.before.arity)


@dataclass
class LocalizedBug:
    pair: MethodPair
    buggy_line: Statement
    line_index: int


def title_is_perf(title: str, prefixes=PERF_TITLE_PREFIXES) -> bool:
    t = title.strip().lower()
    return any(t.startswith(p.lower()) for p in prefixes)


def _git(repo_path: str, *args: str) -> str:
    try:
        res = subprocess.run(["git", "-C", repo_path, *args],
                             capture_output=True, text=True, check=True)
    except FileNotFoundError as exc:
        raise RepoAccessError("git executable not found") from exc
    except subprocess.CalledProcessError as exc:
        raise RepoAccessError(
            f"git {' '.join(args)} failed in {repo_path}: {exc.stderr.strip()}") from exc
    return res.stdout


def _default_branch(repo_path: str) -> str:
    try:
        return _git(repo_path, "symbolic-ref", "--short", "HEAD").strip()
    except RepoAccessError:
        return "HEAD"


def select_perf_commits(repo_path: str, filters: CommitFilters | None = None,
                        repo_id: str = "") -> list[PerfCommit]:
    """Commits on the main branch whose title starts with a PERF prefix
    (case-insensitive), with the parsed before/after versions of every
    modified .cs file. Files that fail to parse on either side are skipped
    with a diagnostic.
    """
    filters = filters or CommitFilters()
    branch = filters.branch or _default_branch(repo_path)
    raw = _git(repo_path, "log", "--first-parent", "--format=%H%x1f%s", branch)
    commits: list[PerfCommit] = []
    for line in raw.splitlines():
        if "\x1f" not in line:
            continue
        commit_id, title = line.split("\x1f", 1)
        if not title_is_perf(title, filters.prefixes):
            continue
        commit = PerfCommit(repo_id=repo_id or repo_path,
                            commit_id=commit_id, title=title)
        commit.changeset = _changed_cs_files(repo_path, commit_id)
        commits.append(commit)
    return commits


def _changed_cs_files(repo_path: str, commit_id: str):
    try:
        raw = _git(repo_path, "diff-tree", "--no-commit-id",
                   "--name-status", "-r", commit_id)
    except RepoAccessError:
        return []  # root commit: nothing modified
    changeset = []
    for line in raw.splitlines():
        parts = line.split("\t")
        if len(parts) != 2 or parts[0] != "M" or not parts[1].endswith(".cs"):
            continue
        path = parts[1]
        try:
            before_text = _git(repo_path, "show", f"{commit_id}^:{path}")
            after_text = _git(repo_path, "show", f"{commit_id}:{path}")
            before = parse_file(path, before_text)
            after = parse_file(path, after_text)
        except (RepoAccessError, ParseError) as exc:
            log.warning("skipping %s @ %s: %s", path, commit_id[:10], exc)
            continue
        changeset.append((before, after))
    return changeset


def pair_methods(commit: PerfCommit) -> list[MethodPair]:
    """Match before/after methods by (containing type, name, arity); drop
    unpaired and textually unchanged methods. Output order: file order, then
    span order within the before file.
    """
    pairs: list[MethodPair] = []
    for before_file, after_file in commit.changeset:
        after_by_key: dict[tuple, list[SourceMethod]] = {}
        for m in extract_methods(after_file):
            after_by_key.setdefault((m.type_name, m.name, m.arity), []).append(m)
        for m in extract_methods(before_file):
            candidates = after_by_key.get((m.type_name, m.name, m.arity))
            if not candidates or len(candidates) > 1:
                continue  # unpaired or ambiguous
            other = candidates[0]
            if m.normalized == other.normalized:
                continue
            pairs.append(MethodPair(before=m, after=other,
                                    repo_id=commit.repo_id,
                                    commit_id=commit.commit_id))
    return pairs


def diff_removed_statements(pair: MethodPair) -> set[str]:
    """Normalized texts of before-statements absent from the after method."""
    after_texts = {s.text for s in pair.after.statements}
    return {s.text for s in pair.before.statements if s.text not in after_texts}


def removed_statements(pair: MethodPair) -> list[Statement]:
    """Statement objects behind diff_removed_statements, in source order."""
    after_texts = {s.text for s in pair.after.statements}
    seen: set[str] = set()
    out = []
    for s in pair.before.statements:
        if s.text not in after_texts and s.text not in seen:
            seen.add(s.text)
            out.append(s)
    return out


def localize_bug(pair: MethodPair) -> LocalizedBug:
    """First before-statement that does not match the same-index after
    statement (or the first statement past the after method's length)."""
    before, after = pair.before.statements, pair.after.statements
    for i, stmt in enumerate(before):
        if i >= len(after) or stmt.text != after[i].text:
            return LocalizedBug(pair=pair, buggy_line=stmt, line_index=i)
    raise NoDifference(
        f"{pair.before.name}: before and after statements are identical")


# ---------------------------------------------------------------------------
# manifest + JSONL records


def read_manifest(path: str) -> list[tuple[str, str]]:
    """Newline-delimited `repo_id<TAB>path` entries."""
    entries = []
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            if "\t" not in line:
                raise ParseError(f"{path}:{ln}: expected 'repo_id<TAB>path'")
            repo_id, repo_path = line.split("\t", 1)
            entries.append((repo_id, repo_path))
    return entries


def bug_record(bug: LocalizedBug) -> dict:
    pair = bug.pair
    return {
        "repo_id": pair.repo_id,
        "commit_id": pair.commit_id,
        "file": pair.before.file.path,
        "method_name": pair.before.name,
        "before_text": pair.before.text,
        "after_text": pair.after.text,
        "buggy_line_text": bug.buggy_line.text,
        "buggy_line_index": bug.line_index,
    }


def write_records(records, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


def pairs_from_records(path: str) -> list[MethodPair]:
    """Rebuild MethodPairs from a mined JSONL file (before/after re-parsed)."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            rec = json.loads(line)
            try:
                before = parse_method_text(rec["before_text"], rec.get("file", f"line{ln}"))
                after = parse_method_text(rec["after_text"], rec.get("file", f"line{ln}"))
            except ParseError as exc:
                log.warning("skipping record %s:%d: %s", path, ln, exc)
                continue
            pairs.append(MethodPair(before=before, after=after,
                                    repo_id=rec["repo_id"],
                                    commit_id=rec["commit_id"]))
    return pairs


def mine_repo(repo_id: str, repo_path: str,
              filters: CommitFilters | None = None) -> list[LocalizedBug]:
    """select_perf_commits + pair_methods + localize_bug for one repo."""
    bugs = []
    for commit in select_perf_commits(repo_path, filters, repo_id=repo_id):
        for pair in pair_methods(commit):
            try:
                bugs.append(localize_bug(pair))
            except NoDifference:  # pragma: no cover - pair invariant
                continue
    return bugs
