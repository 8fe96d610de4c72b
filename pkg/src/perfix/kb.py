"""Transformation instructions and the pattern-keyed knowledge-base."""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field

from perfix.abstraction import BugPattern, TokenClass, abstract_line, classify_token
from perfix.errors import EmptyChange, KbIoError, VersionMismatch
from perfix.mining import MethodPair, removed_statements
from perfix.vocab import DEFAULT_MIN_PROJECTS, CommonVocabulary

log = logging.getLogger(__name__)

KB_VERSION = 1

# longest identifier list rendered into an instruction; raw sets stay intact
MAX_RENDERED_IDENTIFIERS = 6


@dataclass(frozen=True)
class TransformInstruction:
    category: str  # Addition | Removal | Swap
    added: tuple[str, ...]
    removed: tuple[str, ...]
    text: str


@dataclass(frozen=True)
class KbEntry:
    pattern: str  # BugPattern.raw, the lookup key
    before: str
    after: str
    instruction: TransformInstruction
    repo_id: str
    commit_id: str


@dataclass
class KnowledgeBase:
    entries: dict[str, list[KbEntry]] = field(default_factory=dict)
    vocab_hash: str = ""
    min_projects: int = DEFAULT_MIN_PROJECTS

    @property
    def entry_count(self) -> int:
        return sum(len(v) for v in self.entries.values())

    def all_entries(self):
        for key in sorted(self.entries):
            yield from self.entries[key]


def _common_identifiers_in(statement_texts, method, vocab):
    """Common identifiers of the given statements, ordered by first source
    occurrence, with per-identifier occurrence counts."""
    wanted = set(statement_texts)
    ordered: list[str] = []
    counts: Counter[str] = Counter()
    for stmt in method.statements:
        if stmt.text not in wanted:
            continue
        for tok in stmt.tokens:
            if classify_token(tok, vocab) is TokenClass.CommonIdentifier:
                if tok.text not in counts:
                    ordered.append(tok.text)
                counts[tok.text] += 1
    return ordered, counts


def derive_identifier_sets(pair: MethodPair, vocab: CommonVocabulary):
    """(I_m, I_m') — common identifiers of before-only and after-only
    statements, identifiers present in both removed from both."""
    before_texts = {s.text for s in pair.before.statements}
    after_texts = {s.text for s in pair.after.statements}
    only_before = before_texts - after_texts
    only_after = after_texts - before_texts
    i_m, counts_m = _common_identifiers_in(only_before, pair.before, vocab)
    i_mp, counts_mp = _common_identifiers_in(only_after, pair.after, vocab)
    shared = set(i_m) & set(i_mp)
    i_m = [x for x in i_m if x not in shared]
    i_mp = [x for x in i_mp if x not in shared]
    return i_m, i_mp, counts_m, counts_mp


def _render_list(idents, counts):
    if len(idents) <= MAX_RENDERED_IDENTIFIERS:
        kept = idents
    else:
        by_freq = sorted(idents, key=lambda x: (-counts[x], idents.index(x)))
        keep = set(by_freq[:MAX_RENDERED_IDENTIFIERS])
        kept = [x for x in idents if x in keep]
    return ", ".join(kept)


def derive_instruction(i_m, i_mp, counts_m=None, counts_mp=None) -> TransformInstruction:
    """Render one of the three instruction templates from the identifier
    sets (Addition / Removal / Swap)."""
    counts_m = counts_m or Counter(i_m)
    counts_mp = counts_mp or Counter(i_mp)
    if not i_m and not i_mp:
        raise EmptyChange("no common identifiers changed between the methods")
    if not i_m:
        text = f"PERF: Rewrite the above method with {_render_list(i_mp, counts_mp)}."
        category = "Addition"
    elif not i_mp:
        text = f"PERF: Rewrite the above method without {_render_list(i_m, counts_m)}."
        category = "Removal"
    else:
        text = (f"PERF: Use {_render_list(i_mp, counts_mp)} instead of "
                f"{_render_list(i_m, counts_m)} in the above method.")
        category = "Swap"
    return TransformInstruction(category=category, added=tuple(i_mp),
                                removed=tuple(i_m), text=text)


def _is_bare_placeholder(pattern: BugPattern) -> bool:
    """Patterns with no common identifier carry no signal and are dropped."""
    return not any(cls is TokenClass.CommonIdentifier for cls, _ in pattern.tokens)


def build_kb(pairs, vocab: CommonVocabulary,
             min_projects: int = DEFAULT_MIN_PROJECTS) -> KnowledgeBase:
    """Abstract every removed statement of every pair into a pattern and
    group entries by pattern. Patterns seen in fewer than ``min_projects``
    distinct repos, or containing no common identifier, are dropped.
    Deterministic and input-order independent.
    """
    raw: dict[str, list[KbEntry]] = {}
    dropped_bare = dropped_single = 0
    for pair in pairs:
        try:
            sets = derive_identifier_sets(pair, vocab)
            instruction = derive_instruction(*sets)
        except EmptyChange:
            continue
        for stmt in removed_statements(pair):
            pattern = abstract_line(stmt, vocab)
            if _is_bare_placeholder(pattern):
                dropped_bare += 1
                continue
            entry = KbEntry(pattern=pattern.raw,
                            before=pair.before.text, after=pair.after.text,
                            instruction=instruction,
                            repo_id=pair.repo_id, commit_id=pair.commit_id)
            raw.setdefault(pattern.raw, []).append(entry)

    entries: dict[str, list[KbEntry]] = {}
    for key, group in raw.items():
        if len({e.repo_id for e in group}) < min_projects:
            dropped_single += 1
            continue
        uniq = {(e.repo_id, e.commit_id, e.before, e.after): e for e in group}
        entries[key] = sorted(uniq.values(),
                              key=lambda e: (e.repo_id, e.commit_id, e.before))
    if dropped_bare or dropped_single:
        log.info("build_kb: dropped %d bare-placeholder statements, "
                 "%d single-project patterns", dropped_bare, dropped_single)
    return KnowledgeBase(entries=entries, vocab_hash=vocab.content_hash(),
                         min_projects=min_projects)


def lookup(kb: KnowledgeBase, pattern: BugPattern | str) -> list[KbEntry]:
    key = pattern.raw if isinstance(pattern, BugPattern) else pattern
    return list(kb.entries.get(key, []))


# ---------------------------------------------------------------------------
# persistence: one meta line, then one JSON entry per line


def save_kb(kb: KnowledgeBase, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        meta = {"kb_version": KB_VERSION, "vocab_hash": kb.vocab_hash,
                "entries": kb.entry_count}
        fh.write(json.dumps(meta, ensure_ascii=False) + "\n")
        for entry in kb.all_entries():
            rec = {
                "pattern": entry.pattern,
                "before": entry.before,
                "after": entry.after,
                "instruction": {
                    "category": entry.instruction.category,
                    "added": list(entry.instruction.added),
                    "removed": list(entry.instruction.removed),
                    "text": entry.instruction.text,
                },
                "repo_id": entry.repo_id,
                "commit_id": entry.commit_id,
            }
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def load_kb(path: str, vocab: CommonVocabulary | None = None,
            self_check: bool = True) -> KnowledgeBase:
    """Load a KB file; with a vocabulary, verify its hash and re-derive every
    entry's pattern from the recorded before/after texts."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise KbIoError(f"cannot read {path}: {exc}") from exc
    offset = 0
    lines = data.split(b"\n")
    if not lines or not lines[0].strip():
        raise KbIoError(f"{path}: empty knowledge-base file", offset=0)
    try:
        meta = json.loads(lines[0])
    except ValueError as exc:
        raise KbIoError(f"{path}: bad meta line", offset=0) from exc
    if meta.get("kb_version") != KB_VERSION:
        raise VersionMismatch(
            f"{path}: kb_version {meta.get('kb_version')!r}, expected {KB_VERSION}")
    kb = KnowledgeBase(vocab_hash=meta.get("vocab_hash", ""))
    offset = len(lines[0]) + 1
    for line in lines[1:]:
        if not line.strip():
            offset += len(line) + 1
            continue
        try:
            rec = json.loads(line.decode("utf-8"))
            ins = rec["instruction"]
            entry = KbEntry(
                pattern=rec["pattern"], before=rec["before"], after=rec["after"],
                instruction=TransformInstruction(
                    category=ins["category"], added=tuple(ins["added"]),
                    removed=tuple(ins["removed"]), text=ins["text"]),
                repo_id=rec["repo_id"], commit_id=rec["commit_id"])
        except (ValueError, KeyError) as exc:
            raise KbIoError(f"{path}: truncated or corrupt entry at byte {offset}",
                            offset=offset) from exc
        kb.entries.setdefault(entry.pattern, []).append(entry)
        offset += len(line) + 1
    if kb.entry_count != meta.get("entries"):
        raise KbIoError(
            f"{path}: meta declares {meta.get('entries')} entries, "
            f"found {kb.entry_count}", offset=offset)
    if vocab is not None:
        if vocab.content_hash() != kb.vocab_hash:
            log.warning("%s: vocabulary hash mismatch (built with a different "
                        "vocabulary)", path)
        elif self_check:
            _self_check(kb, vocab, path)
    return kb


def _self_check(kb: KnowledgeBase, vocab: CommonVocabulary, path: str) -> None:
    """Every key must be reproducible by abstracting some statement removed
    between the entry's recorded before and after methods."""
    from perfix.cs.parser import parse_method_text

    for entry in kb.all_entries():
        pair = MethodPair(before=parse_method_text(entry.before),
                          after=parse_method_text(entry.after),
                          repo_id=entry.repo_id, commit_id=entry.commit_id)
        patterns = {abstract_line(s, vocab).raw for s in removed_statements(pair)}
        if entry.pattern not in patterns:
            raise KbIoError(
                f"{path}: entry for {entry.repo_id}/{entry.commit_id} fails "
                f"pattern self-consistency")
