"""Common-identifier vocabulary: which identifiers/literals name shared APIs.

An identifier is "common" when it occurs in at least ``min_projects``
distinct projects; everything else is treated as project-specific and gets
abstracted away. A curated .NET vocabulary ships with the package for users
without a mining corpus.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from importlib import resources

from perfix.errors import InsufficientCorpus, ParseError

_HEADER_PREFIX = "#vocab v1 min_projects="

DEFAULT_MIN_PROJECTS = 2


@dataclass(frozen=True)
class CommonVocabulary:
    identifiers: frozenset[str]
    literals: frozenset[str]
    min_projects: int = DEFAULT_MIN_PROJECTS
    provenance: dict[tuple[str, str], int] = field(default_factory=dict)

    def has_identifier(self, text: str) -> bool:
        return text in self.identifiers

    def has_literal(self, text: str) -> bool:
        return text in self.literals

    def serialize(self) -> str:
        lines = [f"{_HEADER_PREFIX}{self.min_projects}"]
        entries = [("id", t) for t in self.identifiers] + \
                  [("lit", t) for t in self.literals]
        for kind, text in sorted(entries):
            count = self.provenance.get((kind, text), self.min_projects)
            lines.append(f"{kind}\t{text}\t{count}")
        return "\n".join(lines) + "\n"

    def content_hash(self) -> str:
        return hashlib.sha256(self.serialize().encode("utf-8")).hexdigest()


def build_vocabulary(corpus, min_projects: int = DEFAULT_MIN_PROJECTS) -> CommonVocabulary:
    """Build a vocabulary from ``corpus``: iterable of (project_id, SourceFile).

    An identifier/literal is included iff it appears in >= min_projects
    distinct projects. Raises InsufficientCorpus when the corpus itself
    spans fewer projects than the threshold.
    """
    if min_projects < 2:
        raise ValueError("min_projects must be >= 2")
    seen: dict[tuple[str, str], set[str]] = {}
    projects: set[str] = set()
    for project_id, file in corpus:
        projects.add(project_id)
        for tok in file.code_tokens:
            if tok.kind == "ident":
                key = ("id", tok.text)
            elif tok.kind in ("number", "string", "char"):
                key = ("lit", tok.text)
            else:
                continue
            seen.setdefault(key, set()).add(project_id)
    if len(projects) < min_projects:
        raise InsufficientCorpus(
            f"corpus spans {len(projects)} project(s); need >= {min_projects}")
    provenance = {k: len(v) for k, v in seen.items() if len(v) >= min_projects}
    return CommonVocabulary(
        identifiers=frozenset(t for (k, t) in provenance if k == "id"),
        literals=frozenset(t for (k, t) in provenance if k == "lit"),
        min_projects=min_projects,
        provenance=provenance,
    )


def save_vocabulary(vocab: CommonVocabulary, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(vocab.serialize())


def load_vocabulary(path: str) -> CommonVocabulary:
    with open(path, encoding="utf-8") as fh:
        return _parse_vocab(fh.read(), path)


def _parse_vocab(text: str, origin: str) -> CommonVocabulary:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(_HEADER_PREFIX):
        raise ParseError(f"{origin}: not a vocabulary file (bad header)")
    min_projects = int(lines[0][len(_HEADER_PREFIX):])
    identifiers, literals, provenance = set(), set(), {}
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            kind, tok, count = line.split("\t")
        except ValueError as exc:
            raise ParseError(f"{origin}:{ln}: malformed vocabulary line") from exc
        provenance[(kind, tok)] = int(count)
        (identifiers if kind == "id" else literals).add(tok)
    return CommonVocabulary(frozenset(identifiers), frozenset(literals),
                            min_projects, provenance)


def load_default_vocabulary() -> CommonVocabulary:
    """The bundled .NET standard-library vocabulary."""
    text = resources.files("perfix.data").joinpath("dotnet_vocab.txt").read_text("utf-8")
    return _parse_vocab(text, "<bundled dotnet_vocab.txt>")


def vocabulary_from_texts(project_texts: dict[str, str],
                          min_projects: int = DEFAULT_MIN_PROJECTS) -> CommonVocabulary:
    """Test/CLI helper: build a vocabulary straight from raw file texts."""
    from perfix.cs.parser import parse_file

    corpus = [(pid, parse_file(f"{pid}.cs", text))
              for pid, text in project_texts.items()]
    return build_vocabulary(corpus, min_projects)
