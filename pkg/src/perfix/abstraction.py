"""Statement abstraction: turn a concrete buggy line into a reusable pattern.

Project-specific identifiers and literals are replaced by the placeholder
token "<∅>"; whole subtrees that contain no common identifier collapse to a
single placeholder. What survives is the skeleton of common-API usage, e.g.

    Foo().Where(x => x.Bar()).FirstOrDefault();
        ->  <∅>.Where(<∅>).FirstOrDefault();
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from perfix.cs.lexer import PLACEHOLDER_TEXT, Token
from perfix.cs.parser import Node, Statement
from perfix.vocab import CommonVocabulary


class TokenClass(enum.Enum):
    Keyword = "keyword"
    Syntax = "syntax"
    CommonIdentifier = "common_identifier"
    ProjectIdentifier = "project_identifier"
    CommonLiteral = "common_literal"
    ProjectLiteral = "project_literal"
    Placeholder = "placeholder"


def classify_token(token: Token, vocab: CommonVocabulary) -> TokenClass:
    """Total classification of a leaf token under a vocabulary."""
    if token.kind == "keyword":
        return TokenClass.Keyword
    if token.kind == "punct":
        return TokenClass.Syntax
    if token.kind == "placeholder":
        return TokenClass.Placeholder
    if token.kind == "ident":
        return (TokenClass.CommonIdentifier if vocab.has_identifier(token.text)
                else TokenClass.ProjectIdentifier)
    # number / string / char
    return (TokenClass.CommonLiteral if vocab.has_literal(token.text)
            else TokenClass.ProjectLiteral)


_KEPT = (TokenClass.Keyword, TokenClass.Syntax,
         TokenClass.CommonIdentifier, TokenClass.CommonLiteral)
_COMMON = (TokenClass.CommonIdentifier, TokenClass.CommonLiteral)

# canonical pattern rendering: no space before these tokens...
_NO_SPACE_BEFORE = {".", ",", "(", ")", ";", "]", "<", ">", "?."}
# ...and none after these
_NO_SPACE_AFTER = {"(", "[", "<", ".", "?."}


@dataclass(frozen=True)
class BugPattern:
    """An abstracted statement; the knowledge-base lookup key."""

    tokens: tuple[tuple[TokenClass, str], ...]
    raw: str

    def __str__(self) -> str:
        return self.raw


def render_pattern_tokens(tokens) -> str:
    out: list[str] = []
    prev: str | None = None
    for _, text in tokens:
        if prev is not None and text not in _NO_SPACE_BEFORE \
                and prev not in _NO_SPACE_AFTER:
            out.append(" ")
        out.append(text)
        prev = text
    return "".join(out)


def _contains_common(item, vocab) -> bool:
    if isinstance(item, Token):
        return classify_token(item, vocab) in _COMMON
    return any(_contains_common(c, vocab) for c in item.children)


def _abstract_node(item, vocab, out: list) -> None:
    if isinstance(item, Token):
        cls = classify_token(item, vocab)
        if cls in _KEPT:
            out.append((cls, item.text))
        else:
            out.append((TokenClass.Placeholder, PLACEHOLDER_TEXT))
        return
    if not _contains_common(item, vocab):
        out.append((TokenClass.Placeholder, PLACEHOLDER_TEXT))
        return
    for child in item.children:
        _abstract_node(child, vocab, out)


def _merge_placeholders(tokens: list) -> list:
    """Collapse placeholder runs; commas joining two placeholders vanish so
    argument lists of different arity abstract to the same pattern."""
    out: list = []
    i = 0
    ph = (TokenClass.Placeholder, PLACEHOLDER_TEXT)
    while i < len(tokens):
        cls, text = tokens[i]
        if cls is TokenClass.Placeholder and out and out[-1] == ph:
            i += 1
            continue
        if text == "," and out and out[-1] == ph \
                and i + 1 < len(tokens) and tokens[i + 1][0] is TokenClass.Placeholder:
            i += 1
            continue
        out.append((cls, text))
        i += 1
    return out


def abstract_line(stmt: Statement | Node, vocab: CommonVocabulary) -> BugPattern:
    """Abstract one statement into a BugPattern.

    A statement with no common identifiers/literals at all abstracts to a
    single placeholder (plus any trailing kept syntax such as ';').
    """
    tree = stmt.tree if isinstance(stmt, Statement) else stmt
    raw_tokens: list = []
    for child in tree.children:
        _abstract_node(child, vocab, raw_tokens)
    merged = _merge_placeholders(raw_tokens)
    return BugPattern(tokens=tuple(merged), raw=render_pattern_tokens(merged))


def abstract_text(statement_text: str, vocab: CommonVocabulary) -> BugPattern:
    """Abstract a statement given as raw text (re-lexes and re-parses it).

    "<∅>" in the input lexes as a single project-foreign token, so rendered
    patterns can be re-abstracted (idempotence).
    """
    from perfix.cs.lexer import significant, tokenize
    from perfix.cs.parser import parse_statement_tree

    toks = significant(tokenize(statement_text))
    return abstract_line(parse_statement_tree(toks), vocab)
