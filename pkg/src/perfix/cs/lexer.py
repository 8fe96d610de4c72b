"""Lexer for C# source text.

Produces a flat token stream that round-trips: concatenating all token
texts (trivia included) reproduces the input exactly. String forms covered:
regular, verbatim (@"..."), interpolated ($"...") and combinations; holes
inside interpolated strings are scanned recursively so embedded braces and
nested strings do not desynchronize the scan.
"""

from __future__ import annotations

from dataclasses import dataclass

from perfix.errors import ParseError

PLACEHOLDER_TEXT = "<∅>"

KEYWORDS = frozenset(
    """
    abstract as base bool break byte case catch char checked class const
    continue decimal default delegate do double else enum event explicit
    extern false finally fixed float for foreach goto if implicit in int
    interface internal is lock long namespace new null object operator out
    override params private protected public readonly ref return sbyte
    sealed short sizeof stackalloc static string struct switch this throw
    true try typeof uint ulong unchecked unsafe ushort using virtual void
    volatile while
    var async await yield when nameof get set init record dynamic partial
    global
    """.split()
)

# Longest-match-first multi-character operators.
_MULTI_PUNCT = [
    "<<=", ">>=", "??=", "...",
    "?.", "??", "=>", "==", "!=", "<=", ">=", "&&", "||", "++", "--",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<", "::", "->",
]

@dataclass(frozen=True)
class Token:
    kind: str  # ident keyword number string char punct comment ws preproc placeholder
    text: str
    start: int
    end: int

    @property
    def is_trivia(self) -> bool:
        return self.kind in ("ws", "comment", "preproc")


def _is_ident_start(c: str) -> bool:
    return c.isalpha() or c == "_"


def _is_ident_part(c: str) -> bool:
    return c.isalnum() or c == "_"


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.n = len(text)

    def error(self, message: str) -> ParseError:
        return ParseError(f"{message} at offset {self.pos}")

    def peek(self, offset: int = 0) -> str:
        i = self.pos + offset
        return self.text[i] if i < self.n else ""

    def startswith(self, s: str) -> bool:
        return self.text.startswith(s, self.pos)

    def scan_regular_string(self) -> None:
        # positioned at the opening quote
        quote = self.text[self.pos]
        self.pos += 1
        while self.pos < self.n:
            c = self.text[self.pos]
            if c == "\\":
                self.pos += 2
                continue
            if c == "\n":
                raise self.error("unterminated string literal")
            self.pos += 1
            if c == quote:
                return
        raise self.error("unterminated string literal")

    def scan_verbatim_string(self) -> None:
        # positioned at the opening quote; "" is the only escape
        self.pos += 1
        while self.pos < self.n:
            if self.text[self.pos] == '"':
                if self.peek(1) == '"':
                    self.pos += 2
                    continue
                self.pos += 1
                return
            self.pos += 1
        raise self.error("unterminated verbatim string literal")

    def scan_interpolated_string(self, verbatim: bool) -> None:
        # positioned at the opening quote
        self.pos += 1
        while self.pos < self.n:
            c = self.text[self.pos]
            if c == '"':
                if verbatim and self.peek(1) == '"':
                    self.pos += 2
                    continue
                self.pos += 1
                return
            if not verbatim and c == "\\":
                self.pos += 2
                continue
            if c == "{":
                if self.peek(1) == "{":
                    self.pos += 2
                    continue
                self.pos += 1
                self.scan_interpolation_hole()
                continue
            if c == "}" and self.peek(1) == "}":
                self.pos += 2
                continue
            if c == "\n" and not verbatim:
                raise self.error("unterminated interpolated string")
            self.pos += 1
        raise self.error("unterminated interpolated string")

    def scan_interpolation_hole(self) -> None:
        # inside {...}; code context again, braces nest, strings recurse
        depth = 1
        while self.pos < self.n:
            c = self.text[self.pos]
            if c == "{":
                depth += 1
                self.pos += 1
            elif c == "}":
                depth -= 1
                self.pos += 1
                if depth == 0:
                    return
            elif c == '"' or self.startswith('@"') or self.startswith('$"'):
                self.scan_string_like()
            elif c == "'":
                self.scan_char()
            else:
                self.pos += 1
        raise self.error("unterminated interpolation hole")

    def scan_string_like(self) -> None:
        # dispatch on the prefix at the current position
        if self.startswith('$@"') or self.startswith('@$"'):
            self.pos += 2
            self.scan_interpolated_string(verbatim=True)
        elif self.startswith('$"'):
            self.pos += 1
            self.scan_interpolated_string(verbatim=False)
        elif self.startswith('@"'):
            self.pos += 1
            self.scan_verbatim_string()
        else:
            self.scan_regular_string()

    def scan_char(self) -> None:
        self.pos += 1
        while self.pos < self.n:
            c = self.text[self.pos]
            if c == "\\":
                self.pos += 2
                continue
            self.pos += 1
            if c == "'":
                return
            if c == "\n":
                raise self.error("unterminated char literal")
        raise self.error("unterminated char literal")


def tokenize(text: str) -> list[Token]:
    """Lex ``text`` into tokens, trivia included.

    Raises ParseError on unterminated strings/comments. Unknown characters
    become single-char punct tokens so the stream always round-trips.
    """
    sc = _Scanner(text)
    tokens: list[Token] = []
    while sc.pos < sc.n:
        start = sc.pos
        c = sc.text[sc.pos]

        if c.isspace():
            while sc.pos < sc.n and sc.text[sc.pos].isspace():
                sc.pos += 1
            tokens.append(Token("ws", text[start:sc.pos], start, sc.pos))
            continue

        if sc.startswith("//"):
            nl = text.find("\n", sc.pos)
            sc.pos = sc.n if nl == -1 else nl
            tokens.append(Token("comment", text[start:sc.pos], start, sc.pos))
            continue

        if sc.startswith("/*"):
            end = text.find("*/", sc.pos + 2)
            if end == -1:
                raise sc.error("unterminated block comment")
            sc.pos = end + 2
            tokens.append(Token("comment", text[start:sc.pos], start, sc.pos))
            continue

        if c == "#":  # '#' only occurs in preprocessor directives
            nl = text.find("\n", sc.pos)
            sc.pos = sc.n if nl == -1 else nl
            tokens.append(Token("preproc", text[start:sc.pos], start, sc.pos))
            continue

        if c == '"' or sc.startswith('@"') or sc.startswith('$"') or \
                sc.startswith('$@"') or sc.startswith('@$"'):
            sc.scan_string_like()
            tokens.append(Token("string", text[start:sc.pos], start, sc.pos))
            continue

        if c == "'":
            sc.scan_char()
            tokens.append(Token("char", text[start:sc.pos], start, sc.pos))
            continue

        if c.isdigit() or (c == "." and sc.peek(1).isdigit()):
            sc.pos += 1
            while sc.pos < sc.n:
                ch = sc.text[sc.pos]
                if ch.isalnum() or ch == "_":
                    sc.pos += 1
                elif ch == "." and sc.peek(1).isdigit():
                    sc.pos += 1
                else:
                    break
            tokens.append(Token("number", text[start:sc.pos], start, sc.pos))
            continue

        if _is_ident_start(c):
            sc.pos += 1
            while sc.pos < sc.n and _is_ident_part(sc.text[sc.pos]):
                sc.pos += 1
            word = text[start:sc.pos]
            kind = "keyword" if word in KEYWORDS else "ident"
            tokens.append(Token(kind, word, start, sc.pos))
            continue

        if sc.startswith(PLACEHOLDER_TEXT):
            # only appears when re-lexing a rendered bug pattern
            sc.pos += len(PLACEHOLDER_TEXT)
            tokens.append(Token("placeholder", PLACEHOLDER_TEXT, start, sc.pos))
            continue

        matched = False
        for op in _MULTI_PUNCT:
            if sc.startswith(op):
                sc.pos += len(op)
                tokens.append(Token("punct", op, start, sc.pos))
                matched = True
                break
        if matched:
            continue

        # single char (operators, delimiters, and any stray character)
        sc.pos += 1
        tokens.append(Token("punct", c, start, sc.pos))

    return tokens


def significant(tokens: list[Token]) -> list[Token]:
    """Drop whitespace, comments and preprocessor lines."""
    return [t for t in tokens if not t.is_trivia]


def normalize_tokens(text: str) -> str:
    """Whitespace/comment-insensitive canonical form: tokens joined by one space."""
    return " ".join(t.text for t in significant(tokenize(text)))
