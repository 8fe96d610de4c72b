"""Structural parser for C# files.

Not a full grammar: it lexes, matches brackets, and recovers the structure
the pipeline needs — type declarations, methods/constructors/property
accessors with their signatures and bodies, statement boundaries, and a
nesting tree per statement (member-access / call / lambda shaped) that the
abstraction and featurization passes walk.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

from perfix.cs.lexer import Token, significant, tokenize
from perfix.errors import ParseError

TYPE_KEYWORDS = ("class", "struct", "interface", "record")

# keywords that open a parenthesized control-flow header
_HEADER_KEYWORDS = ("if", "while", "for", "foreach", "switch", "lock", "fixed")

# statement-leading keywords kept as direct children of the statement node
_STMT_LEAD = ("return", "throw", "break", "continue", "goto", "yield",
              "else", "try", "finally", "do", "case", "default", "using")

_OPEN = {"(": ")", "[": "]", "{": "}"}
_CLOSE = {")": "(", "]": "[", "}": "{"}


@dataclass
class Node:
    """Internal node of a statement tree; leaves are Tokens."""

    kind: str
    children: list = field(default_factory=list)

    def leaves(self):
        for c in self.children:
            if isinstance(c, Node):
                yield from c.leaves()
            else:
                yield c

    def walk(self, parent_kind: str = "stmt"):
        """Yield (token, enclosing-node-kind) pairs in order."""
        for c in self.children:
            if isinstance(c, Node):
                yield from c.walk(self.kind)
            else:
                yield c, self.kind


@dataclass
class Statement:
    """One statement-level unit of a method body."""

    tokens: list[Token]
    span: tuple[int, int]

    @property
    def text(self) -> str:
        return " ".join(t.text for t in self.tokens)

    @cached_property
    def tree(self) -> Node:
        return parse_statement_tree(self.tokens)

    def __repr__(self):
        return f"Statement({self.text!r})"


@dataclass
class SourceMethod:
    """A method, constructor, or property accessor with its body."""

    file: "SourceFile"
    type_name: str
    name: str
    arity: int
    signature: str
    body: str
    span: tuple[int, int]
    sig_tokens: list[Token]
    body_tokens: list[Token]
    statements: list[Statement]

    @property
    def text(self) -> str:
        return self.file.content[self.span[0]:self.span[1]]

    @property
    def normalized(self) -> str:
        toks = [t.text for t in self.sig_tokens] + [t.text for t in self.body_tokens]
        return " ".join(toks)

    def __repr__(self):
        return f"SourceMethod({self.type_name}.{self.name}/{self.arity})"


@dataclass
class SourceFile:
    path: str
    content: str
    tokens: list[Token]
    code_tokens: list[Token]
    brackets: dict[int, int]

    def slice(self, start: int, end: int) -> str:
        return self.content[start:end]


def _match_brackets(code_tokens: list[Token]) -> dict[int, int]:
    stack: list[int] = []
    out: dict[int, int] = {}
    for i, t in enumerate(code_tokens):
        if t.text in _OPEN:
            stack.append(i)
        elif t.text in _CLOSE:
            if not stack or code_tokens[stack[-1]].text != _CLOSE[t.text]:
                raise ParseError(
                    f"mismatched '{t.text}' at offset {t.start}")
            out[stack.pop()] = i
    if stack:
        t = code_tokens[stack[-1]]
        raise ParseError(f"unclosed '{t.text}' at offset {t.start}")
    return out


def parse_file(path: str, content: str, max_error_ratio: float = 0.0) -> SourceFile:
    """Lex and structurally validate a C# file.

    Any lexical error or bracket mismatch rejects the file (the parser has
    no partial-error recovery, so every error trips the default ratio of 0).
    """
    try:
        tokens = tokenize(content)
        code = significant(tokens)
        brackets = _match_brackets(code)
    except ParseError:
        if max_error_ratio >= 1.0:
            raise ParseError(f"{path}: unrecoverable parse failure")
        raise
    return SourceFile(path=path, content=content, tokens=tokens,
                      code_tokens=code, brackets=brackets)


# ---------------------------------------------------------------------------
# member extraction


def extract_methods(file: SourceFile) -> list[SourceMethod]:
    """All methods/constructors/property accessors with bodies, source order.

    Local functions nested inside method bodies are not emitted separately.
    """
    out: list[SourceMethod] = []
    _scan_members(file, 0, len(file.code_tokens), "", out)
    return out


def _find_header_end(file, i, hi):
    """Return (kind, j) where toks[j] is '{', '=>' or ';' ending the header."""
    toks = file.code_tokens
    j = i
    saw_assign = False
    while j < hi:
        t = toks[j]
        if t.text in ("(", "["):
            j = file.brackets[j] + 1
            continue
        if t.text == "{":
            if saw_assign:  # field/property initializer brace
                j = file.brackets[j] + 1
                continue
            return "block", j
        if t.text == "=>":
            return "expr", j
        if t.text == ";":
            return "none", j
        if t.text == "=":
            saw_assign = True
        j += 1
    return "none", hi


def _param_list(file, i, header_end):
    """First top-level '(' of a member header, or None."""
    toks = file.code_tokens
    j = i
    while j < header_end:
        t = toks[j]
        if t.text == "[":
            j = file.brackets[j] + 1
            continue
        if t.text == "(":
            return j
        j += 1
    return None


def _arity(file, open_idx):
    toks = file.code_tokens
    close = file.brackets[open_idx]
    if close == open_idx + 1:
        return 0
    commas = 0
    j = open_idx + 1
    while j < close:
        t = toks[j]
        if t.text in ("(", "[", "{"):
            j = file.brackets[j] + 1
            continue
        if t.text == ",":
            commas += 1
        j += 1
    return commas + 1


def _expr_body_end(file, arrow_idx, hi):
    """Index of the ';' terminating an expression body."""
    toks = file.code_tokens
    j = arrow_idx + 1
    while j < hi:
        t = toks[j]
        if t.text in ("(", "[", "{"):
            j = file.brackets[j] + 1
            continue
        if t.text == ";":
            return j
        j += 1
    raise ParseError(f"expression body at offset {toks[arrow_idx].start} missing ';'")


def _make_method(file, type_name, name, arity, start_idx, header_end, kind, hi):
    toks = file.code_tokens
    sig_start = toks[start_idx].start
    sig_text = file.content[sig_start:toks[header_end].start].rstrip()
    sig_tokens = toks[start_idx:header_end]
    if kind == "block":
        close = file.brackets[header_end]
        body_tokens = toks[header_end:close + 1]
        statements = split_block(file, header_end + 1, close)
        end_idx = close
    else:  # expression body: '=> expr ;'
        semi = _expr_body_end(file, header_end, hi)
        body_tokens = toks[header_end:semi + 1]
        stmt_toks = toks[header_end + 1:semi + 1]
        statements = [Statement(stmt_toks, (stmt_toks[0].start, stmt_toks[-1].end))] \
            if stmt_toks else []
        end_idx = semi
    body_text = file.content[toks[header_end].start:toks[end_idx].end]
    span = (sig_start, toks[end_idx].end)
    return SourceMethod(file=file, type_name=type_name, name=name, arity=arity,
                        signature=sig_text, body=body_text, span=span,
                        sig_tokens=sig_tokens, body_tokens=body_tokens,
                        statements=statements), end_idx


def _scan_property_accessors(file, type_name, prop_name, prop_start,
                             body_open, out):
    """Emit get_X/set_X/init_X accessors that carry a body."""
    toks = file.code_tokens
    close = file.brackets[body_open]
    i = body_open + 1
    while i < close:
        t = toks[i]
        if t.text == "[":  # accessor attribute
            i = file.brackets[i] + 1
            continue
        if t.kind == "keyword" and t.text in ("get", "set", "init"):
            kind, j = _find_header_end(file, i, close)
            if kind == "none":  # auto-accessor, no body
                i = j + 1
                continue
            name = f"{t.text}_{prop_name}"
            arity = 0 if t.text == "get" else 1
            method, end_idx = _make_method(
                file, type_name, name, arity, i, j, kind, close)
            out.append(method)
            i = end_idx + 1
            continue
        i += 1


def _scan_members(file, lo, hi, type_name, out):
    toks = file.code_tokens
    i = lo
    while i < hi:
        t = toks[i]
        if t.text == "[":  # attribute list
            i = file.brackets[i] + 1
            continue
        if t.text == ";":
            i += 1
            continue
        if t.kind == "keyword" and t.text == "namespace":
            j = i
            while j < hi and toks[j].text not in ("{", ";"):
                j += 1
            if j < hi and toks[j].text == "{":
                _scan_members(file, j + 1, file.brackets[j], type_name, out)
                i = file.brackets[j] + 1
            else:
                i = j + 1  # file-scoped namespace
            continue

        kind, header_end = _find_header_end(file, i, hi)
        header = toks[i:header_end]
        header_words = [h.text for h in header if h.kind == "keyword"]

        if any(w in TYPE_KEYWORDS for w in header_words) or "enum" in header_words:
            if kind == "block" and "enum" not in header_words:
                kw_idx = next(k for k in range(i, header_end)
                              if toks[k].text in TYPE_KEYWORDS)
                inner_name = ""
                for k in range(kw_idx + 1, header_end):
                    if toks[k].kind == "ident":
                        inner_name = toks[k].text
                        break
                _scan_members(file, header_end + 1, file.brackets[header_end],
                              inner_name, out)
            i = _member_end(file, header_end, kind, hi)
            continue

        if kind == "none":
            i = header_end + 1
            continue

        if "operator" in header_words or "delegate" in header_words \
                or "event" in header_words:
            i = _member_end(file, header_end, kind, hi)
            continue

        params = _param_list(file, i, header_end)
        if params is not None:
            name_idx = params - 1
            if name_idx >= i and toks[name_idx].text == ">":
                depth = 1
                k = name_idx - 1
                while k >= i and depth:
                    if toks[k].text == ">":
                        depth += 1
                    elif toks[k].text == "<":
                        depth -= 1
                    k -= 1
                name_idx = k
            if name_idx >= i and toks[name_idx].kind == "ident":
                method, end_idx = _make_method(
                    file, type_name, toks[name_idx].text, _arity(file, params),
                    i, header_end, kind, hi)
                out.append(method)
                i = end_idx + 1
                continue
            i = _member_end(file, header_end, kind, hi)
            continue

        # property (no parameter list)
        prop_name = ""
        for k in range(header_end - 1, i - 1, -1):
            if toks[k].kind == "ident":
                prop_name = toks[k].text
                break
        if not prop_name:
            i = _member_end(file, header_end, kind, hi)
            continue
        if kind == "expr":  # int P => expr;
            method, end_idx = _make_method(
                file, type_name, f"get_{prop_name}", 0, i, header_end, kind, hi)
            out.append(method)
            i = end_idx + 1
            continue
        _scan_property_accessors(file, type_name, prop_name, i, header_end, out)
        i = file.brackets[header_end] + 1


def _member_end(file, header_end, kind, hi):
    if kind == "block":
        return file.brackets[header_end] + 1
    if kind == "expr":
        return _expr_body_end(file, header_end, hi) + 1
    return header_end + 1


# ---------------------------------------------------------------------------
# statement splitting


def split_statements(method: SourceMethod) -> list[Statement]:
    return method.statements


def split_block(file: SourceFile, lo: int, hi: int) -> list[Statement]:
    """Statements of the block interior [lo, hi): blocks flattened,
    control-flow headers emitted as their own statements."""
    toks = file.code_tokens
    out: list[Statement] = []

    def emit(a, b):  # inclusive token index range
        st = toks[a:b + 1]
        out.append(Statement(st, (st[0].start, st[-1].end)))

    i = lo
    while i < hi:
        t = toks[i]
        if t.text == "{":
            out.extend(split_block(file, i + 1, file.brackets[i]))
            i = file.brackets[i] + 1
            continue
        if t.text == ";":
            i += 1
            continue
        if t.kind == "keyword":
            w = t.text
            has_paren = i + 1 < hi and toks[i + 1].text == "("
            if w in _HEADER_KEYWORDS and has_paren:
                close = file.brackets[i + 1]
                if w == "while" and close + 1 < hi and toks[close + 1].text == ";":
                    emit(i, close + 1)  # do-while tail
                    i = close + 2
                else:
                    emit(i, close)
                    i = close + 1
                continue
            if w == "using" and has_paren:
                close = file.brackets[i + 1]
                emit(i, close)
                i = close + 1
                continue
            if w == "else":
                if i + 2 < hi and toks[i + 1].text == "if" and toks[i + 2].text == "(":
                    close = file.brackets[i + 2]
                    emit(i, close)
                    i = close + 1
                else:
                    emit(i, i)
                    i += 1
                continue
            if w in ("try", "finally", "do"):
                emit(i, i)
                i += 1
                continue
            if w == "catch":
                j = i + 1
                if j < hi and toks[j].text == "(":
                    j = file.brackets[j] + 1
                if j + 1 < hi and toks[j].text == "when" and toks[j + 1].text == "(":
                    j = file.brackets[j + 1] + 1
                emit(i, j - 1)
                i = j
                continue
            if w in ("case", "default"):
                j = i
                while j < hi and toks[j].text != ":":
                    if toks[j].text in ("(", "[", "{"):
                        j = file.brackets[j] + 1
                    else:
                        j += 1
                emit(i, min(j, hi - 1))
                i = j + 1
                continue

        # generic statement: consume to ';' at depth 0
        start = i
        saw_assign = saw_arrow = saw_new = False
        j = i
        ended = False
        while j < hi:
            tt = toks[j]
            if tt.text in ("(", "["):
                j = file.brackets[j] + 1
                continue
            if tt.text == "{":
                if (not saw_assign and not saw_arrow and not saw_new
                        and j > start and toks[j - 1].text == ")"):
                    # local function or similar block-terminated construct
                    end = file.brackets[j]
                    emit(start, end)
                    j = end + 1
                    ended = True
                    break
                j = file.brackets[j] + 1
                continue
            if tt.text == ";":
                emit(start, j)
                j += 1
                ended = True
                break
            if tt.text == "=" or (tt.kind == "punct" and tt.text.endswith("=")
                                  and tt.text not in ("==", "!=", "<=", ">=")):
                saw_assign = True
            elif tt.text == "=>":
                saw_arrow = True
            elif tt.kind == "keyword" and tt.text == "new":
                saw_new = True
            j += 1
        if not ended and j > start:
            emit(start, j - 1)
        i = j
    return out


# ---------------------------------------------------------------------------
# statement trees


class _ExprParser:
    _SEPARATORS = (",", ";", ":")
    _CHAIN = (".", "?.", "->", "::")
    _GROUPS = {"(": ("paren", ")"), "{": ("block", "}"), "[": ("bracket", "]")}

    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    @property
    def cur(self) -> Token | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def peek(self, k=1) -> Token | None:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def take(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def parse_elements(self, closers: tuple[str, ...]) -> list:
        elems = []
        while self.cur is not None and self.cur.text not in closers:
            if self.cur.text in self._SEPARATORS:
                elems.append(self.take())
                continue
            elems.append(self.parse_expr(closers))
        return elems

    def parse_expr(self, closers):
        node = self.parse_postfix(closers)
        while (self.cur is not None and self.cur.text not in closers
               and self.cur.text not in self._SEPARATORS):
            t = self.cur
            if t.text == "=>":
                arrow = self.take()
                if self.cur is None or self.cur.text in closers:
                    node = Node("lambda", [node, arrow])
                else:
                    node = Node("lambda", [node, arrow, self.parse_expr(closers)])
            elif t.kind == "punct":
                op = self.take()
                if (self.cur is None or self.cur.text in closers
                        or self.cur.text in self._SEPARATORS):
                    node = Node("binop", [node, op])
                else:
                    node = Node("binop", [node, op, self.parse_postfix(closers)])
            else:
                break  # juxtaposition (e.g. declarations): new sibling element
        return node

    def parse_postfix(self, closers):
        node = self.parse_primary(closers)
        while self.cur is not None:
            t = self.cur
            nxt = self.peek()
            if t.text in self._CHAIN and nxt is not None \
                    and nxt.kind in ("ident", "keyword", "placeholder"):
                dot = self.take()
                name = self.take()
                node = Node("member", [node, dot, name])
            elif t.text == "<" and self._type_args_end() is not None:
                end = self._type_args_end()
                children = [node]
                while self.i <= end:
                    children.append(self.take())
                node = Node("generic", children)
            elif t.text == "(":
                node = Node("call", [node, *self._group_children(")")])
            elif t.text == "[":
                node = Node("index", [node, *self._group_children("]")])
            elif t.text in ("++", "--", "!") and isinstance(node, (Node, Token)):
                node = Node("postop", [node, self.take()])
            else:
                break
        return node

    def parse_primary(self, closers):
        t = self.cur
        if t is None:
            return Node("empty", [])
        if t.text in self._GROUPS:
            kind, close = self._GROUPS[t.text]
            return Node(kind, self._group_children(close))
        if t.kind == "punct":  # prefix operator
            op = self.take()
            if (self.cur is None or self.cur.text in closers
                    or self.cur.text in self._SEPARATORS):
                return op
            return Node("unary", [op, self.parse_postfix(closers)])
        if t.kind == "keyword" and t.text == "new":
            kw = self.take()
            if (self.cur is None or self.cur.text in closers
                    or self.cur.text in self._SEPARATORS):
                return kw
            return Node("new", [kw, self.parse_postfix(closers)])
        return self.take()

    def _type_args_end(self):
        """Index of the '>' closing a type-argument list starting at the
        current '<', or None when the '<' reads as a comparison. Type-arg
        interiors hold only type-ish tokens and must be followed by '('."""
        depth = 0
        j = self.i
        while j < len(self.toks):
            t = self.toks[j]
            if t.text == "<":
                depth += 1
            elif t.text == ">":
                depth -= 1
                if depth == 0:
                    nxt = self.toks[j + 1] if j + 1 < len(self.toks) else None
                    if nxt is not None and nxt.text == "(":
                        return j
                    return None
            elif t.kind not in ("ident", "keyword", "placeholder") \
                    and t.text not in (",", ".", "[", "]", "?"):
                return None
            j += 1
        return None

    def _group_children(self, close: str) -> list:
        opener = self.take()
        children = [opener, *self.parse_elements((close,))]
        if self.cur is not None and self.cur.text == close:
            children.append(self.take())
        return children


def parse_statement_tree(tokens: list[Token]) -> Node:
    p = _ExprParser(tokens)
    parts = []
    while p.cur is not None and p.cur.kind == "keyword" and p.cur.text in _STMT_LEAD:
        parts.append(p.take())
    parts.extend(p.parse_elements(()))
    return Node("stmt", parts)


# ---------------------------------------------------------------------------
# convenience


def parse_method_text(text: str, path: str = "<snippet>") -> SourceMethod:
    """Parse a standalone method (no enclosing class required)."""
    file = parse_file(path, text)
    methods = extract_methods(file)
    if not methods:
        raise ParseError(f"{path}: no method found in snippet")
    return methods[0]


def find_method(file: SourceFile, name: str) -> SourceMethod:
    for m in extract_methods(file):
        if m.name == name:
            return m
    raise ParseError(f"{file.path}: no method named {name!r}")
