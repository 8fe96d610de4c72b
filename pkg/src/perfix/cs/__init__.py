from perfix.cs.lexer import PLACEHOLDER_TEXT, Token, normalize_tokens, significant, tokenize
from perfix.cs.parser import (
    Node,
    SourceFile,
    SourceMethod,
    Statement,
    extract_methods,
    find_method,
    parse_file,
    parse_method_text,
    split_statements,
)

__all__ = [
    "PLACEHOLDER_TEXT", "Token", "normalize_tokens", "significant", "tokenize",
    "Node", "SourceFile", "SourceMethod", "Statement",
    "extract_methods", "find_method", "parse_file", "parse_method_text",
    "split_statements",
]
