"""Render the four prompt variants fed to the completion model.

All variants embed the buggy method verbatim inside a C-style block comment
(line endings normalized to '\\n'). The three completion-style variants end
with the buggy method's signature and an open brace so the model completes
that same method; the reasoning variant ends mid-comment so the model first
finishes the diagnosis, then writes the fix.
"""

from __future__ import annotations

from dataclasses import dataclass

from perfix.abstraction import TokenClass, classify_token
from perfix.cs.parser import SourceMethod, Statement
from perfix.errors import CommentCollision, NoHotspotIdentifier
from perfix.kb import KbEntry, TransformInstruction
from perfix.vocab import CommonVocabulary

STATIC_MESSAGE = "PERF: Improve performance of the above method."

VARIANTS = ("rapgen", "static", "oneshot", "reasoning")


@dataclass(frozen=True)
class Prompt:
    variant: str
    text: str
    expected_signature: str
    instruction_text: str | None = None
    retrieved_entry: KbEntry | None = None
    hotspot_identifier: str | None = None
    degenerate: bool = False  # one-shot where the query equals the example


def _norm(text: str) -> str:
    return text.replace("\r\n", "\n").replace("\r", "\n")


def _commented(method_text: str) -> str:
    text = _norm(method_text)
    if "*/" in text:
        raise CommentCollision(
            "method text contains '*/' and cannot be block-commented")
    return f"/*\n{text}\n*/\n"


def render_rapgen(buggy: SourceMethod, instruction: TransformInstruction) -> Prompt:
    sig = buggy.signature
    text = _commented(buggy.text) + f"/* {instruction.text} */\n{sig} {{\n"
    return Prompt(variant="rapgen", text=text, expected_signature=sig,
                  instruction_text=instruction.text)


def render_static(buggy: SourceMethod) -> Prompt:
    sig = buggy.signature
    text = _commented(buggy.text) + f"/* {STATIC_MESSAGE} */\n{sig} {{\n"
    return Prompt(variant="static", text=text, expected_signature=sig,
                  instruction_text=STATIC_MESSAGE)


def render_one_shot(buggy: SourceMethod, entry: KbEntry) -> Prompt:
    sig = buggy.signature
    degenerate = _norm(buggy.text) == _norm(entry.before)
    text = (_commented(entry.before) + _norm(entry.after) + "\n"
            + _commented(buggy.text) + f"{sig} {{\n")
    return Prompt(variant="oneshot", text=text, expected_signature=sig,
                  retrieved_entry=entry, degenerate=degenerate)


def first_common_identifier(line: Statement, vocab: CommonVocabulary) -> str | None:
    for tok in line.tokens:
        if classify_token(tok, vocab) is TokenClass.CommonIdentifier:
            return tok.text
    return None


def render_reasoning(buggy: SourceMethod, hotspot_identifier: str) -> Prompt:
    text = (_commented(buggy.text)
            + f"/* PERF: {hotspot_identifier} is on the hot-path in the above "
              f"method. We can do better by ")
    return Prompt(variant="reasoning", text=text,
                  expected_signature=buggy.signature,
                  hotspot_identifier=hotspot_identifier)


def render_reasoning_for_line(buggy: SourceMethod, line: Statement,
                              vocab: CommonVocabulary) -> Prompt:
    hotspot = first_common_identifier(line, vocab)
    if hotspot is None:
        raise NoHotspotIdentifier(
            f"buggy line has no common identifier: {line.text!r}")
    return render_reasoning(buggy, hotspot)
