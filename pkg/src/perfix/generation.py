"""Sample completions from a pluggable backend and extract candidate fixes.

Extraction is lexical, not character counting: braces inside string
literals (regular, verbatim, interpolated — holes re-enter code context),
char literals, and comments do not affect the balance.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field

from perfix.cs.lexer import normalize_tokens
from perfix.errors import (
    BackendUnavailable,
    NoCommentClose,
    NoMethodFound,
    TokenLimitExceeded,
    UnbalancedCompletion,
)
from perfix.prompting import Prompt

log = logging.getLogger(__name__)

API_KEY_ENV = "PERFIX_API_KEY"


@dataclass(frozen=True)
class SamplingConfig:
    temperature: float = 0.7
    max_tokens: int = 1024
    num_samples: int = 100
    model_name: str = "gpt-3.5-turbo"
    timeout_s: float = 60.0
    max_parallel: int = 8
    max_attempts: int = 4
    backoff_s: float = 0.5


@dataclass
class SampleResult:
    sample_index: int
    text: str | None
    error: str | None = None
    attempts: int = 1


@dataclass
class FixSuggestion:
    method_text: str
    sample_index: int
    raw_completion: str
    prompt_variant: str
    reasoning_text: str | None = None
    multiplicity: int = 1


class TransientBackendError(Exception):
    """Retryable failure (HTTP 429/5xx, connection error, timeout)."""


# ---------------------------------------------------------------------------
# backends


class MockBackend:
    """Deterministic file-backed backend: JSON Lines of
    {"prompt_sha256": ..., "completions": [...]}. Sample i gets
    completions[i % len(completions)]."""

    def __init__(self, path: str):
        self.scripts: dict[str, list[str]] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                self.scripts[rec["prompt_sha256"]] = list(rec["completions"])

    def request_completion(self, prompt_text: str, config: SamplingConfig,
                           sample_index: int) -> str:
        digest = prompt_sha256(prompt_text)
        if digest not in self.scripts:
            raise BackendUnavailable(
                f"mock backend has no script for prompt {digest[:12]}…")
        completions = self.scripts[digest]
        return completions[sample_index % len(completions)]


class HttpBackend:
    """OpenAI-compatible HTTP backend (chat or legacy completion endpoint).

    The API key comes from the PERFIX_API_KEY environment variable only.
    """

    def __init__(self, base_url: str, endpoint: str = "chat", session=None):
        if endpoint not in ("chat", "completion"):
            raise ValueError(f"unknown endpoint kind {endpoint!r}")
        self.base_url = base_url.rstrip("/")
        self.endpoint = endpoint
        if session is None:
            import requests
            session = requests.Session()
        self.session = session

    def request_completion(self, prompt_text: str, config: SamplingConfig,
                           sample_index: int) -> str:
        if self.endpoint == "chat":
            url = f"{self.base_url}/chat/completions"
            body = {
                "model": config.model_name,
                "messages": [{"role": "user", "content": prompt_text}],
                "temperature": config.temperature,
                "max_tokens": config.max_tokens,
                "n": 1,
            }
        else:
            url = f"{self.base_url}/completions"
            body = {
                "model": config.model_name,
                "prompt": prompt_text,
                "temperature": config.temperature,
                "max_tokens": config.max_tokens,
                "n": 1,
            }
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(API_KEY_ENV)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        try:
            resp = self.session.post(url, json=body, headers=headers,
                                     timeout=config.timeout_s)
        except Exception as exc:  # connection errors are transient
            raise TransientBackendError(str(exc)) from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientBackendError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            payload = resp.text
            if "maximum context length" in payload or "max_tokens" in payload:
                raise TokenLimitExceeded(payload[:200])
            raise BackendUnavailable(f"HTTP {resp.status_code}: {payload[:200]}")
        data = resp.json()
        choice = data["choices"][0]
        if self.endpoint == "chat":
            return choice["message"]["content"]
        return choice["text"]


def prompt_sha256(prompt_text: str) -> str:
    return hashlib.sha256(prompt_text.encode("utf-8")).hexdigest()


def complete(prompt: Prompt, config: SamplingConfig, backend) -> list[SampleResult]:
    """num_samples completions, at most max_parallel in flight; transient
    failures retried with exponential backoff up to max_attempts. Raises
    BackendUnavailable only when every sample failed."""

    def one(i: int) -> SampleResult:
        delay = config.backoff_s
        for attempt in range(1, config.max_attempts + 1):
            try:
                text = backend.request_completion(prompt.text, config, i)
                if attempt > 1:
                    log.info("sample %d succeeded after %d attempts", i, attempt)
                return SampleResult(sample_index=i, text=text, attempts=attempt)
            except TransientBackendError as exc:
                if attempt == config.max_attempts:
                    return SampleResult(sample_index=i, text=None,
                                        error=str(exc), attempts=attempt)
                time.sleep(delay)
                delay *= 2
            except (TokenLimitExceeded, BackendUnavailable) as exc:
                return SampleResult(sample_index=i, text=None,
                                    error=f"{type(exc).__name__}: {exc}",
                                    attempts=attempt)
        raise AssertionError("unreachable")

    with concurrent.futures.ThreadPoolExecutor(max_workers=config.max_parallel) as ex:
        results = list(ex.map(one, range(config.num_samples)))
    if results and all(r.text is None for r in results):
        raise BackendUnavailable(
            f"all {len(results)} samples failed; first error: {results[0].error}")
    return results


# ---------------------------------------------------------------------------
# lexical brace scanner


def balanced_span_end(text: str, start: int = 0) -> int:
    """Index just past the '}' where brace depth first returns to 0 after
    the first opening '{' at or after ``start``. Braces in strings, chars,
    comments, and interpolated-string text segments are skipped; braces in
    interpolation holes count (holes are code).

    Raises UnbalancedCompletion if depth never returns to 0.
    """
    depth = 0
    opened = False
    i = start
    n = len(text)
    while i < n:
        c = text[i]
        if c == "/" and text.startswith("//", i):
            nl = text.find("\n", i)
            i = n if nl == -1 else nl + 1
            continue
        if c == "/" and text.startswith("/*", i):
            end = text.find("*/", i + 2)
            if end == -1:
                break
            i = end + 2
            continue
        if c in "$@\"":
            skipped = _skip_string(text, i)
            if skipped is not None:
                i = skipped
                continue
            i += 1
            continue
        if c == "'":
            i = _skip_char(text, i)
            continue
        if c == "{":
            depth += 1
            opened = True
        elif c == "}":
            depth -= 1
            if opened and depth == 0:
                return i + 1
        i += 1
    raise UnbalancedCompletion("brace depth never returned to zero")


def _skip_char(text: str, i: int) -> int:
    j = i + 1
    n = len(text)
    while j < n:
        if text[j] == "\\":
            j += 2
            continue
        if text[j] == "'" or text[j] == "\n":
            return j + 1
        j += 1
    return n


def _skip_string(text: str, i: int):
    """If a string literal starts at i, return the index past it (for
    interpolated strings, past the closing quote, with holes scanned as
    code); otherwise None."""
    interpolated = verbatim = False
    j = i
    while j < len(text) and text[j] in "$@":
        if text[j] == "$":
            interpolated = True
        else:
            verbatim = True
        j += 1
    if j < len(text) and text[j] == '"':
        return _scan_quoted(text, j, interpolated, verbatim)
    return None


def _scan_quoted(text: str, quote_idx: int, interpolated: bool, verbatim: bool) -> int:
    n = len(text)
    j = quote_idx + 1
    while j < n:
        c = text[j]
        if c == '"':
            if verbatim and j + 1 < n and text[j + 1] == '"':
                j += 2
                continue
            return j + 1
        if not verbatim and c == "\\":
            j += 2
            continue
        if interpolated and c == "{":
            if j + 1 < n and text[j + 1] == "{":
                j += 2
                continue
            j = _scan_hole(text, j + 1)
            continue
        if interpolated and c == "}" and j + 1 < n and text[j + 1] == "}":
            j += 2
            continue
        if c == "\n" and not verbatim:
            return j  # unterminated on this line; resume as code
        j += 1
    return n


def _scan_hole(text: str, i: int) -> int:
    depth = 1
    n = len(text)
    j = i
    while j < n:
        c = text[j]
        if c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
            if depth == 0:
                return j + 1
        elif c == '"' or c in "$@" and _skip_string(text, j) is not None:
            j = _skip_string(text, j) or j + 1
            continue
        elif c == "'":
            j = _skip_char(text, j)
            continue
        j += 1
    return n


# ---------------------------------------------------------------------------
# extraction


def extract_fix(prompt: Prompt, completion: str) -> FixSuggestion:
    """Prepend the expected signature + ' {', scan until braces balance, and
    discard the rest of the completion."""
    full = prompt.expected_signature + " {" + completion
    end = balanced_span_end(full)
    return FixSuggestion(method_text=full[:end], sample_index=0,
                         raw_completion=completion,
                         prompt_variant=prompt.variant)


def extract_reasoning_fix(prompt: Prompt, completion: str) -> FixSuggestion:
    """Split the completion at the first '*/' (the completed diagnosis),
    then brace-balance the first method declaration that follows."""
    close = completion.find("*/")
    if close == -1:
        raise NoCommentClose("completion never closes the reasoning comment")
    reasoning = completion[:close].strip()
    remainder = completion[close + 2:]
    brace = _first_code_brace(remainder)
    if brace is None:
        raise NoMethodFound("no method declaration after the reasoning comment")
    head = remainder[:brace]
    if "(" not in head:
        raise NoMethodFound("text after the reasoning comment is not a method")
    start = len(head) - len(head.lstrip())
    end = balanced_span_end(remainder, start)
    return FixSuggestion(method_text=remainder[start:end].rstrip(),
                         sample_index=0, raw_completion=completion,
                         reasoning_text=reasoning,
                         prompt_variant=prompt.variant)


def _first_code_brace(text: str):
    """Offset of the first '{' outside strings/comments, or None."""
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "/" and text.startswith("//", i):
            nl = text.find("\n", i)
            i = n if nl == -1 else nl + 1
            continue
        if c == "/" and text.startswith("/*", i):
            end = text.find("*/", i + 2)
            if end == -1:
                return None
            i = end + 2
            continue
        if c in "$@\"":
            skipped = _skip_string(text, i)
            i = skipped if skipped is not None else i + 1
            continue
        if c == "'":
            i = _skip_char(text, i)
            continue
        if c == "{":
            return i
        i += 1
    return None


def dedupe_suggestions(suggestions: list[FixSuggestion]) -> list[FixSuggestion]:
    """Collapse suggestions identical after whitespace normalization,
    keeping the lowest sample_index and recording multiplicity."""
    by_norm: dict[str, FixSuggestion] = {}
    for s in sorted(suggestions, key=lambda s: s.sample_index):
        key = normalize_tokens(s.method_text)
        if key in by_norm:
            by_norm[key].multiplicity += 1
        else:
            by_norm[key] = FixSuggestion(
                method_text=s.method_text, sample_index=s.sample_index,
                raw_completion=s.raw_completion,
                prompt_variant=s.prompt_variant,
                reasoning_text=s.reasoning_text, multiplicity=1)
    return sorted(by_norm.values(), key=lambda s: s.sample_index)
