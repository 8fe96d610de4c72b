"""Sampling orchestration and lexical fix extraction."""

import random

import pytest

from perfix.errors import (
    BackendUnavailable,
    NoCommentClose,
    NoMethodFound,
    UnbalancedCompletion,
)
from perfix.generation import (
    HttpBackend,
    MockBackend,
    SamplingConfig,
    TransientBackendError,
    balanced_span_end,
    complete,
    dedupe_suggestions,
    extract_fix,
    extract_reasoning_fix,
    prompt_sha256,
)
from perfix.prompting import Prompt

from conftest import read_golden
from _fixtures import UNDO_FIX_COMPLETION, UNDO_FIX_METHOD, write_mock_script


def make_prompt(variant="rapgen",
                signature="public override void Undo(Params param)"):
    return Prompt(variant=variant, text=read_golden("prompt_rapgen_undo.txt"),
                  expected_signature=signature)


# ---------------------------------------------------------------------------
# constructive oracle for the brace scanner: build completions from segments
# whose net brace depth is known, so the balanced end offset is known exactly

NEUTRAL_SEGMENTS = [
    "x = y + 1;\n",
    "call(a, b);\n",
    'var s = "br{ace}s in a string";\n',
    'var v = @"verbatim ""x"" with } brace";\n',
    'var i = $"pre{inner.Count}post";\n',
    'var j = $"depth{(flag ? "{a}" : "b")}end";\n',
    "// line comment with } and { braces\n",
    "/* block comment { { { */\n",
    "char c = '{';\n",
    "char d = '}';\n",
    "if (ready) { go(); }\n",
    "while (x < 3) { x++; /* } */ }\n",
]

TRAILERS = ["", "\n// chatter after the method",
            "\nAnd some prose the model added.", "\nvoid Extra() { }"]


def build_completion(rng):
    body = "".join(rng.choice(NEUTRAL_SEGMENTS)
                   for _ in range(rng.randint(0, 8)))
    completion = "\n" + body + "}"
    end_offset = len(completion)  # index just past the closing brace
    return completion + rng.choice(TRAILERS), end_offset


def test_scanner_oracle_1000():
    rng = random.Random(2024)
    prefix = "void F() {"
    for _ in range(1000):
        completion, end_offset = build_completion(rng)
        text = prefix + completion
        assert balanced_span_end(text) == len(prefix) + end_offset


def test_scanner_unbalanced_raises():
    with pytest.raises(UnbalancedCompletion):
        balanced_span_end("void F() { if (x) { y(); }")


def test_scanner_ignores_brace_only_in_string():
    with pytest.raises(UnbalancedCompletion):
        balanced_span_end('void F() { var s = "}";')


def test_extract_fix_motivating_example():
    prompt = make_prompt()
    completion = UNDO_FIX_COMPLETION + "\n\nSome trailing explanation { }."
    suggestion = extract_fix(prompt, completion)
    assert suggestion.method_text == UNDO_FIX_METHOD


def test_extract_reasoning_fix():
    prompt = make_prompt(variant="reasoning")
    completion = ("using a dictionary lookup instead of a scan. */\n"
                  "public int Fast(int key) {\n"
                  "    return map[key];\n"
                  "}\nextra chatter")
    suggestion = extract_reasoning_fix(prompt, completion)
    assert suggestion.reasoning_text == \
        "using a dictionary lookup instead of a scan."
    assert suggestion.method_text.startswith("public int Fast")
    assert suggestion.method_text.endswith("}")


def test_extract_reasoning_requires_comment_close():
    with pytest.raises(NoCommentClose):
        extract_reasoning_fix(make_prompt("reasoning"), "no close, no code {")


def test_extract_reasoning_requires_method():
    with pytest.raises(NoMethodFound):
        extract_reasoning_fix(make_prompt("reasoning"),
                              "done. */ just prose afterwards")


def test_dedupe_keeps_lowest_index_and_counts():
    from perfix.generation import FixSuggestion

    texts = ["void A() {\n x = 1;\n}", "void A() { x = 1; }",
             "void A() { x = 2; }"]
    suggestions = [
        FixSuggestion(method_text=t, sample_index=i, raw_completion=t,
                      prompt_variant="rapgen")
        for i, t in enumerate(texts)
    ]
    unique = dedupe_suggestions(suggestions)
    assert [s.sample_index for s in unique] == [0, 2]
    assert unique[0].multiplicity == 2


# ---------------------------------------------------------------------------
# backends


def test_mock_backend_scripted(tmp_path):
    prompt = make_prompt()
    script = tmp_path / "mock.jsonl"
    write_mock_script(str(script), {prompt.text: ["one", "two"]})
    backend = MockBackend(str(script))
    cfg = SamplingConfig(num_samples=3)
    assert backend.request_completion(prompt.text, cfg, 0) == "one"
    assert backend.request_completion(prompt.text, cfg, 1) == "two"
    assert backend.request_completion(prompt.text, cfg, 2) == "one"  # cycles


def test_mock_backend_unknown_prompt(tmp_path):
    script = tmp_path / "mock.jsonl"
    write_mock_script(str(script), {"other": ["x"]})
    with pytest.raises(BackendUnavailable):
        MockBackend(str(script)).request_completion("p", SamplingConfig(), 0)


class FlakyBackend:
    """Fails transiently a fixed number of times per sample, then succeeds."""

    def __init__(self, failures):
        self.failures = failures
        self.calls = {}

    def request_completion(self, prompt_text, config, sample_index):
        n = self.calls.get(sample_index, 0)
        self.calls[sample_index] = n + 1
        if n < self.failures:
            raise TransientBackendError("HTTP 429")
        return f"ok-{sample_index}"


def test_complete_retries_transient_failures():
    cfg = SamplingConfig(num_samples=4, max_attempts=4, backoff_s=0.0)
    results = complete(make_prompt(), cfg, FlakyBackend(failures=2))
    assert [r.text for r in results] == [f"ok-{i}" for i in range(4)]
    assert all(r.attempts == 3 for r in results)


def test_complete_raises_only_when_all_fail():
    cfg = SamplingConfig(num_samples=3, max_attempts=2, backoff_s=0.0)
    with pytest.raises(BackendUnavailable):
        complete(make_prompt(), cfg, FlakyBackend(failures=99))


class FakeResponse:
    def __init__(self, status_code, payload):
        self.status_code = status_code
        self._payload = payload
        self.text = str(payload)

    def json(self):
        return self._payload


class FakeSession:
    def __init__(self, responses):
        self.responses = list(responses)
        self.requests = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.requests.append((url, json, headers))
        return self.responses.pop(0)


def test_http_backend_chat_roundtrip(monkeypatch):
    monkeypatch.setenv("PERFIX_API_KEY", "k-123")
    payload = {"choices": [{"message": {"content": "fixed"}}]}
    session = FakeSession([FakeResponse(200, payload)])
    backend = HttpBackend("http://llm.local/v1", session=session)
    out = backend.request_completion("p", SamplingConfig(), 0)
    assert out == "fixed"
    url, body, headers = session.requests[0]
    assert url == "http://llm.local/v1/chat/completions"
    assert body["temperature"] == 0.7 and body["max_tokens"] == 1024
    assert headers["Authorization"] == "Bearer k-123"


def test_http_backend_429_is_transient():
    session = FakeSession([FakeResponse(429, {})])
    backend = HttpBackend("http://llm.local/v1", session=session)
    with pytest.raises(TransientBackendError):
        backend.request_completion("p", SamplingConfig(), 0)


def test_http_backend_retry_then_success():
    payload = {"choices": [{"message": {"content": "after retry"}}]}
    session = FakeSession([FakeResponse(429, {}), FakeResponse(503, {}),
                           FakeResponse(200, payload)])
    backend = HttpBackend("http://llm.local/v1", session=session)
    cfg = SamplingConfig(num_samples=1, max_attempts=4, backoff_s=0.0)
    results = complete(make_prompt(), cfg, backend)
    assert results[0].text == "after retry"
    assert results[0].attempts == 3


def test_prompt_sha256_stable():
    assert prompt_sha256("abc") == prompt_sha256("abc")
    assert prompt_sha256("abc") != prompt_sha256("abd")
