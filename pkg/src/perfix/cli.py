"""Command-line interface: mine, build-vocab, build-kb, suggest, evaluate,
dump-prompt.

Exit codes: 0 success, 2 usage, 3 input/parse, 4 backend, 5 pattern not
found. The effective configuration is echoed into every output artifact.
The API key is read from the PERFIX_API_KEY environment variable only and
never appears in config files or outputs.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from dataclasses import dataclass, field

from perfix import abstraction, evaluation, kb as kb_mod, mining, prompting, retrieval
from perfix.cs.parser import SourceMethod, Statement, find_method, parse_file, parse_method_text
from perfix.errors import (
    BackendUnavailable,
    EmptyChange,
    InsufficientCorpus,
    KbIoError,
    NoCommentClose,
    NoDifference,
    NoHotspotIdentifier,
    NoMethodFound,
    ParseError,
    PatternNotFound,
    PerfixError,
    RepoAccessError,
    TokenLimitExceeded,
    UnbalancedCompletion,
    VersionMismatch,
)
from perfix.generation import (
    HttpBackend,
    MockBackend,
    SamplingConfig,
    complete,
    dedupe_suggestions,
    extract_fix,
    extract_reasoning_fix,
)
from perfix.vocab import (
    DEFAULT_MIN_PROJECTS,
    build_vocabulary,
    load_default_vocabulary,
    load_vocabulary,
    save_vocabulary,
)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_BACKEND = 4
EXIT_PATTERN = 5


@dataclass
class BackendConfig:
    kind: str = "mock"  # http | mock
    base_url: str = ""
    mock_script: str = ""
    endpoint: str = "chat"


@dataclass
class Config:
    vocab_path: str = ""
    kb_path: str = ""
    backend: BackendConfig = field(default_factory=BackendConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    prompt_variant: str = "rapgen"
    min_projects: int = DEFAULT_MIN_PROJECTS
    seed: int = 0

    def echo(self) -> dict:
        return dataclasses.asdict(self)


def load_config(path: str | None) -> Config:
    cfg = Config()
    if not path:
        return cfg
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    for secret in ("api_key", "PERFIX_API_KEY"):
        if secret in json.dumps(raw):
            raise ParseError(
                f"{path}: API keys belong in the PERFIX_API_KEY environment "
                f"variable, not in config files")
    backend = BackendConfig(**raw.pop("backend", {}))
    sampling = SamplingConfig(**raw.pop("sampling", {}))
    known = {f.name for f in dataclasses.fields(Config)}
    unknown = set(raw) - known
    if unknown:
        raise ParseError(f"{path}: unknown config keys {sorted(unknown)}")
    return Config(backend=backend, sampling=sampling, **raw)


def _apply_overrides(cfg: Config, args) -> Config:
    updates = {}
    for name in ("vocab_path", "kb_path", "prompt_variant", "min_projects", "seed"):
        value = getattr(args, name.replace("-", "_"), None)
        if value is not None:
            updates[name] = value
    backend = cfg.backend
    for name in ("kind", "base_url", "mock_script", "endpoint"):
        value = getattr(args, f"backend_{name}", None)
        if value is not None:
            backend = dataclasses.replace(backend, **{name: value})
    sampling = cfg.sampling
    for name in ("temperature", "max_tokens", "num_samples", "model_name"):
        value = getattr(args, name, None)
        if value is not None:
            sampling = dataclasses.replace(sampling, **{name: value})
    return dataclasses.replace(cfg, backend=backend, sampling=sampling, **updates)


def _load_vocab(cfg: Config):
    if cfg.vocab_path:
        return load_vocabulary(cfg.vocab_path)
    return load_default_vocabulary()


def _make_backend(cfg: Config):
    if cfg.backend.kind == "mock":
        if not cfg.backend.mock_script:
            raise ParseError("mock backend needs --mock-script")
        return MockBackend(cfg.backend.mock_script)
    if cfg.backend.kind == "http":
        if not cfg.backend.base_url:
            raise ParseError("http backend needs --base-url")
        return HttpBackend(cfg.backend.base_url, cfg.backend.endpoint)
    raise ParseError(f"unknown backend kind {cfg.backend.kind!r}")


def _statement_by_source_line(method: SourceMethod, content: str,
                              line: int) -> Statement:
    """The statement whose source span covers the 1-based line number."""
    chosen = None
    for stmt in method.statements:
        first = content[:stmt.tokens[0].start].count("\n") + 1
        last = content[:stmt.tokens[-1].end].count("\n") + 1
        if first <= line <= last:
            chosen = stmt
            break
        if first <= line:
            chosen = stmt  # latest statement starting at or before the line
    if chosen is None:
        raise ParseError(f"no statement at source line {line}")
    return chosen


def _pick_buggy_line(method: SourceMethod, content: str, args) -> Statement:
    if getattr(args, "statement_index", None) is not None:
        idx = args.statement_index
        if not 0 <= idx < len(method.statements):
            raise ParseError(
                f"statement index {idx} out of range (method has "
                f"{len(method.statements)} statements)")
        return method.statements[idx]
    if getattr(args, "line", None) is not None:
        return _statement_by_source_line(method, content, args.line)
    raise ParseError("give the buggy line with --line or --statement-index")


def _render_prompt(cfg: Config, method: SourceMethod, buggy_line: Statement,
                   vocab, knowledge_base, fallback: str | None):
    """Prompt for the configured variant, falling back on PatternNotFound
    when a fallback variant was requested."""
    variant = cfg.prompt_variant
    try:
        if variant == "static":
            return prompting.render_static(method)
        if variant == "reasoning":
            return prompting.render_reasoning_for_line(method, buggy_line, vocab)
        result = retrieval.retrieve(knowledge_base, method, buggy_line, vocab)
        if variant == "oneshot":
            return prompting.render_one_shot(method, result.entry)
        return prompting.render_rapgen(method, result.entry.instruction)
    except PatternNotFound:
        if fallback == "static":
            log.warning("pattern not in knowledge base; falling back to the "
                        "static prompt")
            return prompting.render_static(method)
        raise


def _suggest(cfg: Config, args) -> dict:
    with open(args.file, encoding="utf-8") as fh:
        content = fh.read()
    file = parse_file(args.file, content)
    method = find_method(file, args.method)
    buggy_line = _pick_buggy_line(method, content, args)
    vocab = _load_vocab(cfg)
    knowledge_base = None
    if cfg.prompt_variant in ("rapgen", "oneshot"):
        knowledge_base = kb_mod.load_kb(cfg.kb_path, vocab)
    prompt = _render_prompt(cfg, method, buggy_line, vocab, knowledge_base,
                            args.fallback)
    backend = _make_backend(cfg)
    samples = complete(prompt, cfg.sampling, backend)
    suggestions = []
    for sample in samples:
        if sample.text is None:
            continue
        try:
            if prompt.variant == "reasoning":
                s = extract_reasoning_fix(prompt, sample.text)
            else:
                s = extract_fix(prompt, sample.text)
        except (UnbalancedCompletion, NoCommentClose, NoMethodFound) as exc:
            log.warning("sample %d discarded: %s", sample.sample_index, exc)
            continue
        s.sample_index = sample.sample_index
        suggestions.append(s)
    suggestions = dedupe_suggestions(suggestions)
    return {
        "config": cfg.echo(),
        "file": args.file,
        "method": args.method,
        "buggy_line": buggy_line.text,
        "prompt_variant": prompt.variant,
        "instruction": prompt.instruction_text,
        "suggestions": [
            {
                "method_text": s.method_text,
                "sample_index": s.sample_index,
                "multiplicity": s.multiplicity,
                "reasoning_text": s.reasoning_text,
                "prompt_variant": s.prompt_variant,
            }
            for s in suggestions
        ],
    }


# ---------------------------------------------------------------------------
# subcommands


def cmd_mine(cfg: Config, args) -> int:
    entries = mining.read_manifest(args.manifest)
    filters = mining.CommitFilters()
    records = []
    for repo_id, repo_path in entries:
        try:
            bugs = mining.mine_repo(repo_id, repo_path, filters)
        except RepoAccessError as exc:
            print(f"error: repository {repo_id!r} at {repo_path}: {exc}",
                  file=sys.stderr)
            return EXIT_INPUT
        records.extend(mining.bug_record(b) for b in bugs)
    mining.write_records(records, args.out)
    print(f"mined {len(records)} method pair(s) from {len(entries)} repo(s) "
          f"-> {args.out}")
    return EXIT_OK


def cmd_build_vocab(cfg: Config, args) -> int:
    corpus = []
    if args.pairs:
        with open(args.pairs, encoding="utf-8") as fh:
            for ln, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                rec = json.loads(line)
                text = rec["before_text"] + "\n" + rec["after_text"]
                corpus.append((rec["repo_id"], parse_file(f"pair{ln}.cs", text)))
    else:
        for repo_id, root in mining.read_manifest(args.corpus):
            for dirpath, _dirnames, filenames in sorted(os.walk(root)):
                for name in sorted(filenames):
                    if not name.endswith(".cs"):
                        continue
                    path = os.path.join(dirpath, name)
                    try:
                        with open(path, encoding="utf-8") as fh:
                            corpus.append((repo_id, parse_file(path, fh.read())))
                    except (OSError, ParseError) as exc:
                        log.warning("skipping %s: %s", path, exc)
    try:
        vocab = build_vocabulary(corpus, cfg.min_projects)
    except ValueError as exc:
        print(f"usage error: {exc} (a term common to a single project is just "
              f"that project's jargon)", file=sys.stderr)
        return EXIT_USAGE
    save_vocabulary(vocab, args.out)
    print(f"vocabulary with {len(vocab.identifiers)} identifiers and "
          f"{len(vocab.literals)} literals -> {args.out}")
    return EXIT_OK


def cmd_build_kb(cfg: Config, args) -> int:
    vocab = load_vocabulary(args.vocab) if args.vocab else _load_vocab(cfg)
    pairs = mining.pairs_from_records(args.pairs)
    if not pairs:
        log.warning("no usable pairs in %s; writing an empty knowledge base",
                    args.pairs)
    knowledge_base = kb_mod.build_kb(pairs, vocab, cfg.min_projects)
    kb_mod.save_kb(knowledge_base, args.out)
    print(f"knowledge base with {knowledge_base.entry_count} entrie(s) under "
          f"{len(knowledge_base.entries)} pattern(s) -> {args.out}")
    return EXIT_OK


def cmd_suggest(cfg: Config, args) -> int:
    payload = _suggest(cfg, args)
    out = json.dumps(payload, indent=2, ensure_ascii=False, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)
    return EXIT_OK


def cmd_dump_prompt(cfg: Config, args) -> int:
    with open(args.file, encoding="utf-8") as fh:
        content = fh.read()
    file = parse_file(args.file, content)
    method = find_method(file, args.method)
    buggy_line = _pick_buggy_line(method, content, args)
    vocab = _load_vocab(cfg)
    knowledge_base = None
    if cfg.prompt_variant in ("rapgen", "oneshot"):
        knowledge_base = kb_mod.load_kb(cfg.kb_path, vocab)
    prompt = _render_prompt(cfg, method, buggy_line, vocab, knowledge_base,
                            args.fallback)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(prompt.text)
    else:
        sys.stdout.write(prompt.text)
    return EXIT_OK


def _case_suggestions(cfg: Config, case: evaluation.EvalCase, vocab,
                      knowledge_base, backend, fallback):
    before = parse_method_text(case.before, f"case-{case.id}.cs")
    if case.buggy_line_index is not None:
        if not 0 <= case.buggy_line_index < len(before.statements):
            raise ParseError(f"case {case.id}: buggy_line_index out of range")
        buggy_line = before.statements[case.buggy_line_index]
    else:
        after = parse_method_text(case.reference, f"case-{case.id}-ref.cs")
        pair = mining.MethodPair(before=before, after=after,
                                 repo_id="eval", commit_id=case.id)
        buggy_line = mining.localize_bug(pair).buggy_line
    prompt = _render_prompt(cfg, before, buggy_line, vocab, knowledge_base,
                            fallback)
    samples = complete(prompt, cfg.sampling, backend)
    suggestions = []
    for sample in samples:
        if sample.text is None:
            continue
        try:
            if prompt.variant == "reasoning":
                s = extract_reasoning_fix(prompt, sample.text)
            else:
                s = extract_fix(prompt, sample.text)
        except (UnbalancedCompletion, NoCommentClose, NoMethodFound):
            continue
        s.sample_index = sample.sample_index
        suggestions.append(s)
    return dedupe_suggestions(suggestions)


def cmd_evaluate(cfg: Config, args) -> int:
    vocab = _load_vocab(cfg)
    knowledge_base = None
    if cfg.prompt_variant in ("rapgen", "oneshot"):
        knowledge_base = kb_mod.load_kb(cfg.kb_path, vocab)
    backend = _make_backend(cfg)
    cases = evaluation.load_cases(args.dataset)
    failures: dict[str, str] = {}
    for case in cases:
        try:
            case.suggestions = _case_suggestions(
                cfg, case, vocab, knowledge_base, backend, args.fallback)
        except (ParseError, NoDifference, PatternNotFound, NoHotspotIdentifier,
                BackendUnavailable, TokenLimitExceeded) as exc:
            log.warning("case %s: %s", case.id, exc)
            failures[case.id] = f"{type(exc).__name__}: {exc}"
    verdicts = (evaluation.import_review_csv(args.review_import)
                if args.review_import else None)
    report = evaluation.evaluate_dataset(cases, vocab=vocab,
                                         review_verdicts=verdicts)
    for result in report.cases:
        if result.id in failures and result.error is None:
            result.error = failures[result.id]
    os.makedirs(args.out_dir, exist_ok=True)
    payload = evaluation.report_to_dict(report, config_echo=cfg.echo())
    with open(os.path.join(args.out_dir, "report.json"), "w",
              encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, ensure_ascii=False, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(args.out_dir, "report.txt"), "w",
              encoding="utf-8", newline="\n") as fh:
        fh.write(evaluation.format_report_table(
            report, label=f"{cfg.backend.kind}:{cfg.prompt_variant}"))
    evaluation.export_review_csv(
        cases, report, os.path.join(args.out_dir, "review_export.csv"))
    print(f"evaluated {len(cases)} case(s) -> {args.out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--vocab-path", dest="vocab_path")
    p.add_argument("--kb-path", dest="kb_path")
    p.add_argument("--min-projects", dest="min_projects", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--verbose", action="store_true")


def _add_backend(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", dest="backend_kind", choices=("http", "mock"))
    p.add_argument("--base-url", dest="backend_base_url")
    p.add_argument("--mock-script", dest="backend_mock_script")
    p.add_argument("--endpoint", dest="backend_endpoint",
                   choices=("chat", "completion"))
    p.add_argument("--model-name", dest="model_name")
    p.add_argument("--temperature", type=float)
    p.add_argument("--max-tokens", dest="max_tokens", type=int)
    p.add_argument("--num-samples", dest="num_samples", type=int)


def _add_target(p: argparse.ArgumentParser) -> None:
    p.add_argument("--file", required=True, help="C# source file")
    p.add_argument("--method", required=True, help="method name")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--line", type=int, help="1-based source line of the "
                                                "buggy statement")
    group.add_argument("--statement-index", type=int,
                       help="0-based statement index within the method")
    p.add_argument("--prompt-variant", dest="prompt_variant",
                   choices=prompting.VARIANTS)
    p.add_argument("--fallback", choices=("static",),
                   help="prompt to fall back to when the pattern is not in "
                        "the knowledge base")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="perfix",
        description="Retrieval-augmented prompt generation for C# "
                    "performance-bug fixes")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mine", help="mine PERF commits into method pairs")
    p.add_argument("--manifest", required=True,
                   help="repo_id<TAB>path lines, one repo per line")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("build-vocab", help="build the common-identifier "
                                           "vocabulary")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--pairs", help="mined pairs JSONL")
    src.add_argument("--corpus", help="manifest of repo_id<TAB>source-dir")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_build_vocab)

    p = sub.add_parser("build-kb", help="build the knowledge base from "
                                        "mined pairs")
    p.add_argument("--pairs", required=True)
    p.add_argument("--vocab", help="vocabulary file (default: config or "
                                   "bundled)")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_build_kb)

    p = sub.add_parser("suggest", help="generate fix suggestions for one "
                                       "method")
    _add_target(p)
    p.add_argument("--out", help="write suggestions JSON here instead of "
                                 "stdout")
    _add_backend(p)
    _add_common(p)
    p.set_defaults(func=cmd_suggest)

    p = sub.add_parser("evaluate", help="score suggestions over a dataset")
    p.add_argument("--dataset", required=True, help="JSONL of "
                   "{id, before, after, buggy_line_index?}")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--prompt-variant", dest="prompt_variant",
                   choices=prompting.VARIANTS)
    p.add_argument("--fallback", choices=("static",))
    p.add_argument("--review-import", help="CSV of human verdicts "
                                           "(id, verdict)")
    _add_backend(p)
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("dump-prompt", help="render a prompt without calling "
                                           "any backend")
    _add_target(p)
    p.add_argument("--out", help="write the prompt here instead of stdout")
    _add_common(p)
    p.set_defaults(func=cmd_dump_prompt)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        return args.func(cfg, args)
    except PatternNotFound as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PATTERN
    except (BackendUnavailable, TokenLimitExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (ParseError, KbIoError, VersionMismatch, RepoAccessError,
            InsufficientCorpus, NoDifference, EmptyChange, NoHotspotIdentifier,
            OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PerfixError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
