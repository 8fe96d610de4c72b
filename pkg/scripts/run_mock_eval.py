#!/usr/bin/env python3
"""Run the evaluation pipeline end to end against the scripted mock backend.

Builds the demo knowledge base, derives a synthetic evaluation dataset from
it (each case's reference fix is the knowledge-base after-method), scripts a
mock backend that returns that fix, and runs `perfix evaluate`. Useful as a
smoke test and as a template for wiring up a real HTTP backend.

Usage:
    python3 scripts/run_mock_eval.py --out-dir demo/eval
"""

import argparse
import json
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from build_demo_kb import demo_pairs  # noqa: E402

from perfix.cli import main as cli_main  # noqa: E402
from perfix.generation import prompt_sha256  # noqa: E402
from perfix.kb import build_kb, save_kb  # noqa: E402
from perfix.prompting import render_rapgen  # noqa: E402
from perfix.retrieval import retrieve  # noqa: E402
from perfix.vocab import load_default_vocabulary  # noqa: E402
from perfix.cs.parser import parse_method_text  # noqa: E402

BUGGY_STATEMENT_INDEX = 2  # the Where(...) chain in every demo method


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", default="demo/eval",
                        help="directory for report.json / report.txt")
    parser.add_argument("--cases", type=int, default=10,
                        help="number of synthetic evaluation cases")
    parser.add_argument("--num-samples", type=int, default=100,
                        help="samples per case (mock backend cycles)")
    args = parser.parse_args(argv)

    os.makedirs(args.out_dir, exist_ok=True)
    vocab = load_default_vocabulary()
    kb = build_kb(demo_pairs(), vocab)
    kb_path = os.path.join(args.out_dir, "kb.jsonl")
    save_kb(kb, kb_path)

    # one case per pattern: before-method + its knowledge-base fix, plus a
    # mock completion script that answers each case's rendered prompt
    entries = [e for e in kb.all_entries() if e.repo_id == "demo-alpha"]
    cases, script_lines = [], []
    for i, entry in enumerate(entries[: args.cases]):
        before = parse_method_text(entry.before)
        result = retrieve(kb, before,
                          before.statements[BUGGY_STATEMENT_INDEX], vocab)
        prompt = render_rapgen(before, result.entry.instruction)
        fix_body = result.entry.after[len(prompt.expected_signature) + 2:]
        script_lines.append(json.dumps({
            "prompt_sha256": prompt_sha256(prompt.text),
            "completions": [fix_body, "\n    return 0;\n}"],
        }, ensure_ascii=False))
        cases.append(json.dumps({
            "id": f"demo{i}", "before": entry.before,
            "after": result.entry.after,
            "buggy_line_index": BUGGY_STATEMENT_INDEX,
        }, ensure_ascii=False))

    dataset = os.path.join(args.out_dir, "cases.jsonl")
    mock = os.path.join(args.out_dir, "mock.jsonl")
    with open(dataset, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(cases) + "\n")
    with open(mock, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(script_lines) + "\n")

    code = cli_main(["evaluate", "--dataset", dataset, "--kb-path", kb_path,
                     "--backend", "mock", "--mock-script", mock,
                     "--num-samples", str(args.num_samples),
                     "--out-dir", args.out_dir])
    if code == 0:
        with open(os.path.join(args.out_dir, "report.txt"),
                  encoding="utf-8") as fh:
            print(fh.read())
    return code


if __name__ == "__main__":
    sys.exit(main())
