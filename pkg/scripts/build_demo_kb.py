#!/usr/bin/env python3
"""Build a small demonstration knowledge base from a synthetic corpus.

The corpus mimics mined before/after method pairs: each pattern appears in
two "repositories" so it survives the multi-project threshold. Output is a
JSONL knowledge base usable with `perfix suggest --kb-path ...`.

Usage:
    python3 scripts/build_demo_kb.py --out demo/kb.jsonl
"""

import argparse
import os
import sys

from perfix.kb import build_kb, save_kb
from perfix.mining import MethodPair
from perfix.vocab import load_default_vocabulary
from perfix.cs.parser import parse_method_text

DEMO_APIS = [
    "Select", "Sum", "Max", "Min", "Average", "Distinct", "ToList",
    "ToArray", "OrderBy", "GroupBy", "Reverse", "Skip", "Take",
    "FirstOrDefault", "Single",
]

BEFORE_TEMPLATE = """\
public int Compute{i}(List<int> {p}items) {{
    int {p}counter = {i};
    {filler}
    var {p}hits = {p}items.Where(x => x > {p}counter).{api}();
    return {p}counter;
}}"""

AFTER_TEMPLATE = """\
public int Compute{i}(List<int> {p}items) {{
    int {p}counter = {i};
    {filler}
    int {p}hits = 0;
    return {p}counter;
}}"""

REPOS = [
    ("demo-alpha", "alpha", "Console.WriteLine({p}counter);"),
    ("demo-beta", "beta", "{p}buffer.Append({p}counter);"),
]


def demo_pairs():
    pairs = []
    for i, api in enumerate(DEMO_APIS):
        for repo, prefix, filler in REPOS:
            fields = {"i": i, "p": prefix, "api": api,
                      "filler": filler.format(p=prefix)}
            pairs.append(MethodPair(
                before=parse_method_text(BEFORE_TEMPLATE.format(**fields)),
                after=parse_method_text(AFTER_TEMPLATE.format(**fields)),
                repo_id=repo, commit_id=f"c{i:04d}"))
    return pairs


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="demo/kb.jsonl",
                        help="output knowledge-base path (JSONL)")
    args = parser.parse_args(argv)

    vocab = load_default_vocabulary()
    kb = build_kb(demo_pairs(), vocab)
    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    save_kb(kb, args.out)
    print(f"wrote {kb.entry_count} entries "
          f"({len(kb.entries)} patterns) to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
