"""Shared fixture corpus for the test suite.

Everything here is synthetic C# built so each pipeline stage has a
hand-checkable expected output: a motivating buggy method, a seed corpus
whose knowledge base contains the pattern for its buggy line, a 25-pattern
(50-entry) KB for retrieval tests, and small random-method generators for
property tests.
"""

from __future__ import annotations

import json
import random

from perfix.generation import prompt_sha256
from perfix.mining import MethodPair
from perfix.cs.parser import parse_method_text

# ---------------------------------------------------------------------------
# the motivating example: an expensive Where(...).FirstOrDefault() chain

UNDO_METHOD = """\
public override void Undo(Params param) {
    foreach (Container obj in containers) {
        Beatmap copy = Beatmap.GenerateCopy(obj.objectData);
        param.collections.Where(x => x.Type == copy.Type)
                               .FirstOrDefault()?.SpawnObject(copy, out _);
        if (obj is EventContainer e && e.eventData.IsRotationEvent)
            param.tracksManager.RefreshTracks();
    }
}"""

# statement index of the LINQ chain inside UNDO_METHOD
UNDO_BUGGY_INDEX = 2

UNDO_BUGGY_PATTERN = "<∅>.Where(<∅>).FirstOrDefault()?.<∅>(<∅>, out <∅>);"

UNDO_INSTRUCTION = "PERF: Rewrite the above method without FirstOrDefault."

UNDO_FIX_COMPLETION = """
    foreach (Container obj in containers)
    {
        Beatmap copy = Beatmap.GenerateCopy(obj.objectData);
        foreach (var collection in param.collections)
        {
            if (collection.Type == copy.Type)
            {
                collection.SpawnObject(copy, out _);
                if (obj is EventContainer e &&
                     e.eventData.IsRotationEvent)
                    param.tracksManager.RefreshTracks();

                break;
            }
        }
    }
}"""

UNDO_FIX_METHOD = ("public override void Undo(Params param) {"
                   + UNDO_FIX_COMPLETION)


# ---------------------------------------------------------------------------
# seed pairs whose knowledge base covers the Undo method's buggy line.
# The after method keeps the Where call (inside the foreach header), so the
# identifier diff leaves exactly FirstOrDefault on the removed side.

_SEED_BEFORE = """\
public void Apply{r}(Params param) {{
    param.{coll}.Where(x => x.Type == {target}.Type).FirstOrDefault()?.SpawnObject({target}, out _);
}}"""

_SEED_AFTER = """\
public void Apply{r}(Params param) {{
    foreach (var {cand} in param.{coll}.Where(x => x.Type == {target}.Type)) {{
        {cand}.SpawnObject({target}, out _);
        break;
    }}
}}"""

_SEED_NAMES = [
    {"r": "A", "coll": "collections", "target": "marker", "cand": "found"},
    {"r": "B", "coll": "placements", "target": "anchor", "cand": "entry"},
]


def seed_pairs() -> list[MethodPair]:
    """One FirstOrDefault-removal pair per repo; same pattern, two repos."""
    pairs = []
    for repo_index, names in enumerate(_SEED_NAMES):
        pairs.append(MethodPair(
            before=parse_method_text(_SEED_BEFORE.format(**names)),
            after=parse_method_text(_SEED_AFTER.format(**names)),
            repo_id=f"repo-{'ab'[repo_index]}",
            commit_id=f"c{repo_index:07d}"))
    return pairs


# ---------------------------------------------------------------------------
# a 25-pattern / 50-entry KB for retrieval tests. Per pattern, two repos
# with structurally different filler statements (so the two before-methods
# featurize differently and self-retrieval has a unique argmax).

KB_APIS = [
    "Select", "Sum", "Max", "Min", "Average", "Distinct", "ToList",
    "ToArray", "OrderBy", "GroupBy", "Reverse", "Skip", "Take", "Concat",
    "Union", "Intersect", "Except", "Aggregate", "SelectMany", "ThenBy",
    "ToDictionary", "ToHashSet", "Single", "Last", "SingleOrDefault",
]

_KB_BEFORE = """\
public int Compute{i}(List<int> {p}items) {{
    int {p}counter = {i};
    {filler}
    var {p}hits = {p}items.Where(x => x > {p}counter).{api}();
    return {p}counter;
}}"""

_KB_AFTER = """\
public int Compute{i}(List<int> {p}items) {{
    int {p}counter = {i};
    {filler}
    int {p}hits = 0;
    return {p}counter;
}}"""

_KB_REPOS = [
    ("repo-a", "alpha", "Console.WriteLine({p}counter);"),
    ("repo-b", "beta", "{p}buffer.Append({p}counter);"),
]


def kb_before_text(i: int, repo_index: int) -> str:
    _repo, prefix, filler = _KB_REPOS[repo_index]
    return _KB_BEFORE.format(i=i, p=prefix, api=KB_APIS[i],
                             filler=filler.format(p=prefix))


def kb_pairs() -> list[MethodPair]:
    pairs = []
    for i in range(len(KB_APIS)):
        for repo_index, (repo, prefix, filler) in enumerate(_KB_REPOS):
            before = kb_before_text(i, repo_index)
            after = _KB_AFTER.format(i=i, p=prefix,
                                     filler=filler.format(p=prefix))
            pairs.append(MethodPair(
                before=parse_method_text(before),
                after=parse_method_text(after),
                repo_id=repo, commit_id=f"c{i:04d}"))
    return pairs


# ---------------------------------------------------------------------------
# random method generator for property tests

COMMON_APIS = ["Add", "Contains", "ToString", "WriteLine", "Count", "Clear",
               "IndexOf", "Append", "TryGetValue", "Remove"]


def random_method(seed: int, names: list[str] | None = None) -> str:
    """A small parseable method built from a fixed statement grammar. The
    same seed with a different ``names`` pool yields the same structure with
    renamed project identifiers (for rename-invariance properties)."""
    rng = random.Random(seed)
    if names is None:
        names = [f"item{k}" for k in range(8)]
    body: list[str] = []
    n_stmts = rng.randint(1, 5)
    for _ in range(n_stmts):
        kind = rng.randrange(4)
        a, b = rng.choice(names), rng.choice(names)
        api = rng.choice(COMMON_APIS)
        if kind == 0:
            body.append(f"    int {a} = {rng.randint(0, 99)};")
        elif kind == 1:
            body.append(f"    {a}.{api}({b});")
        elif kind == 2:
            body.append(f"    if ({a}.{api}({b}))")
            body.append(f"        {b}.{rng.choice(COMMON_APIS)}();")
        else:
            body.append(f"    var {a} = {b}.{api}({rng.randint(0, 9)});")
    ret = rng.choice(names)
    body.append(f"    return {ret};")
    return (f"public int Run({names[0]} {names[1]}) {{\n"
            + "\n".join(body) + "\n}")


def random_statement(rng: random.Random, names: list[str]) -> str:
    a, b = rng.choice(names), rng.choice(names)
    api = rng.choice(COMMON_APIS)
    forms = [
        f"{a}.{api}({b});",
        f"var {a} = {b}.{api}();",
        f"{a}.{api}({b}, {rng.randint(0, 9)});",
        f"return {a}.{api}({b});",
    ]
    return rng.choice(forms)


# ---------------------------------------------------------------------------
# mock backend scripts


def write_mock_script(path, prompt_to_completions: dict[str, list[str]]) -> None:
    """JSONL mapping sha256(prompt) to its scripted completions."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for prompt_text, completions in prompt_to_completions.items():
            fh.write(json.dumps({"prompt_sha256": prompt_sha256(prompt_text),
                                 "completions": completions},
                                ensure_ascii=False) + "\n")
