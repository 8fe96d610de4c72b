"""End-to-end CLI behavior: subcommands, exit codes, reproducibility."""

import json
import subprocess

import pytest

from perfix.cli import main
from perfix.kb import build_kb, save_kb
from perfix.vocab import load_default_vocabulary

from conftest import read_golden
from _fixtures import (
    UNDO_FIX_COMPLETION,
    UNDO_FIX_METHOD,
    UNDO_METHOD,
    seed_pairs,
    write_mock_script,
)


@pytest.fixture
def workspace(tmp_path):
    """Source file, seed KB, and a scripted mock backend on disk."""
    source = tmp_path / "Undo.cs"
    source.write_text(UNDO_METHOD + "\n", encoding="utf-8")
    kb_path = tmp_path / "kb.jsonl"
    save_kb(build_kb(seed_pairs(), load_default_vocabulary()), str(kb_path))
    script = tmp_path / "mock.jsonl"
    write_mock_script(str(script), {
        read_golden("prompt_rapgen_undo.txt"):
            [UNDO_FIX_COMPLETION + "\n// trailing chatter { }"],
        read_golden("prompt_static_undo.txt"):
            ["\n    return;\n}"],
    })
    return tmp_path


def run(args):
    return main([str(a) for a in args])


def test_suggest_end_to_end(workspace, capsys):
    code = run(["suggest", "--file", workspace / "Undo.cs",
                "--method", "Undo", "--statement-index", "2",
                "--kb-path", workspace / "kb.jsonl",
                "--backend", "mock", "--mock-script", workspace / "mock.jsonl",
                "--num-samples", "3"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["prompt_variant"] == "rapgen"
    assert payload["instruction"] == \
        "PERF: Rewrite the above method without FirstOrDefault."
    assert payload["suggestions"][0]["method_text"] == UNDO_FIX_METHOD
    assert payload["config"]["sampling"]["temperature"] == 0.7


def test_suggest_by_source_line(workspace, capsys):
    code = run(["suggest", "--file", workspace / "Undo.cs",
                "--method", "Undo", "--line", "4",
                "--kb-path", workspace / "kb.jsonl",
                "--backend", "mock", "--mock-script", workspace / "mock.jsonl",
                "--num-samples", "1"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert "FirstOrDefault" in payload["buggy_line"]


def test_suggest_pattern_not_found_exit_5(workspace, tmp_path, capsys):
    other = tmp_path / "Other.cs"
    other.write_text("void Tick() { counter.Push(item); }\n", encoding="utf-8")
    code = run(["suggest", "--file", other, "--method", "Tick",
                "--statement-index", "0",
                "--kb-path", workspace / "kb.jsonl",
                "--backend", "mock", "--mock-script", workspace / "mock.jsonl"])
    assert code == 5


def test_suggest_fallback_static(workspace, capsys):
    # unknown pattern + --fallback static still produces suggestions
    script = workspace / "mock.jsonl"
    source = workspace / "Fallback.cs"
    source.write_text("void Tick() { counter.Push(item); }\n", encoding="utf-8")
    from perfix.cs.parser import parse_method_text
    from perfix.prompting import render_static

    prompt = render_static(parse_method_text(source.read_text()))
    write_mock_script(str(script), {prompt.text: ["\n    counter.Pop();\n}"]})
    code = run(["suggest", "--file", source, "--method", "Tick",
                "--statement-index", "0", "--fallback", "static",
                "--kb-path", workspace / "kb.jsonl",
                "--backend", "mock", "--mock-script", script,
                "--num-samples", "1"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["prompt_variant"] == "static"


def test_dump_prompt_matches_golden(workspace, capsys):
    for variant in ("rapgen", "static", "oneshot", "reasoning"):
        code = run(["dump-prompt", "--file", workspace / "Undo.cs",
                    "--method", "Undo", "--statement-index", "2",
                    "--prompt-variant", variant,
                    "--kb-path", workspace / "kb.jsonl"])
        assert code == 0
        assert capsys.readouterr().out == \
            read_golden(f"prompt_{variant}_undo.txt")


def test_mine_and_build_chain(tmp_path, capsys):
    # two toy repos -> pairs -> vocab -> kb
    def make_repo(name, before, after):
        repo = tmp_path / name
        repo.mkdir()
        env = {"GIT_AUTHOR_NAME": "dev", "GIT_AUTHOR_EMAIL": "d@e",
               "GIT_COMMITTER_NAME": "dev", "GIT_COMMITTER_EMAIL": "d@e",
               "PATH": "/usr/bin:/bin:/usr/local/bin", "HOME": str(repo)}
        def git(*args):
            subprocess.run(["git", "-C", str(repo), *args], check=True,
                           capture_output=True, env=env)
        git("init", "-q", "-b", "main")
        (repo / "A.cs").write_text(before)
        git("add", "."); git("commit", "-q", "-m", "initial")
        (repo / "A.cs").write_text(after)
        git("add", "."); git("commit", "-q", "-m", "PERF: drop the LINQ scan")
        return repo

    before = ("class C { int F(int k) { "
              "var hits = rows.Where(x => x > k).Sum(); return k; } }")
    after = "class C { int F(int k) { int hits = 0; return k; } }"
    r1 = make_repo("one", before, after)
    r2 = make_repo("two", before.replace("rows", "cols").replace("hits", "gross"),
                   after.replace("hits", "gross"))
    manifest = tmp_path / "repos.tsv"
    manifest.write_text(f"one\t{r1}\ntwo\t{r2}\n")

    pairs = tmp_path / "pairs.jsonl"
    assert run(["mine", "--manifest", manifest, "--out", pairs]) == 0
    assert len(pairs.read_text().splitlines()) == 2

    vocab_out = tmp_path / "vocab.txt"
    assert run(["build-vocab", "--pairs", pairs, "--out", vocab_out]) == 0

    kb_out = tmp_path / "kb.jsonl"
    assert run(["build-kb", "--pairs", pairs, "--out", kb_out]) == 0
    meta = json.loads(kb_out.read_text().splitlines()[0])
    assert meta["entries"] == 2


def test_mine_empty_manifest(tmp_path):
    manifest = tmp_path / "empty.tsv"
    manifest.write_text("")
    out = tmp_path / "pairs.jsonl"
    assert run(["mine", "--manifest", manifest, "--out", out]) == 0
    assert out.read_text() == ""


def test_mine_unreadable_repo(tmp_path, capsys):
    manifest = tmp_path / "repos.tsv"
    manifest.write_text(f"ghost\t{tmp_path / 'missing'}\n")
    code = run(["mine", "--manifest", manifest,
                "--out", tmp_path / "pairs.jsonl"])
    assert code == 3
    assert "ghost" in capsys.readouterr().err


def test_build_vocab_min_projects_rejected(tmp_path, capsys):
    pairs = tmp_path / "pairs.jsonl"
    pairs.write_text(json.dumps({
        "repo_id": "r", "commit_id": "c",
        "before_text": "void F() { a.Add(1); }",
        "after_text": "void F() { }"}) + "\n")
    code = run(["build-vocab", "--pairs", pairs,
                "--out", tmp_path / "v.txt", "--min-projects", "1"])
    assert code == 2


def test_config_file_with_api_key_rejected(tmp_path, workspace):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({"prompt_variant": "static",
                               "api_key": "sk-nope"}))
    code = run(["suggest", "--file", workspace / "Undo.cs",
                "--method", "Undo", "--statement-index", "2",
                "--config", cfg,
                "--backend", "mock", "--mock-script", workspace / "mock.jsonl"])
    assert code == 3


def test_evaluate_reproducible(workspace, tmp_path, capsys):
    dataset = tmp_path / "cases.jsonl"
    records = [
        {"id": "undo", "before": UNDO_METHOD, "after": UNDO_FIX_METHOD,
         "buggy_line_index": 2},
        {"id": "nopattern", "before": "void T() { counter.Push(item); }",
         "after": "void T() { }", "buggy_line_index": 0},
    ]
    dataset.write_text("\n".join(json.dumps(r) for r in records) + "\n")
    outs = []
    for run_dir in ("run1", "run2"):
        out_dir = tmp_path / run_dir
        code = run(["evaluate", "--dataset", dataset,
                    "--kb-path", workspace / "kb.jsonl",
                    "--backend", "mock",
                    "--mock-script", workspace / "mock.jsonl",
                    "--num-samples", "2", "--out-dir", out_dir])
        assert code == 0
        outs.append((out_dir / "report.json").read_bytes())
    assert outs[0] == outs[1]

    report = json.loads(outs[0])
    by_id = {c["id"]: c for c in report["cases"]}
    assert by_id["undo"]["verbatim_hit"] is True
    assert by_id["undo"]["top_k_hit"]["1"] is True
    assert by_id["nopattern"]["error"] is not None  # run did not abort
    counts = report["aggregate"]["top_k_hit_counts"]
    assert counts["1"] <= counts["10"] <= counts["100"]
    # hyperparameter defaults echoed for provenance
    sampling = report["config"]["sampling"]
    assert sampling["temperature"] == 0.7
    assert sampling["max_tokens"] == 1024
