"""Score candidate fixes against reference fixes.

Metrics: verbatim match (normalized token equality), abstracted match
(after canonical VAR_i renaming of locals/parameters), CodeBLEU (BLEU +
keyword-weighted BLEU + AST-subtree match + data-flow match), and
closest-match Top-K selection via the retrieval featurizer.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field

from perfix.cs.lexer import significant, tokenize
from perfix.cs.parser import Node, SourceMethod, parse_method_text
from perfix.errors import EmptySuggestionSet, ParseError
from perfix.generation import FixSuggestion
from perfix.retrieval import featurize, similarity
from perfix.vocab import CommonVocabulary, load_default_vocabulary

log = logging.getLogger(__name__)

# CodeBLEU component weights with the highest human correlation (alpha,
# beta, gamma, delta)
DEFAULT_CODEBLEU_WEIGHTS = (0.1, 0.1, 0.4, 0.4)
KEYWORD_WEIGHT = 5.0
BLEU_MAX_ORDER = 4
BLEU_EPSILON = 1e-2  # numerator for orders with zero matches

TOP_K_LEVELS = (1, 10, 100)

_TYPE_KEYWORDS = frozenset(
    "int string bool long double float char byte object decimal short "
    "uint ulong ushort sbyte var dynamic".split())


@dataclass
class EvalCase:
    id: str
    before: str
    reference: str
    buggy_line_index: int | None = None
    suggestions: list[FixSuggestion] = field(default_factory=list)


@dataclass
class CaseResult:
    id: str
    verbatim_hit: bool
    abstracted_hit: bool
    best_codebleu: float
    closest_index: int | None
    closest_score: float
    top_k_hit: dict[int, bool]
    error: str | None = None


@dataclass
class EvalReport:
    cases: list[CaseResult]
    verbatim_pct: float
    abstracted_pct: float
    mean_codebleu: float
    top_k_hit_counts: dict[int, int]


# ---------------------------------------------------------------------------
# token-level equality


def _tokens(text: str) -> list[str]:
    try:
        return [t.text for t in significant(tokenize(text))]
    except ParseError:
        return text.split()


def verbatim_match(suggestion: str, reference: str, raw: bool = False) -> bool:
    """Equality of normalized token sequences (comments stripped, whitespace
    collapsed); ``raw=True`` compares bytes instead."""
    if raw:
        return suggestion == reference
    return _tokens(suggestion) == _tokens(reference)


# ---------------------------------------------------------------------------
# variable abstraction


def _param_names(method: SourceMethod) -> list[str]:
    toks = method.sig_tokens
    open_idx = next((i for i, t in enumerate(toks) if t.text == "("), None)
    if open_idx is None:
        return []
    depth = 0
    names: list[str] = []
    group: list = []
    for t in toks[open_idx:]:
        if t.text in "([{":
            depth += 1
            if depth == 1:
                continue
        elif t.text in ")]}":
            depth -= 1
            if depth == 0:
                names.extend(_param_name_of(group))
                break
        if depth >= 1:
            if depth == 1 and t.text == ",":
                names.extend(_param_name_of(group))
                group = []
            else:
                group.append(t)
    return names


def _param_name_of(group) -> list[str]:
    idents = [t for t in group if t.kind == "ident"]
    eq = next((i for i, t in enumerate(group) if t.text == "="), None)
    if eq is not None:
        idents = [t for t in group[:eq] if t.kind == "ident"]
    return [idents[-1].text] if idents else []


def _declared_in_statement(tokens) -> list[str]:
    names: list[str] = []
    n = len(tokens)
    for k, t in enumerate(tokens):
        if t.kind != "ident":
            continue
        prev = tokens[k - 1] if k > 0 else None
        prev2 = tokens[k - 2] if k > 1 else None
        nxt = tokens[k + 1] if k + 1 < n else None
        if prev is not None and prev.text in (".", "?.", "->", "::"):
            continue
        if prev is not None and prev.kind == "keyword" and prev.text == "var":
            names.append(t.text)
            continue
        if prev is not None and prev.kind == "keyword" and prev.text == "out":
            names.append(t.text)
            continue
        if prev2 is not None and prev2.text == "is" and prev is not None \
                and prev.kind == "ident":
            names.append(t.text)
            continue
        if nxt is not None and nxt.text == "=>":
            names.append(t.text)  # single lambda parameter
            continue
        type_like = prev is not None and (
            prev.kind == "ident" or prev.text in (">", "]")
            or (prev.kind == "keyword" and prev.text in _TYPE_KEYWORDS))
        if type_like and nxt is not None and nxt.text in ("=", ";", "in", ","):
            if prev2 is None or prev2.text not in (".", "?.", "new"):
                names.append(t.text)
            continue
    # parenthesized lambda parameters: idents directly before ',' or ')'
    # inside a (...) group immediately followed by '=>'
    for k, t in enumerate(tokens):
        if t.text != "=>" or k == 0 or tokens[k - 1].text != ")":
            continue
        depth = 0
        j = k - 1
        while j >= 0:
            if tokens[j].text == ")":
                depth += 1
            elif tokens[j].text == "(":
                depth -= 1
                if depth == 0:
                    break
            j -= 1
        for m in range(j + 1, k - 1):
            if tokens[m].kind == "ident" and tokens[m + 1].text in (",", ")"):
                names.append(tokens[m].text)
    # exception declarations: catch (Exception e)
    for k, t in enumerate(tokens):
        if t.kind == "ident" and k > 0 and tokens[k - 1].kind == "ident" \
                and k + 1 < n and tokens[k + 1].text == ")" \
                and tokens[0].kind == "keyword" and tokens[0].text in ("catch", "using", "foreach", "for"):
            names.append(t.text)
    return names


def variable_names(method: SourceMethod) -> list[str]:
    """Parameter and local-variable names, first-encounter order."""
    seen: list[str] = []

    def add(name: str) -> None:
        if name not in seen:
            seen.append(name)

    for name in _param_names(method):
        add(name)
    for stmt in method.statements:
        for name in _declared_in_statement(stmt.tokens):
            add(name)
    return seen


def abstract_variables(method_text: str) -> str:
    """Replace each local/parameter identifier with VAR_i, numbered by first
    encounter in traversal order; member/type/API names untouched."""
    method = parse_method_text(method_text)
    declared = set(variable_names(method))
    file = method.file
    lo, hi = method.span
    toks = [t for t in file.code_tokens if lo <= t.start < hi]
    mapping: dict[str, str] = {}
    pieces: list[str] = []
    cursor = lo
    prev_text: str | None = None
    for t in toks:
        if t.kind == "ident" and t.text in declared \
                and prev_text not in (".", "?.", "->", "::"):
            if t.text not in mapping:
                mapping[t.text] = f"VAR_{len(mapping)}"
            pieces.append(file.content[cursor:t.start])
            pieces.append(mapping[t.text])
            cursor = t.end
        prev_text = t.text
    pieces.append(file.content[cursor:hi])
    return "".join(pieces)


def abstracted_match(suggestion: str, reference: str) -> bool:
    try:
        return verbatim_match(abstract_variables(suggestion),
                              abstract_variables(reference))
    except ParseError as exc:
        log.warning("abstracted_match: parse failure, counting as miss: %s", exc)
        return False


# ---------------------------------------------------------------------------
# CodeBLEU


def _ngram_counts(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _bleu(cand, ref, weight_fn=None) -> float:
    """Sentence BLEU, n<=4. Orders where the reference has no n-grams are
    skipped; orders with zero matches get an epsilon numerator so short or
    disjoint inputs degrade smoothly instead of zeroing the score."""
    log_sum = 0.0
    orders = 0
    for n in range(1, BLEU_MAX_ORDER + 1):
        ref_counts = _ngram_counts(ref, n)
        cand_counts = _ngram_counts(cand, n)
        if not ref_counts and not cand_counts:
            continue
        orders += 1
        if weight_fn is None:
            matched = sum(min(c, ref_counts.get(g, 0)) for g, c in cand_counts.items())
            total = sum(cand_counts.values())
        else:
            matched = sum(min(c, ref_counts.get(g, 0)) * weight_fn(g)
                          for g, c in cand_counts.items())
            total = sum(c * weight_fn(g) for g, c in cand_counts.items())
        if total == 0:
            p = BLEU_EPSILON
        else:
            p = max(matched, BLEU_EPSILON) / total if matched == 0 else matched / total
        log_sum += math.log(p)
    if orders == 0:
        return 1.0
    precision = math.exp(log_sum / orders)
    c, r = len(cand), len(ref)
    if c == 0:
        return 0.0
    bp = 1.0 if c >= r else math.exp(1 - r / c)
    return bp * precision


def _keyword_weight(ngram) -> float:
    from perfix.cs.lexer import KEYWORDS

    return KEYWORD_WEIGHT if ngram[0] in KEYWORDS else 1.0


def _subtree_counts(method: SourceMethod) -> Counter:
    counts: Counter = Counter()

    def serialize(item) -> str:
        if isinstance(item, Node):
            body = ",".join(serialize(c) for c in item.children)
            sig = f"{item.kind}({body})"
            counts[sig] += 1
            return sig
        if item.kind in ("keyword", "punct"):
            return item.text
        return "ID"

    for stmt in method.statements:
        serialize(stmt.tree)
    return counts


def _dataflow_edges(method: SourceMethod) -> Counter:
    """Def-use edges over canonically renamed variables: one edge
    (def VAR_i, used VAR_j) per use of VAR_j inside a statement that
    defines VAR_i."""
    names = variable_names(method)
    index = {name: f"VAR_{i}" for i, name in enumerate(names)}
    edges: Counter = Counter()
    for stmt in method.statements:
        toks = stmt.tokens
        defs = [n for n in _declared_in_statement(toks) if n in index]
        assigned = []
        for k, t in enumerate(toks):
            if t.kind == "ident" and t.text in index \
                    and k + 1 < len(toks) and toks[k + 1].text == "=" \
                    and (k == 0 or toks[k - 1].text not in (".", "?.")):
                assigned.append(t.text)
        defs = list(dict.fromkeys(defs + assigned))
        if not defs:
            continue
        uses = []
        prev = None
        for t in toks:
            if t.kind == "ident" and t.text in index and t.text not in defs \
                    and (prev is None or prev.text not in (".", "?.", "->", "::")):
                uses.append(t.text)
            prev = t
        for d in defs:
            if not uses:
                edges[(index[d], "<const>")] += 1
            for u in uses:
                edges[(index[d], index[u])] += 1
    return edges


def _match_ratio(cand: Counter, ref: Counter) -> float:
    total = sum(ref.values())
    if total == 0:
        return 1.0
    matched = sum(min(c, ref.get(k, 0)) for k, c in cand.items())
    return matched / total


def codebleu(suggestion: str, reference: str,
             weights=DEFAULT_CODEBLEU_WEIGHTS) -> float:
    """Weighted combination of BLEU, keyword-weighted BLEU, AST-subtree
    match, and data-flow match, scaled to [0, 100]. Both sides are put
    through canonical VAR_i renaming first, so code equal up to variable
    names scores 100 (abstracted_match implies codebleu == 100). Parse
    failures degrade gracefully: tree components score 0, BLEU components
    fall back to the raw text."""
    alpha, beta, gamma, delta = weights
    try:
        suggestion = abstract_variables(suggestion)
    except ParseError:
        pass
    try:
        reference = abstract_variables(reference)
    except ParseError:
        pass
    cand_toks, ref_toks = _tokens(suggestion), _tokens(reference)
    bleu = _bleu(cand_toks, ref_toks)
    wbleu = _bleu(cand_toks, ref_toks, weight_fn=_keyword_weight)
    try:
        cand_m = parse_method_text(suggestion)
        ref_m = parse_method_text(reference)
        ast = _match_ratio(_subtree_counts(cand_m), _subtree_counts(ref_m))
        df = _match_ratio(_dataflow_edges(cand_m), _dataflow_edges(ref_m))
    except ParseError as exc:
        log.warning("codebleu: tree components unavailable: %s", exc)
        ast = df = 0.0
    return 100.0 * (alpha * bleu + beta * wbleu + gamma * ast + delta * df)


# ---------------------------------------------------------------------------
# closest match and dataset evaluation


def closest_match(suggestions: list[FixSuggestion], reference: str,
                  vocab: CommonVocabulary | None = None):
    """Most similar suggestion to the reference under the retrieval
    featurizer; ties go to the lowest sample_index."""
    if not suggestions:
        raise EmptySuggestionSet("no suggestions to rank")
    vocab = vocab or load_default_vocabulary()
    try:
        ref_bag = featurize(parse_method_text(reference), vocab)
    except ParseError:
        return suggestions[0], 0.0
    best = None
    for s in sorted(suggestions, key=lambda s: s.sample_index):
        try:
            bag = featurize(parse_method_text(s.method_text), vocab)
            score = similarity(bag, ref_bag)
        except ParseError:
            score = 0.0
        if best is None or score > best[1]:
            best = (s, score)
    return best


def evaluate_case(case: EvalCase, weights=DEFAULT_CODEBLEU_WEIGHTS,
                  vocab: CommonVocabulary | None = None,
                  review_verdicts: dict[str, str] | None = None) -> CaseResult:
    review_verdicts = review_verdicts or {}
    suggestions = case.suggestions
    verbatim = any(verbatim_match(s.method_text, case.reference) for s in suggestions)
    abstracted = verbatim or any(
        abstracted_match(s.method_text, case.reference) for s in suggestions)
    best_cb = max((codebleu(s.method_text, case.reference, weights)
                   for s in suggestions), default=0.0)
    if suggestions:
        closest, score = closest_match(suggestions, case.reference, vocab)
        closest_index, closest_score = closest.sample_index, score
    else:
        closest_index, closest_score = None, 0.0

    flagged_index: int | None = None
    if review_verdicts.get(case.id) == "equivalent_or_better" and closest_index is not None:
        flagged_index = closest_index
    top_k: dict[int, bool] = {}
    for k in TOP_K_LEVELS:
        hit = any(s.sample_index < k and abstracted_match(s.method_text, case.reference)
                  for s in suggestions)
        if not hit and flagged_index is not None and flagged_index < k:
            hit = True
        top_k[k] = hit
    return CaseResult(id=case.id, verbatim_hit=verbatim, abstracted_hit=abstracted,
                      best_codebleu=best_cb, closest_index=closest_index,
                      closest_score=closest_score, top_k_hit=top_k)


def evaluate_dataset(cases: list[EvalCase], weights=DEFAULT_CODEBLEU_WEIGHTS,
                     vocab: CommonVocabulary | None = None,
                     review_verdicts: dict[str, str] | None = None) -> EvalReport:
    results: list[CaseResult] = []
    for case in cases:
        try:
            results.append(evaluate_case(case, weights, vocab, review_verdicts))
        except Exception as exc:  # never abort the run on one case
            log.warning("case %s failed: %s", case.id, exc)
            results.append(CaseResult(
                id=case.id, verbatim_hit=False, abstracted_hit=False,
                best_codebleu=0.0, closest_index=None, closest_score=0.0,
                top_k_hit={k: False for k in TOP_K_LEVELS}, error=str(exc)))
    n = len(results) or 1
    return EvalReport(
        cases=results,
        verbatim_pct=100.0 * sum(r.verbatim_hit for r in results) / n,
        abstracted_pct=100.0 * sum(r.abstracted_hit for r in results) / n,
        mean_codebleu=sum(r.best_codebleu for r in results) / n,
        top_k_hit_counts={k: sum(r.top_k_hit.get(k, False) for r in results)
                          for k in TOP_K_LEVELS},
    )


# ---------------------------------------------------------------------------
# serialization


def load_cases(path: str) -> list[EvalCase]:
    """JSON Lines: {id, before, after, buggy_line_index?} per line."""
    cases = []
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            rec = json.loads(line)
            cases.append(EvalCase(id=str(rec.get("id", ln)),
                                  before=rec["before"], reference=rec["after"],
                                  buggy_line_index=rec.get("buggy_line_index")))
    return cases


def report_to_dict(report: EvalReport, config_echo: dict | None = None) -> dict:
    return {
        "config": config_echo or {},
        "aggregate": {
            "verbatim_pct": report.verbatim_pct,
            "abstracted_pct": report.abstracted_pct,
            "mean_codebleu": report.mean_codebleu,
            "top_k_hit_counts": {str(k): v
                                 for k, v in report.top_k_hit_counts.items()},
            "cases": len(report.cases),
        },
        "cases": [
            {
                "id": r.id,
                "verbatim_hit": r.verbatim_hit,
                "abstracted_hit": r.abstracted_hit,
                "best_codebleu": round(r.best_codebleu, 6),
                "closest_index": r.closest_index,
                "closest_score": round(r.closest_score, 6),
                "top_k_hit": {str(k): v for k, v in r.top_k_hit.items()},
                "error": r.error,
            }
            for r in report.cases
        ],
    }


def format_report_table(report: EvalReport, label: str = "perfix") -> str:
    counts = report.top_k_hit_counts
    n = len(report.cases) or 1
    header = (f"{'Model':<24}| {'Verbatim %':>10} | {'Abstracted %':>12} | "
              f"{'CodeBLEU':>8} | {'Top-1 %':>7} | {'Top-10 %':>8} | {'Top-100 %':>9}")
    row = (f"{label:<24}| {report.verbatim_pct:>10.1f} | "
           f"{report.abstracted_pct:>12.1f} | {report.mean_codebleu:>8.1f} | "
           f"{100.0 * counts.get(1, 0) / n:>7.1f} | "
           f"{100.0 * counts.get(10, 0) / n:>8.1f} | "
           f"{100.0 * counts.get(100, 0) / n:>9.1f}")
    return header + "\n" + "-" * len(header) + "\n" + row + "\n"


def export_review_csv(cases: list[EvalCase], report: EvalReport, path: str) -> None:
    """Closest-match picks for manual expert labeling."""
    by_id = {r.id: r for r in report.cases}
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "suggestion_text", "reference_text"])
        for case in cases:
            r = by_id.get(case.id)
            if r is None or r.closest_index is None:
                continue
            suggestion = next(s.method_text for s in case.suggestions
                              if s.sample_index == r.closest_index)
            writer.writerow([case.id, suggestion, case.reference])


def import_review_csv(path: str) -> dict[str, str]:
    """id -> verdict ('equivalent_or_better' | 'worse')."""
    verdicts: dict[str, str] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            verdicts[row["id"]] = row["verdict"]
    return verdicts
