"""Rank knowledge-base entries by structural similarity to the query method.

Featurization follows the Aroma family of structural features: kept tokens,
token-parent pairs, common-token sibling pairs, and positional variable-usage
features that make the bag invariant under renaming of project identifiers.
Similarity is multiset Jaccard over the bags.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from perfix.abstraction import BugPattern, TokenClass, abstract_line, classify_token
from perfix.cs.parser import SourceMethod, Statement, parse_method_text
from perfix.errors import ParseError, PatternNotFound
from perfix.kb import KbEntry, KnowledgeBase, lookup
from perfix.vocab import CommonVocabulary


@dataclass(frozen=True)
class FeatureBag:
    features: Counter

    def __len__(self) -> int:
        return sum(self.features.values())


@dataclass(frozen=True)
class RetrievalResult:
    entry: KbEntry
    score: float
    rank: int
    candidates_considered: int


_KEPT = (TokenClass.Keyword, TokenClass.CommonIdentifier, TokenClass.CommonLiteral)


def featurize(method: SourceMethod, vocab: CommonVocabulary) -> FeatureBag:
    """Four feature families over signature + body:

    - kept-token features for keywords and common identifiers/literals;
    - parent features ``token^node-kind``;
    - sibling features ``token>next-common-token``;
    - variable-usage features ``#VAR_i@node-kind``, where i numbers distinct
      project identifiers by first occurrence (rename invariant).
    """
    feats: Counter = Counter()
    var_index: dict[str, int] = {}
    prev_common: str | None = None

    walk = [(tok, "signature") for tok in method.sig_tokens]
    for stmt in method.statements:
        walk.extend(stmt.tree.walk())

    for tok, parent_kind in walk:
        cls = classify_token(tok, vocab)
        if cls in _KEPT:
            feats[tok.text] += 1
            feats[f"{tok.text}^{parent_kind}"] += 1
            if cls is not TokenClass.Keyword:
                if prev_common is not None:
                    feats[f"{prev_common}>{tok.text}"] += 1
                prev_common = tok.text
        elif cls is TokenClass.ProjectIdentifier:
            idx = var_index.setdefault(tok.text, len(var_index))
            feats[f"#VAR_{idx}@{parent_kind}"] += 1
    return FeatureBag(features=feats)


def similarity(a: FeatureBag, b: FeatureBag) -> float:
    """Multiset Jaccard in [0, 1]; two empty bags count as identical."""
    if not a.features and not b.features:
        return 1.0
    inter = sum((a.features & b.features).values())
    union = sum((a.features | b.features).values())
    return inter / union


def retrieve(kb: KnowledgeBase, buggy_method: SourceMethod,
             buggy_line: Statement, vocab: CommonVocabulary) -> RetrievalResult:
    """Abstract the buggy line, look its pattern up, and return the entry
    whose before-method is most similar to the query. Deterministic
    tie-break: lowest (repo_id, commit_id) wins.
    """
    pattern = abstract_line(buggy_line, vocab)
    candidates = lookup(kb, pattern)
    if not candidates:
        raise PatternNotFound(f"no knowledge-base entry for pattern {pattern.raw!r}")
    query_bag = featurize(buggy_method, vocab)
    scored = []
    for entry in candidates:
        try:
            before = parse_method_text(entry.before)
        except ParseError:
            continue
        scored.append((similarity(query_bag, featurize(before, vocab)), entry))
    if not scored:
        raise PatternNotFound(
            f"entries for pattern {pattern.raw!r} exist but none parse")
    scored.sort(key=lambda se: (-se[0], se[1].repo_id, se[1].commit_id))
    best_score, best = scored[0]
    return RetrievalResult(entry=best, score=best_score, rank=1,
                           candidates_considered=len(scored))
