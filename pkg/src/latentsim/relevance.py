"""Bag-of-words and document-frequency vectors, tf-idf scoring, top-k selection."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

from .errors import EmptyDocument, MissingDf, NoScoredWords
from .textprep import ReferenceDocument


@dataclass
class BowVector:
    counts: dict[str, int]
    tfidf: dict[str, float] | None = None

    def to_json(self) -> dict:
        out: dict = {"counts": dict(sorted(self.counts.items()))}
        if self.tfidf is not None:
            out["tfidf"] = dict(sorted(self.tfidf.items()))
        return out


@dataclass
class DfVector:
    """Word -> number of users that used it.

    The user form has every value 1 and ``num_users`` 0 (unused).
    """

    df: dict[str, int] = field(default_factory=dict)
    num_users: int = 0

    def to_json(self) -> dict:
        return {"df": dict(sorted(self.df.items())), "num_users": self.num_users}


@dataclass
class RelevanceConfig:
    k: int = 50
    p_min: float = 0.05

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not 0.0 <= self.p_min <= 1.0:
            raise ValueError(f"p_min must lie in [0, 1], got {self.p_min}")


def bow_from_tokens(tokens: Iterable[str]) -> BowVector:
    counts = dict(Counter(tokens))
    if not counts:
        raise EmptyDocument("reference document has no tokens")
    return BowVector(counts)


def bow_from_document(doc: ReferenceDocument) -> BowVector:
    try:
        return bow_from_tokens(doc.tokens)
    except EmptyDocument:
        raise EmptyDocument(f"reference document {doc.user_id!r} has no tokens") from None


def user_df(bow: BowVector) -> DfVector:
    if not bow.counts:
        raise EmptyDocument("empty BoW vector")
    return DfVector({w: 1 for w in bow.counts}, 0)


def tfidf(bow: BowVector, trunc: DfVector, p_min: float = 0.05) -> BowVector:
    """Score every word of *bow* as max-normalized tf times ln(#users / df).

    Words used by fewer than ``p_min`` of all users are left unscored;
    their counts stay in the returned vector.
    """
    n = trunc.num_users
    if n < 1:
        raise ValueError("truncated DF vector must report at least one user")
    top = max(bow.counts.values())
    scores: dict[str, float] = {}
    for word, count in bow.counts.items():
        try:
            df = trunc.df[word]
        except KeyError:
            raise MissingDf(f"no document frequency for {word!r}") from None
        if df < 1 or df > n:
            raise ValueError(f"df[{word!r}] = {df} outside [1, {n}]")
        if df / n < p_min:
            continue
        scores[word] = (count / top) * math.log(n / df)
    return BowVector(dict(bow.counts), scores)


def top_k_words(bow: BowVector, k: int) -> list[tuple[str, int]]:
    """The *k* best-scored words with their counts, best first.

    Ties are broken by ascending word so the selection is reproducible.
    """
    if bow.tfidf is None:
        raise ValueError("tf-idf scores have not been computed")
    if not bow.tfidf:
        raise NoScoredWords("every word was removed by the p_min threshold")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    ranked = sorted(bow.tfidf.items(), key=lambda kv: (-kv[1], kv[0]))
    return [(w, bow.counts[w]) for w, _ in ranked[:k]]
