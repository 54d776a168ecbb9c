"""Synthetic corpora and signatures for experiments that need no real data.

The two-topic corpus mimics the party-classification setting: users of each
class draw content words from their own topic vocabulary, everyone shares a
common vocabulary, seed users only speak the common vocabulary, and every
user sprinkles in a few private typo-like tokens that the p_min filter must
discard.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .embedding import EmbeddingModel, save_model, synthetic_model
from .signature import Signature
from .textprep import english_words

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


def pseudo_words(count: int, rng: np.random.Generator, taken: set[str] | None = None) -> list[str]:
    """Distinct pronounceable non-English words of 3-4 syllables."""
    taken = set(taken or ()) | set(english_words())
    out: list[str] = []
    while len(out) < count:
        syllables = rng.integers(3, 5)
        word = "".join(
            _CONSONANTS[rng.integers(len(_CONSONANTS))] + _VOWELS[rng.integers(len(_VOWELS))]
            for _ in range(syllables)
        )
        if word not in taken:
            taken.add(word)
            out.append(word)
    return out


def _zipf(size: int, exponent: float = 1.0) -> np.ndarray:
    p = 1.0 / np.arange(1, size + 1) ** exponent
    return p / p.sum()


@dataclass
class SyntheticCorpus:
    users: dict[str, list[str]]  # user_id -> messages
    labels: dict[str, str]
    seeds: dict[str, list[str]]
    topics: dict[str, list[str]]
    common: list[str]
    typos: list[str] = field(default_factory=list)

    @property
    def vocabulary(self) -> list[str]:
        words = list(self.common) + self.typos
        for topic in self.topics.values():
            words.extend(topic)
        return words

    def embedding(self, dim: int = 100, seed: int = 0) -> EmbeddingModel:
        return synthetic_model(dim, self.vocabulary, seed)

    def write(self, root: str | Path, dim: int = 100, seed: int = 0) -> Path:
        """Lay the corpus out as users/, seeds/, labels.tsv and model.vec."""
        root = Path(root)
        (root / "users").mkdir(parents=True, exist_ok=True)
        (root / "seeds").mkdir(exist_ok=True)
        for uid, msgs in self.users.items():
            (root / "users" / f"{uid}.txt").write_text("\n".join(msgs) + "\n", encoding="utf-8")
        for uid, msgs in self.seeds.items():
            (root / "seeds" / f"{uid}.txt").write_text("\n".join(msgs) + "\n", encoding="utf-8")
        (root / "labels.tsv").write_text(
            "".join(f"{u}\t{lab}\n" for u, lab in self.labels.items()), encoding="utf-8"
        )
        save_model(self.embedding(dim, seed), root / "model.vec")
        return root


def _messages(words: list[str], rng: np.random.Generator, fillers: list[str]) -> list[str]:
    msgs, i = [], 0
    while i < len(words):
        size = int(rng.integers(4, 12))
        chunk = words[i : i + size]
        # stop words in between, as in real messages; the pipeline drops them
        for _ in range(int(rng.integers(0, 3))):
            chunk.insert(int(rng.integers(0, len(chunk) + 1)), fillers[rng.integers(len(fillers))])
        msgs.append(" ".join(chunk))
        i += size
    return msgs


def generate_corpus(
    n_per_class: int = 30,
    n_seed: int = 20,
    classes: tuple[str, str] = ("A", "B"),
    topic_size: int = 200,
    common_size: int = 300,
    doc_tokens: int = 600,
    topic_share: float = 0.4,
    typos_per_user: int = 5,
    seed: int = 0,
) -> SyntheticCorpus:
    rng = np.random.default_rng(seed)
    common = pseudo_words(common_size, rng)
    topics = {c: pseudo_words(topic_size, rng, set(common)) for c in classes}
    used = set(common).union(*map(set, topics.values()))
    fillers = ["the", "and", "to", "a", "of", "is", "so"]
    p_common = _zipf(common_size)
    p_topic = _zipf(topic_size, 0.8)
    typos: list[str] = []

    def doc(topic: list[str] | None) -> list[str]:
        n_topic = int(doc_tokens * topic_share) if topic else 0
        words = list(rng.choice(common, size=doc_tokens - n_topic, p=p_common))
        if topic:
            # each user reshuffles part of the topic ranking: shared theme, own emphasis
            perm = np.array(topic)
            head = rng.permutation(40)
            perm[:40] = perm[head]
            words += list(rng.choice(perm, size=n_topic, p=p_topic))
        own_typos = pseudo_words(typos_per_user, rng, used)
        used.update(own_typos)
        typos.extend(own_typos)
        words += own_typos
        rng.shuffle(words)
        return [str(w) for w in words]

    users, labels = {}, {}
    for c in classes:
        for i in range(n_per_class):
            uid = f"{c.lower()}{i:03d}"
            users[uid] = _messages(doc(topics[c]), rng, fillers)
            labels[uid] = c
    seeds = {f"s{i:03d}": _messages(doc(None), rng, fillers) for i in range(n_seed)}
    return SyntheticCorpus(users, labels, seeds, topics, common, typos)


def random_signature(
    k: int, dim: int, rng: np.random.Generator, user_id: str = "", max_count: int = 20
) -> Signature:
    """Random unit vectors with count-like weights."""
    vectors = rng.standard_normal((k, dim))
    vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
    counts = rng.integers(1, max_count + 1, size=k).astype(np.float64)
    return Signature(user_id, vectors, counts / counts.sum())
