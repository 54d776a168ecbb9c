"""Client-side flow: reference document -> BoW -> DF exchange -> tf-idf -> signature.

Only the user's vocabulary (as a set) and the selected words (plus optional
decoys, shuffled) ever reach the backend.
"""
from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .backend import BackendClient
from .errors import DimensionMismatch
from .netgraph import LabeledNetwork, knn_accuracy, pairwise_matrix
from .relevance import BowVector, RelevanceConfig, bow_from_document, tfidf, top_k_words, user_df
from .signature import Signature, jitter_vectors, pad_selection
from .textprep import PrepConfig, ReferenceDocument


@dataclass
class SignConfig:
    k: int = 50
    p_min: float = 0.05
    decoys: int = 0
    # None: decoys come from the user's own (already registered) vocabulary
    decoy_pool: Sequence[str] | None = None
    jitter_sigma: float = 0.0
    seed: int = 0
    prep: PrepConfig = field(default_factory=PrepConfig)

    def __post_init__(self):
        RelevanceConfig(self.k, self.p_min)  # validates k and p_min
        if self.decoys < 0:
            raise ValueError("decoys must be >= 0")
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be >= 0")


def user_seed(seed: int, user_id: str) -> int:
    digest = hashlib.blake2b(f"{seed}\x00{user_id}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def signature_from_vectors(
    user_id: str, top_words: Sequence[tuple[str, int]], vectors: Mapping[str, Sequence[float]]
) -> Signature:
    counts = np.array([c for _, c in top_words], dtype=np.float64)
    matrix = np.array([vectors[w] for w, _ in top_words], dtype=np.float64)
    return Signature(user_id, matrix, counts / counts.sum())


def _external_decoys(bow: BowVector, config: SignConfig, rng_seed: int) -> list[str]:
    if not config.decoys or config.decoy_pool is None:
        return []
    own = [(w, c) for w, c in bow.counts.items()]
    padded = pad_selection(own, config.decoys, config.decoy_pool, rng_seed)
    return [w for w, _ in padded[len(own):]]


def score_document(
    doc: ReferenceDocument, backend: BackendClient, config: SignConfig
) -> tuple[BowVector, list[str]]:
    """Register the document's vocabulary and return its tf-idf-scored BoW.

    Also returns the external decoys that were registered alongside it.
    """
    bow = bow_from_document(doc)
    seed = user_seed(config.seed, doc.user_id)
    decoys = _external_decoys(bow, config, seed)
    words = set(user_df(bow).df) | set(decoys)
    trunc, _ = backend.submit_df(doc.user_id, words)
    return tfidf(bow, trunc, config.p_min), decoys


def sign_scored(
    user_id: str,
    scored: BowVector,
    backend: BackendClient,
    config: SignConfig,
    decoys: Sequence[str] = (),
    k: int | None = None,
) -> Signature:
    top = top_k_words(scored, k or config.k)
    seed = user_seed(config.seed, user_id)
    if config.decoys and config.decoy_pool is None:
        request = pad_selection(top, config.decoys, scored.counts, seed)
    else:
        request = list(top) + [(w, 1) for w in decoys]
    words = [w for w, _ in request]
    random.Random(seed).shuffle(words)
    vectors = backend.fetch_vectors(words)
    if len(vectors) != len(words):
        raise DimensionMismatch(f"asked for {len(words)} vectors, got {len(vectors)}")
    sig = signature_from_vectors(user_id, top, dict(zip(words, vectors)))
    if config.jitter_sigma > 0:
        sig = jitter_vectors(sig, config.jitter_sigma, seed)
    return sig


def sign_document(doc: ReferenceDocument, backend: BackendClient, config: SignConfig) -> Signature:
    """The full client flow for one user."""
    scored, decoys = score_document(doc, backend, config)
    return sign_scored(doc.user_id, scored, backend, config, decoys)


def sign_many(
    docs: Sequence[ReferenceDocument], backend: BackendClient, config: SignConfig,
    k_values: Sequence[int] | None = None,
) -> dict[int, list[Signature]]:
    """Sign a cohort after every member has registered.

    All vocabularies are submitted first; the second (identical) submission
    per user then returns document frequencies that reflect the whole cohort.
    """
    for doc in docs:
        score_document(doc, backend, config)
    scored = [score_document(doc, backend, config) for doc in docs]
    out: dict[int, list[Signature]] = {}
    for k in k_values or [config.k]:
        out[k] = [
            sign_scored(doc.user_id, bow, backend, config, decoys, k)
            for doc, (bow, decoys) in zip(docs, scored)
        ]
    return out


def classification_grid(
    signatures_by_k: Mapping[int, Sequence[Signature]],
    labels: Mapping[str, str],
    n_values: Sequence[int],
    workers: int = 1,
) -> dict[int, dict[int, float]]:
    """n-NN accuracy for every (k, n): ``grid[k][n]``."""
    grid: dict[int, dict[int, float]] = {}
    for k, sigs in signatures_by_k.items():
        net = LabeledNetwork(pairwise_matrix(sigs, workers), dict(labels))
        grid[k] = {n: knn_accuracy(net, n) for n in n_values}
    return grid
