"""Reference word embedding: lookup with OOV fallback, cosine ground distance."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import DimensionMismatch, FormatError, ZeroVectorError

DEFAULT_DIM = 100
DEFAULT_OOV_SEED = 0x5EED_0F_00F
NGRAM = 3


def _hashed_unit(dim: int, seed: int, namespace: str, key: str) -> np.ndarray:
    digest = hashlib.blake2b(
        f"{namespace}\x00{key}".encode("utf-8"),
        digest_size=16,
        key=(seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little"),
    ).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    while True:
        v = rng.standard_normal(dim)
        norm = np.linalg.norm(v)
        if norm > 0:
            return v / norm


def char_ngrams(word: str, n: int = NGRAM) -> list[str]:
    padded = f"<{word}>"
    return [padded[i : i + n] for i in range(len(padded) - n + 1)]


@dataclass
class EmbeddingModel:
    dim: int
    table: dict[str, np.ndarray]
    oov_seed: int = DEFAULT_OOV_SEED
    _oov_cache: dict[str, np.ndarray] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        for word, vec in self.table.items():
            vec = np.asarray(vec, dtype=np.float64)
            if vec.shape != (self.dim,):
                raise DimensionMismatch(f"vector for {word!r} has shape {vec.shape}")
            if not np.all(np.isfinite(vec)):
                raise FormatError(f"non-finite component in vector for {word!r}")
            if not np.any(vec):
                raise ZeroVectorError(f"zero vector for {word!r}")
            vec.setflags(write=False)
            self.table[word] = vec

    def __contains__(self, word: str) -> bool:
        return word in self.table

    def __len__(self) -> int:
        return len(self.table)

    def vector(self, word: str) -> np.ndarray:
        """Stored vector of *word*, or its deterministic unit-norm OOV fallback."""
        vec = self.table.get(word)
        if vec is not None:
            return vec
        vec = self._oov_cache.get(word)
        if vec is None:
            vec = oov_vector(word, self.dim, self.oov_seed)
            vec.setflags(write=False)
            self._oov_cache[word] = vec
        return vec

    def vectors(self, words: Iterable[str]) -> np.ndarray:
        words = list(words)
        if not words:
            return np.zeros((0, self.dim))
        return np.stack([self.vector(w) for w in words])

    def to_text(self) -> str:
        lines = [f"{len(self.table)} {self.dim}"]
        for word, vec in self.table.items():
            lines.append(word + " " + " ".join(repr(float(x)) for x in vec))
        return "\n".join(lines) + "\n"


def oov_vector(word: str, dim: int, seed: int = DEFAULT_OOV_SEED) -> np.ndarray:
    """Average of hashed character-trigram unit vectors, rescaled to unit length."""
    grams = char_ngrams(word)
    acc = np.zeros(dim)
    for gram in grams:
        acc += _hashed_unit(dim, seed, "ngram", gram)
    norm = np.linalg.norm(acc)
    if not grams or norm < 1e-12:
        return _hashed_unit(dim, seed, "word", word)
    return acc / norm


def vector(model: EmbeddingModel, word: str) -> np.ndarray:
    return model.vector(word)


def cosine_distance(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionMismatch(f"{x.shape} vs {y.shape}")
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0 or ny == 0:
        raise ZeroVectorError("cosine distance undefined for a zero vector")
    return float(np.clip(1.0 - np.dot(x, y) / (nx * ny), 0.0, 2.0))


def cosine_distance_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise cosine distances between the rows of *a* and the rows of *b*."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    if np.any(na == 0) or np.any(nb == 0):
        raise ZeroVectorError("cosine distance undefined for a zero vector")
    return np.clip(1.0 - (a / na[:, None]) @ (b / nb[:, None]).T, 0.0, 2.0)


def synthetic_model(
    dim: int, vocabulary: Iterable[str], seed: int = 0, oov_seed: int = DEFAULT_OOV_SEED
) -> EmbeddingModel:
    """Deterministic random unit vectors, one per vocabulary word."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    table = {w: _hashed_unit(dim, seed, "word", w) for w in dict.fromkeys(vocabulary)}
    return EmbeddingModel(dim, table, oov_seed)


def parse_model(text: str, oov_seed: int = DEFAULT_OOV_SEED) -> EmbeddingModel:
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise FormatError("missing header line '<count> <dim>'")
    header = lines[0].split()
    try:
        count, dim = (int(h) for h in header)
    except ValueError:
        raise FormatError(f"bad header {lines[0]!r}") from None
    if count < 0 or dim < 1:
        raise FormatError(f"bad header {lines[0]!r}")
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != count:
        raise FormatError(f"header announces {count} words, found {len(body)}")
    table: dict[str, np.ndarray] = {}
    for lineno, line in enumerate(body, start=2):
        parts = line.rstrip().split(" ")
        word, comps = parts[0], parts[1:]
        if len(comps) != dim:
            raise FormatError(f"line {lineno}: expected {dim} components, got {len(comps)}")
        try:
            vec = np.array([float(c) for c in comps])
        except ValueError:
            raise FormatError(f"line {lineno}: non-numeric component") from None
        if not np.all(np.isfinite(vec)):
            raise FormatError(f"line {lineno}: non-finite component")
        if not np.any(vec):
            raise ZeroVectorError(f"line {lineno}: zero vector for {word!r}")
        table.setdefault(word, vec)
    return EmbeddingModel(dim, table, oov_seed)


def load_model(path: str | Path, oov_seed: int = DEFAULT_OOV_SEED) -> EmbeddingModel:
    return parse_model(Path(path).read_text(encoding="utf-8"), oov_seed)


def save_model(model: EmbeddingModel, path: str | Path) -> None:
    Path(path).write_text(model.to_text(), encoding="utf-8")
