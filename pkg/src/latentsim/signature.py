"""User signatures: (k x D word-vector matrix, length-k weight vector) pairs.

Wire layout (little-endian)::

    b"AFSG" | version u8 | k u16 | D u16 | uid_len u16 | uid utf-8
    | k*D vector components f16 (row-major) | k weights f16
"""
from __future__ import annotations

import random
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .embedding import EmbeddingModel
from .errors import CorruptSignature, EmptySelection, PoolTooSmall

MAGIC = b"AFSG"
VERSION = 1
SUFFIX = ".afsg"
_HEADER = struct.Struct("<4sBHHH")
_F16 = np.dtype("<f2")
_F16_MAX = float(np.finfo(np.float16).max)
_F16_TINY = float(np.float16(2.0**-24))
_WEIGHT_SUM_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class Signature:
    user_id: str
    vectors: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        vectors = np.array(self.vectors, dtype=np.float64)
        weights = np.array(self.weights, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] < 1:
            raise ValueError(f"vectors must be a non-empty k x D matrix, got {vectors.shape}")
        if weights.shape != (vectors.shape[0],):
            raise ValueError(f"{weights.shape[0] if weights.ndim else 0} weights for {vectors.shape[0]} rows")
        if not (np.all(np.isfinite(vectors)) and np.all(np.isfinite(weights))):
            raise ValueError("signature contains NaN or Inf")
        if np.any(weights <= 0):
            raise ValueError("weights must be strictly positive")
        if abs(weights.sum() - 1.0) > _WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {weights.sum()}, not 1")
        vectors.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "weights", weights)

    @property
    def k(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Signature):
            return NotImplemented
        return (
            self.user_id == other.user_id
            and np.array_equal(self.vectors, other.vectors)
            and np.array_equal(self.weights, other.weights)
        )

    def summary(self, full: bool = False) -> dict:
        out = {
            "user_id": self.user_id,
            "k": self.k,
            "dim": self.dim,
            "weights": {
                "min": float(self.weights.min()),
                "max": float(self.weights.max()),
                "sum": float(self.weights.sum()),
            },
        }
        if full:
            out["weight_vector"] = self.weights.tolist()
            out["vectors"] = self.vectors.tolist()
        return out


def build_signature(
    user_id: str, top_words: Sequence[tuple[str, int]], model: EmbeddingModel
) -> Signature:
    if not top_words:
        raise EmptySelection("no words selected for the signature")
    counts = np.array([c for _, c in top_words], dtype=np.float64)
    if np.any(counts < 1):
        raise ValueError("word counts must be >= 1")
    vectors = model.vectors(w for w, _ in top_words)
    return Signature(user_id, vectors, counts / counts.sum())


def _renormalized(q: np.ndarray) -> np.ndarray:
    wide = q.astype(np.float64)
    return np.maximum(wide / wide.sum(), _F16_TINY).astype(_F16)


def _exact_sum(q: np.ndarray, target: np.ndarray) -> np.ndarray | None:
    # f16 weights are multiples of 2**-24, so their float64 sum is exact and
    # a sum of exactly 1 is usually reachable. Each step moves one weight by
    # one f16 step toward the residual, choosing the move that leaves that
    # weight's relative error smallest. |residual| shrinks strictly.
    q = q.copy()
    for _ in range(50_000):
        wide = q.astype(np.float64)
        residual = 1.0 - wide.sum()
        if residual == 0.0:
            return q
        stepped = np.nextafter(q, np.float16(np.inf if residual > 0 else -np.inf))
        moved = stepped.astype(np.float64)
        ok = (moved > 0) & (np.abs(residual - (moved - wide)) < abs(residual))
        if not ok.any():
            return None
        err = np.where(ok, np.abs(moved - target) / target, np.inf)
        i = int(np.argmin(err))
        q[i] = stepped[i]
    return None


def _quantize_weights(weights: np.ndarray) -> np.ndarray:
    """Round weights to f16 such that renormalizing and rounding again is a no-op.

    deserialize renormalizes the stored weights, so this property is what
    makes serialize(deserialize(b)) == b.
    """
    target = np.asarray(weights, dtype=np.float64)
    q = np.maximum(target, _F16_TINY).astype(_F16)
    start = q
    for _ in range(16):
        nxt = _renormalized(q)
        if np.array_equal(nxt, q):
            return q
        q = nxt
    # renormalize-and-round can cycle; a sum of exactly 1 cannot
    exact = _exact_sum(start, target)
    if exact is not None:
        return exact
    raise ValueError("weight quantization did not settle")


def serialize(sig: Signature) -> bytes:
    uid = sig.user_id.encode("utf-8")
    if len(uid) > 0xFFFF:
        raise ValueError("user_id too long")
    if sig.k > 0xFFFF or sig.dim > 0xFFFF:
        raise ValueError("signature too large for the wire format")
    if np.max(np.abs(sig.vectors)) > _F16_MAX:
        raise ValueError("vector component exceeds half-precision range")
    head = _HEADER.pack(MAGIC, VERSION, sig.k, sig.dim, len(uid))
    body = sig.vectors.astype(_F16).tobytes() + _quantize_weights(sig.weights).tobytes()
    return head + uid + body


def deserialize(data: bytes) -> Signature:
    if len(data) < _HEADER.size:
        raise CorruptSignature("truncated header")
    magic, version, k, dim, uid_len = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CorruptSignature(f"bad magic {magic!r}")
    if version != VERSION:
        raise CorruptSignature(f"unsupported version {version}")
    if k < 1 or dim < 1:
        raise CorruptSignature(f"empty signature (k={k}, dim={dim})")
    off = _HEADER.size
    expected = off + uid_len + 2 * (k * dim + k)
    if len(data) != expected:
        raise CorruptSignature(f"expected {expected} bytes, got {len(data)}")
    try:
        user_id = data[off : off + uid_len].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorruptSignature("user_id is not valid UTF-8") from exc
    off += uid_len
    vectors = np.frombuffer(data, _F16, k * dim, off).astype(np.float64).reshape(k, dim)
    weights = np.frombuffer(data, _F16, k, off + 2 * k * dim).astype(np.float64)
    if not (np.all(np.isfinite(vectors)) and np.all(np.isfinite(weights))):
        raise CorruptSignature("non-finite value")
    if np.any(weights <= 0):
        raise CorruptSignature("non-positive weight")
    try:
        return Signature(user_id, vectors, weights / weights.sum())
    except ValueError as exc:
        raise CorruptSignature(str(exc)) from exc


def save(sig: Signature, path: str | Path) -> None:
    Path(path).write_bytes(serialize(sig))


def load(path: str | Path) -> Signature:
    return deserialize(Path(path).read_bytes())


def pad_selection(
    top_words: Sequence[tuple[str, int]],
    decoy_count: int,
    vocabulary_pool: Iterable[str],
    seed: int = 0,
) -> list[tuple[str, int]]:
    """Append *decoy_count* pool words (count 1) not already selected.

    Decoys are drawn without replacement; the pool is sorted first so the
    draw depends only on its contents and *seed*.
    """
    if decoy_count < 0:
        raise ValueError("decoy_count must be >= 0")
    out = list(top_words)
    if decoy_count == 0:
        return out
    taken = {w for w, _ in top_words}
    candidates = sorted(set(vocabulary_pool) - taken)
    if len(candidates) < decoy_count:
        raise PoolTooSmall(f"need {decoy_count} decoys, pool offers {len(candidates)}")
    decoys = random.Random(seed).sample(candidates, decoy_count)
    return out + [(w, 1) for w in decoys]


def jitter_vectors(sig: Signature, sigma: float, seed: int = 0) -> Signature:
    """Add seeded N(0, sigma^2) noise to every vector component."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return sig
    rng = np.random.default_rng(seed)
    noisy = sig.vectors + rng.normal(0.0, sigma, size=sig.vectors.shape)
    return Signature(sig.user_id, noisy, sig.weights)
