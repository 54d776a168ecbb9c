"""Similarity networks: pairwise matrices, n-NN majority vote, classical MDS."""
from __future__ import annotations

import csv
import io
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DegenerateSpectrum, DimensionMismatch, FormatError, UnknownId
from .signature import Signature
from .transport import similarity


@dataclass
class SimilarityMatrix:
    ids: list[str]
    sim: np.ndarray

    def __post_init__(self):
        sim = np.array(self.sim, dtype=np.float64)
        n = len(self.ids)
        if sim.shape != (n, n):
            raise ValueError(f"matrix shape {sim.shape} does not match {n} ids")
        if len(set(self.ids)) != n:
            raise ValueError("duplicate ids")
        if not np.allclose(sim, sim.T, atol=1e-9, rtol=0):
            raise ValueError("similarity matrix is not symmetric")
        sim = np.clip((sim + sim.T) / 2.0, 0.0, 1.0)
        np.fill_diagonal(sim, 1.0)
        self.ids = list(self.ids)
        self.sim = sim

    def index(self, user_id: str) -> int:
        try:
            return self.ids.index(user_id)
        except ValueError:
            raise UnknownId(user_id) from None


@dataclass
class LabeledNetwork:
    matrix: SimilarityMatrix
    labels: dict[str, str]

    def __post_init__(self):
        missing = [u for u in self.matrix.ids if u not in self.labels]
        if missing:
            raise ValueError(f"unlabeled ids: {missing[:5]}")


def pairwise_matrix(signatures: Sequence[Signature], workers: int = 1) -> SimilarityMatrix:
    """Similarity of every unordered pair, computed once per pair."""
    if len(signatures) < 2:
        raise ValueError("need at least two signatures")
    dims = {s.dim for s in signatures}
    if len(dims) != 1:
        raise DimensionMismatch(f"mixed signature dims {sorted(dims)}")
    n = len(signatures)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]

    def one(pair):
        i, j = pair
        return similarity(signatures[i], signatures[j])

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(one, pairs))
    else:
        values = [one(p) for p in pairs]
    sim = np.eye(n)
    for (i, j), s in zip(pairs, values):
        sim[i, j] = sim[j, i] = s
    return SimilarityMatrix([s.user_id for s in signatures], sim)


def nearest_neighbors(matrix: SimilarityMatrix, user_id: str, n: int) -> list[str]:
    """The *n* most similar other ids; equal similarities ordered by id."""
    i = matrix.index(user_id)
    others = [j for j in range(len(matrix.ids)) if j != i]
    if not 1 <= n <= len(others):
        raise ValueError(f"n must lie in [1, {len(others)}], got {n}")
    others.sort(key=lambda j: (-matrix.sim[i, j], matrix.ids[j]))
    return [matrix.ids[j] for j in others[:n]]


def knn_predict(net: LabeledNetwork, user_id: str, n: int) -> str:
    """Majority label among the n nearest neighbors (self excluded).

    A tied vote goes to whichever tied label appears first in the
    neighbor ranking.
    """
    neighbors = nearest_neighbors(net.matrix, user_id, n)
    votes = Counter(net.labels[u] for u in neighbors)
    top = max(votes.values())
    for u in neighbors:
        if votes[net.labels[u]] == top:
            return net.labels[u]
    raise AssertionError("unreachable")


def knn_accuracy(net: LabeledNetwork, n: int) -> float:
    ids = net.matrix.ids
    hits = sum(knn_predict(net, u, n) == net.labels[u] for u in ids)
    return hits / len(ids)


def mds_layout(matrix: SimilarityMatrix) -> np.ndarray:
    """Classical (Torgerson) MDS of the dissimilarities 1 - sim into 2-D."""
    return classical_mds(1.0 - matrix.sim)


def classical_mds(dissimilarity: np.ndarray, dims: int = 2) -> np.ndarray:
    d = np.asarray(dissimilarity, dtype=np.float64)
    n = d.shape[0]
    if d.shape != (n, n):
        raise ValueError("dissimilarity matrix must be square")
    if n < 3:
        raise ValueError("classical MDS needs at least 3 points")
    centering = np.eye(n) - np.full((n, n), 1.0 / n)
    gram = -0.5 * centering @ (d**2) @ centering
    gram = (gram + gram.T) / 2.0
    evals, evecs = np.linalg.eigh(gram)
    order = np.argsort(evals)[::-1][:dims]
    evals, evecs = evals[order], evecs[:, order]
    if evals[0] <= 1e-12 * max(1.0, np.abs(d).max() ** 2):
        raise DegenerateSpectrum(f"top eigenvalue {evals[0]:.3g} is not positive")
    # negative eigenvalues come from non-Euclidean input; drop those axes
    coords = evecs * np.sqrt(np.clip(evals, 0.0, None))
    coords -= coords.mean(axis=0)
    # eigenvectors are defined up to sign: make the largest-magnitude entry
    # of each column positive (first index on ties)
    for c in range(coords.shape[1]):
        k = int(np.argmax(np.abs(coords[:, c])))
        if coords[k, c] < 0:
            coords[:, c] = -coords[:, c]
    return coords


# CSV I/O


def write_matrix_csv(matrix: SimilarityMatrix, path: str | Path | None = None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", *matrix.ids])
    for uid, row in zip(matrix.ids, matrix.sim):
        writer.writerow([uid, *(repr(float(x)) for x in row)])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def read_matrix_csv(path: str | Path) -> SimilarityMatrix:
    rows = list(csv.reader(Path(path).read_text(encoding="utf-8").splitlines()))
    if not rows or rows[0][:1] != ["id"]:
        raise FormatError(f"{path}: header must start with 'id'")
    ids = rows[0][1:]
    body = rows[1:]
    if [r[0] for r in body] != ids:
        raise FormatError(f"{path}: row ids do not match the header")
    try:
        sim = np.array([[float(x) for x in r[1:]] for r in body])
        return SimilarityMatrix(ids, sim)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_layout_csv(
    ids: Sequence[str], coords: np.ndarray, labels: dict[str, str] | None = None,
    path: str | Path | None = None,
) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "x", "y", "label"])
    for uid, (x, y) in zip(ids, coords[:, :2]):
        writer.writerow([uid, repr(float(x)), repr(float(y)), (labels or {}).get(uid, "")])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def read_labels(path: str | Path) -> dict[str, str]:
    """Two-column TSV ``user_id<TAB>label``; blank lines and '#' comments ignored."""
    labels = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise FormatError(f"{path}:{lineno}: expected 'id<TAB>label'")
        labels[parts[0].strip()] = parts[1].strip()
    return labels
