"""IVF-flat approximate inner-product search over precomputed embeddings.

Embeddings arrive from files (this toolkit never runs an encoder).  Training
fits coarse centroids with seeded k-means under inner-product assignment; a
query probes the ``nprobe`` best cells and ranks their members exactly, so
``nprobe = nlist`` reproduces exhaustive search.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from ..corpus import Document

EMB_MAGIC = b"SPLCEMB1"
IVF_MAGIC = b"SPLCIVF1"

DEFAULT_NLIST = 8192
DEFAULT_TRAIN_SAMPLE = 262_144
KMEANS_ITERS = 25


class EmbeddingIndex:
    """Vectors + ids, optionally trained with IVF centroids."""

    def __init__(self, vectors: np.ndarray, ids: list[str]):
        if vectors.ndim != 2:
            raise ValueError("vectors must be a 2-D array")
        if len(ids) != len(vectors):
            raise ValueError("ids/vectors length mismatch")
        self.vectors = np.ascontiguousarray(vectors, dtype=np.float32)
        self.dim = int(vectors.shape[1])
        self.ids = list(ids)
        self._id_to_ord = {doc_id: i for i, doc_id in enumerate(self.ids)}
        if len(self._id_to_ord) != len(self.ids):
            raise ValueError("duplicate embedding ids")
        self.nlist = 0
        self.centroids: np.ndarray | None = None
        self.assignment: np.ndarray | None = None
        self.train_sample = 0
        self.seed = 0
        self._cells: list[np.ndarray] = []
        self.default_nprobe: int | None = None

    @property
    def n_docs(self) -> int:
        return len(self.ids)

    @property
    def trained(self) -> bool:
        return self.nlist > 0

    def _build_cells(self) -> None:
        assert self.assignment is not None
        self._cells = [np.flatnonzero(self.assignment == c) for c in range(self.nlist)]

    def query(self, query_id: str, k: int, nprobe: int | None = None) -> list[tuple[str, float]]:
        """Top-k inner-product neighbors of the stored vector ``query_id``."""
        if not self.trained:
            raise ValueError("index not trained; call ivf_train first")
        if k < 1:
            raise ValueError("k must be >= 1")
        if nprobe is None:
            nprobe = self.default_nprobe if self.default_nprobe else self.nlist
        if not (1 <= nprobe <= self.nlist):
            raise ValueError(f"nprobe must lie in [1, {self.nlist}]")
        ordinal = self._id_to_ord.get(query_id)
        if ordinal is None:
            raise ValueError(f"unknown query id: {query_id!r}")
        q = self.vectors[ordinal].astype(np.float64)
        csims = self.centroids @ q
        probe = sorted(range(self.nlist), key=lambda c: (-csims[c], c))[:nprobe]
        members = [self._cells[c] for c in probe if len(self._cells[c])]
        if not members:
            return []
        cand = np.concatenate(members)
        cand = cand[cand != ordinal]
        if len(cand) == 0:
            return []
        scores = self.vectors[cand].astype(np.float64) @ q
        if len(cand) > k:
            kth = np.partition(scores, len(scores) - k)[len(scores) - k]
            keep = scores >= kth
            cand, scores = cand[keep], scores[keep]
        order = sorted(range(len(cand)), key=lambda i: (-scores[i], self.ids[cand[i]]))[:k]
        return [(self.ids[cand[i]], float(scores[i])) for i in order]

    def retrieve(self, doc: "Document", k: int) -> list[tuple[str, float]]:
        return self.query(doc.id, k)

    def save_trained(self, path: str | Path) -> None:
        if not self.trained:
            raise ValueError("index not trained")
        with open(path, "wb") as f:
            f.write(IVF_MAGIC)
            f.write(struct.pack("<IQIQQ", self.dim, self.n_docs, self.nlist,
                                self.train_sample, self.seed))
            f.write(self.vectors.astype("<f4").tobytes())
            _write_ids(f, self.ids)
            f.write(self.centroids.astype("<f8").tobytes())
            f.write(self.assignment.astype("<i4").tobytes())

    @classmethod
    def load_trained(cls, path: str | Path) -> "EmbeddingIndex":
        with open(path, "rb") as f:
            data = f.read()
        if data[:8] != IVF_MAGIC:
            raise ValueError(f"{path}: not an IVF index file (bad magic)")
        dim, count, nlist, train_sample, seed = struct.unpack_from("<IQIQQ", data, 8)
        off = 8 + struct.calcsize("<IQIQQ")
        vectors = np.frombuffer(data, dtype="<f4", count=count * dim, offset=off)
        vectors = vectors.reshape(count, dim)
        off += 4 * count * dim
        ids, off = _read_ids(data, off, count)
        index = cls(vectors, ids)
        index.nlist = nlist
        index.train_sample = train_sample
        index.seed = seed
        index.centroids = np.frombuffer(
            data, dtype="<f8", count=nlist * dim, offset=off).reshape(nlist, dim).copy()
        off += 8 * nlist * dim
        index.assignment = np.frombuffer(
            data, dtype="<i4", count=count, offset=off).astype(np.int32)
        off += 4 * count
        if off != len(data):
            raise ValueError(f"{path}: trailing bytes after index payload")
        index._build_cells()
        return index


def _write_ids(f, ids: list[str]) -> None:
    for doc_id in ids:
        raw = doc_id.encode("utf-8")
        f.write(struct.pack("<I", len(raw)))
        f.write(raw)


def _read_ids(data: bytes, off: int, count: int) -> tuple[list[str], int]:
    ids = []
    for _ in range(count):
        if off + 4 > len(data):
            raise ValueError("truncated id table")
        (ln,) = struct.unpack_from("<I", data, off)
        off += 4
        if off + ln > len(data):
            raise ValueError("truncated id table")
        ids.append(data[off:off + ln].decode("utf-8"))
        off += ln
    return ids, off


def save_embeddings(path: str | Path, vectors: np.ndarray, ids: list[str]) -> None:
    """Write the embedding binary format: magic, u32 dim, u64 count, f32 rows,
    then length-prefixed UTF-8 ids."""
    vectors = np.ascontiguousarray(vectors, dtype=np.float32)
    if vectors.ndim != 2:
        raise ValueError("vectors must be a 2-D array")
    if len(ids) != len(vectors):
        raise ValueError("ids/vectors length mismatch")
    with open(path, "wb") as f:
        f.write(EMB_MAGIC)
        f.write(struct.pack("<IQ", vectors.shape[1], vectors.shape[0]))
        f.write(vectors.astype("<f4").tobytes())
        _write_ids(f, ids)


def embed_load(path: str | Path) -> EmbeddingIndex:
    """Load an embedding file into an untrained index (nlist = 0)."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:8] != EMB_MAGIC:
        raise ValueError(f"{path}: not an embedding file (bad magic)")
    if len(data) < 8 + 12:
        raise ValueError(f"{path}: truncated header")
    dim, count = struct.unpack_from("<IQ", data, 8)
    off = 20
    need = off + 4 * count * dim
    if len(data) < need:
        raise ValueError(f"{path}: truncated vector payload "
                         f"(have {len(data)} bytes, need at least {need})")
    vectors = np.frombuffer(data, dtype="<f4", count=count * dim, offset=off)
    vectors = vectors.reshape(count, dim).copy()
    off = need
    bad = np.flatnonzero(~np.isfinite(vectors).all(axis=1))
    if len(bad):
        raise ValueError(f"{path}: non-finite values in row {int(bad[0])}")
    ids, off = _read_ids(data, off, count)
    if off != len(data):
        raise ValueError(f"{path}: trailing bytes after id table")
    return EmbeddingIndex(vectors, ids)


def ivf_train(index: EmbeddingIndex, nlist: int = DEFAULT_NLIST,
              train_sample: int = DEFAULT_TRAIN_SAMPLE, seed: int = 0) -> EmbeddingIndex:
    """Fit IVF centroids by seeded k-means under inner-product assignment.

    Training uses ``min(train_sample, n_docs)`` uniformly sampled vectors, 25
    iterations, initial centroids drawn from distinct training vectors; empty
    clusters are re-seeded from the point least similar to its centroid.
    Deterministic given ``seed``.
    """
    if nlist < 1:
        raise ValueError("nlist must be >= 1")
    n = index.n_docs
    if n == 0:
        raise ValueError("empty embedding index")
    rng = np.random.default_rng(seed)
    if train_sample >= n:
        train_idx = np.arange(n)
    else:
        train_idx = np.sort(rng.choice(n, size=train_sample, replace=False))
    train = index.vectors[train_idx].astype(np.float64)
    m = len(train)

    chosen: list[int] = []
    seen: set[bytes] = set()
    for i in rng.permutation(m):
        key = train[i].tobytes()
        if key not in seen:
            seen.add(key)
            chosen.append(int(i))
            if len(chosen) == nlist:
                break
    else:
        raise ValueError(
            f"nlist={nlist} exceeds the {len(seen)} distinct training vectors")
    centroids = train[chosen].copy()

    for _ in range(KMEANS_ITERS):
        sims = train @ centroids.T
        assign = np.argmax(sims, axis=1)  # ties resolve to the lowest ordinal
        counts = np.bincount(assign, minlength=nlist)
        new = np.zeros_like(centroids)
        np.add.at(new, assign, train)
        nonempty = counts > 0
        new[nonempty] /= counts[nonempty, None]
        empties = np.flatnonzero(~nonempty)
        if len(empties):
            # farthest = lowest similarity to its own centroid, index ascending
            best = sims[np.arange(m), assign]
            order = np.argsort(best, kind="stable")
            for cell, point in zip(empties, order):
                new[cell] = train[point]
        centroids = new

    index.nlist = nlist
    index.centroids = centroids
    index.train_sample = train_sample
    index.seed = seed
    assignment = np.empty(n, dtype=np.int32)
    for lo in range(0, n, 65536):  # bounded memory for the n x nlist sim block
        block = index.vectors[lo:lo + 65536].astype(np.float64) @ centroids.T
        assignment[lo:lo + 65536] = np.argmax(block, axis=1)
    index.assignment = assignment
    index._build_cells()
    return index
