"""Okapi BM25 inverted index built from scratch.

Tokenization is the shared lexical definition (lowercase alphanumeric runs).
Scores follow the standard saturated-tf form with a nonnegative IDF:

    score(D) = sum over distinct query terms t of
               IDF(t) * tf(t,D) * (k1 + 1) / (tf(t,D) + k1 * (1 - b + b * |D| / avgdl))
    IDF(t)   = ln((N - df(t) + 0.5) / (df(t) + 0.5) + 1)

The query is the document's own text, capped at ``query_cap`` leading terms;
per-term contributions are accumulated in ascending term order so results are
reproducible bit for bit.
"""

from __future__ import annotations

import json
import struct
from collections import Counter
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from ..lexical import tokenize

if TYPE_CHECKING:
    from ..corpus import Corpus, Document

MAGIC = b"SPLCBM25"

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75
DEFAULT_QUERY_CAP = 1024


class Bm25Index:
    """Immutable inverted index over one corpus; safe for concurrent queries."""

    def __init__(self, ids: list[str], doc_len: np.ndarray, term_ord: dict[str, int],
                 post_starts: np.ndarray, post_ends: np.ndarray,
                 post_doc: np.ndarray, post_tf: np.ndarray,
                 k1: float, b: float, query_cap: int | None):
        self.ids = ids
        self._id_to_ord = {doc_id: i for i, doc_id in enumerate(ids)}
        self.doc_len = doc_len
        self.n_docs = len(ids)
        # integer sum, so the mean is identical however the build was sharded
        self.avg_doc_len = float(int(doc_len.sum())) / self.n_docs
        self.k1 = float(k1)
        self.b = float(b)
        self.query_cap = query_cap
        self._term_ord = term_ord
        self._starts = post_starts
        self._ends = post_ends
        self._post_doc = post_doc
        self._post_tf = post_tf
        self._finalize()

    def _finalize(self) -> None:
        df = (self._ends - self._starts).astype(np.float64)
        n = float(self.n_docs)
        self._idf = np.log((n - df + 0.5) / (df + 0.5) + 1.0)
        if len(self._post_doc):
            dl = self.doc_len[self._post_doc].astype(np.float64)
            denom = self.k1 * (1.0 - self.b + self.b * dl / self.avg_doc_len)
            tf = self._post_tf.astype(np.float64)
            self._post_w = tf * (self.k1 + 1.0) / (tf + denom)
        else:
            self._post_w = np.zeros(0, dtype=np.float64)

    @property
    def n_terms(self) -> int:
        return len(self._term_ord)

    def df(self, term: str) -> int:
        o = self._term_ord.get(term)
        return 0 if o is None else int(self._ends[o] - self._starts[o])

    def postings(self, term: str) -> list[tuple[int, int]]:
        """(doc ordinal, term frequency) pairs, doc ordinal ascending."""
        o = self._term_ord.get(term)
        if o is None:
            return []
        sl = slice(self._starts[o], self._ends[o])
        return list(zip(self._post_doc[sl].tolist(), self._post_tf[sl].tolist()))

    def contains(self, doc_id: str) -> bool:
        return doc_id in self._id_to_ord

    def scores_for_terms(self, terms: list[str]) -> np.ndarray:
        """Dense score vector for a query given as a term sequence."""
        scores = np.zeros(self.n_docs, dtype=np.float64)
        for term in sorted(set(terms)):
            o = self._term_ord.get(term)
            if o is None:
                continue
            sl = slice(self._starts[o], self._ends[o])
            # doc ordinals within one posting list are unique, so the fancy
            # in-place add touches each entry exactly once
            scores[self._post_doc[sl]] += self._idf[o] * self._post_w[sl]
        return scores

    def query(self, doc: "Document", k: int) -> list[tuple[str, float]]:
        """Top-k neighbors of ``doc`` by BM25 score.

        The query is the first ``query_cap`` terms of the document text.  The
        document itself and all zero-score documents are excluded; ties break
        by doc id ascending.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        ordinal = self._id_to_ord.get(doc.id)
        if ordinal is None:
            raise ValueError(f"document {doc.id!r} not in index")
        scores = self.scores_for_terms(tokenize(doc.text, cap=self.query_cap))
        scores[ordinal] = 0.0
        return self._top_k(scores, k)

    # packers call this uniform surface on every provider
    retrieve = query

    def _top_k(self, scores: np.ndarray, k: int) -> list[tuple[str, float]]:
        pos = np.flatnonzero(scores > 0.0)
        if len(pos) == 0:
            return []
        if len(pos) > k:
            sub = scores[pos]
            kth = np.partition(sub, len(sub) - k)[len(sub) - k]
            pos = pos[sub >= kth]
        ranked = sorted(pos.tolist(), key=lambda i: (-scores[i], self.ids[i]))[:k]
        return [(self.ids[i], float(scores[i])) for i in ranked]

    def save(self, path: str | Path) -> None:
        header = {
            "k1": self.k1,
            "b": self.b,
            "query_cap": self.query_cap,
            "n_docs": self.n_docs,
            "n_terms": self.n_terms,
        }
        hdr = json.dumps(header, sort_keys=True).encode("utf-8")
        terms = sorted(self._term_ord, key=self._term_ord.get)
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<I", len(hdr)))
            f.write(hdr)
            for doc_id in self.ids:
                raw = doc_id.encode("utf-8")
                f.write(struct.pack("<I", len(raw)))
                f.write(raw)
            f.write(self.doc_len.astype("<u4").tobytes())
            for term in terms:
                raw = term.encode("utf-8")
                o = self._term_ord[term]
                sl = slice(self._starts[o], self._ends[o])
                f.write(struct.pack("<I", len(raw)))
                f.write(raw)
                f.write(struct.pack("<Q", self._ends[o] - self._starts[o]))
                f.write(self._post_doc[sl].astype("<u4").tobytes())
                f.write(self._post_tf[sl].astype("<u4").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "Bm25Index":
        with open(path, "rb") as f:
            data = f.read()
        if data[:8] != MAGIC:
            raise ValueError(f"{path}: not a BM25 index file (bad magic)")
        off = 8
        (hdr_len,) = struct.unpack_from("<I", data, off)
        off += 4
        header = json.loads(data[off:off + hdr_len].decode("utf-8"))
        off += hdr_len
        n_docs, n_terms = header["n_docs"], header["n_terms"]
        ids = []
        for _ in range(n_docs):
            (ln,) = struct.unpack_from("<I", data, off)
            off += 4
            ids.append(data[off:off + ln].decode("utf-8"))
            off += ln
        doc_len = np.frombuffer(data, dtype="<u4", count=n_docs, offset=off).astype(np.int64)
        off += 4 * n_docs
        term_ord: dict[str, int] = {}
        starts = np.zeros(n_terms, dtype=np.int64)
        ends = np.zeros(n_terms, dtype=np.int64)
        doc_chunks, tf_chunks = [], []
        cursor = 0
        for t in range(n_terms):
            (ln,) = struct.unpack_from("<I", data, off)
            off += 4
            term_ord[data[off:off + ln].decode("utf-8")] = t
            off += ln
            (m,) = struct.unpack_from("<Q", data, off)
            off += 8
            doc_chunks.append(np.frombuffer(data, dtype="<u4", count=m, offset=off))
            off += 4 * m
            tf_chunks.append(np.frombuffer(data, dtype="<u4", count=m, offset=off))
            off += 4 * m
            starts[t], ends[t] = cursor, cursor + m
            cursor += m
        post_doc = (np.concatenate(doc_chunks) if doc_chunks else
                    np.zeros(0, dtype="<u4")).astype(np.int32)
        post_tf = (np.concatenate(tf_chunks) if tf_chunks else
                   np.zeros(0, dtype="<u4")).astype(np.int64)
        if off != len(data):
            raise ValueError(f"{path}: trailing bytes after index payload")
        return cls(ids, doc_len, term_ord, starts, ends, post_doc, post_tf,
                   header["k1"], header["b"], header["query_cap"])


def bm25_build(corpus: "Corpus", k1: float = DEFAULT_K1, b: float = DEFAULT_B,
               query_cap: int | None = DEFAULT_QUERY_CAP) -> Bm25Index:
    """Index every document of ``corpus``.  ``query_cap=None`` means unlimited."""
    if len(corpus) == 0:
        raise ValueError("empty corpus")
    if not (k1 > 0):
        raise ValueError("k1 must be positive")
    if not (0.0 <= b <= 1.0):
        raise ValueError("b must lie in [0, 1]")
    if query_cap is not None and query_cap < 1:
        raise ValueError("query_cap must be positive or None")

    ids = [doc.id for doc in corpus]
    doc_len = np.zeros(len(ids), dtype=np.int64)
    term_ord: dict[str, int] = {}
    t_list: list[int] = []
    d_list: list[int] = []
    f_list: list[int] = []
    for d, doc in enumerate(corpus):
        terms = tokenize(doc.text)
        doc_len[d] = len(terms)
        for term, tf in Counter(terms).items():
            o = term_ord.get(term)
            if o is None:
                o = term_ord[term] = len(term_ord)
            t_list.append(o)
            d_list.append(d)
            f_list.append(tf)

    t = np.asarray(t_list, dtype=np.int64)
    post_doc = np.asarray(d_list, dtype=np.int32)
    post_tf = np.asarray(f_list, dtype=np.int64)
    # stable sort by term keeps doc ordinals ascending inside each posting list
    order = np.argsort(t, kind="stable")
    t, post_doc, post_tf = t[order], post_doc[order], post_tf[order]
    term_range = np.arange(len(term_ord), dtype=np.int64)
    starts = np.searchsorted(t, term_range, side="left")
    ends = np.searchsorted(t, term_range, side="right")
    return Bm25Index(ids, doc_len, term_ord, starts, ends, post_doc, post_tf,
                     k1, b, query_cap)
