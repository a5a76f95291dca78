"""Shared fixture builders for the test suite."""

from __future__ import annotations

import numpy as np

from splicepack.corpus import Corpus, Document

from oracles import zipfian_probs


def make_corpus(texts, ids=None, domains=None) -> Corpus:
    ids = ids or [f"d{i:04d}" for i in range(len(texts))]
    domains = domains or [None] * len(texts)
    return Corpus(Document.from_text(i, t, domain=dm)
                  for i, t, dm in zip(ids, texts, domains))


def random_word_corpus(n_docs: int, seed: int, vocab: int = 50,
                       min_words: int = 1, max_words: int = 40) -> Corpus:
    """Random bag-of-words documents over a small shared vocabulary."""
    rng = np.random.default_rng(seed)
    words = [f"w{i}" for i in range(vocab)]
    texts = []
    for _ in range(n_docs):
        n = rng.integers(min_words, max_words + 1)
        texts.append(" ".join(rng.choice(words, size=n)))
    return make_corpus(texts)


def clustered_corpus(n_docs: int, n_clusters: int, vocab_per_cluster: int,
                     words_per_doc: int, seed: int, zipf_s: float = 1.2,
                     shared_vocab: int = 0, shared_fraction: float = 0.0):
    """Planted-cluster corpus: each document draws Zipf-weighted words from
    its cluster's private vocabulary, optionally mixed with a shared
    function-word vocabulary.  Returns (corpus, cluster label per doc)."""
    rng = np.random.default_rng(seed)
    cluster_words = [
        np.array([f"c{c:03d}x{w:04d}" for w in range(vocab_per_cluster)])
        for c in range(n_clusters)
    ]
    cluster_p = zipfian_probs(vocab_per_cluster, zipf_s)
    shared_words = np.array([f"f{w:03d}" for w in range(shared_vocab)])
    shared_p = zipfian_probs(shared_vocab, 1.5) if shared_vocab else None

    labels = rng.integers(0, n_clusters, size=n_docs)
    texts = []
    for label in labels:
        n_shared = int(round(words_per_doc * shared_fraction)) if shared_vocab else 0
        own = rng.choice(cluster_words[label], size=words_per_doc - n_shared, p=cluster_p)
        if n_shared:
            mixed = np.concatenate([own, rng.choice(shared_words, size=n_shared, p=shared_p)])
            mixed = mixed[rng.permutation(len(mixed))]
        else:
            mixed = own
        texts.append(" ".join(mixed))
    return make_corpus(texts), labels.tolist()


def chain_cluster_corpus(n_docs: int, n_clusters: int, vocab_per_cluster: int,
                         seed: int, shared_vocab: int = 500, shared_s: float = 1.2,
                         shared_frac: float = 0.4, own_reps: int = 8,
                         teaser_reps: int = 2):
    """Planted clusters shaped like natural topic corpora.

    Every cluster's vocabulary (``vocab_per_cluster`` words) is the union of a
    function-word head shared by all clusters and a private tail partitioned
    into per-document signature blocks.  Each document repeats its own block
    heavily and carries a light teaser of the next block, so a lexical
    retriever's best match for a document is the next one in the chain (the
    candidate holds the teaser words at high term frequency).  Coherent
    windows therefore see flat, saturated signature counts while random
    windows see dispersed two-level counts plus the same head.

    Returns (corpus, cluster label per doc).
    """
    rng = np.random.default_rng(seed)
    own_vocab = vocab_per_cluster - shared_vocab
    shared_words = np.array([f"f{w:04d}" for w in range(shared_vocab)])
    shared_p = zipfian_probs(shared_vocab, shared_s)

    labels = rng.integers(0, n_clusters, size=n_docs)
    per_cluster = [np.flatnonzero(labels == c) for c in range(n_clusters)]
    texts: list[str | None] = [None] * n_docs
    for c, members in enumerate(per_cluster):
        n_c = len(members)
        if n_c == 0:
            continue
        words = np.array([f"c{c:02d}w{w:04d}" for w in range(own_vocab)])
        blocks = np.array_split(rng.permutation(words), n_c)
        for j, doc_idx in enumerate(members):
            own = np.repeat(blocks[j], own_reps)
            teaser = np.repeat(blocks[(j + 1) % n_c], teaser_reps)
            n_topical = len(own) + len(teaser)
            n_shared = int(n_topical * shared_frac / (1 - shared_frac))
            head = rng.choice(shared_words, size=n_shared, p=shared_p)
            toks = np.concatenate([own, teaser, head])
            texts[doc_idx] = " ".join(toks[rng.permutation(len(toks))])
    return make_corpus(texts), labels.tolist()


class TableRetriever:
    """Neighbor provider backed by a fixed ranked table (scores descending by
    construction: rank position i gets score -i)."""

    def __init__(self, table: dict[str, list[str]]):
        self.table = table

    def retrieve(self, doc, k: int):
        ranked = self.table.get(doc.id, [])[:k]
        return [(doc_id, -float(i)) for i, doc_id in enumerate(ranked)]


class EmptyRetriever:
    def retrieve(self, doc, k: int):
        return []


def random_neighbor_table(ids: list[str], seed: int, max_neighbors: int = 5,
                          p_empty: float = 0.15) -> dict[str, list[str]]:
    """Random ranked neighbor lists (may include any document, as a real
    precomputed index would)."""
    rng = np.random.default_rng(seed)
    table = {}
    for doc_id in ids:
        if rng.random() < p_empty:
            table[doc_id] = []
            continue
        n = int(rng.integers(1, max_neighbors + 1))
        picks = rng.choice(len(ids), size=min(n, len(ids)), replace=False)
        table[doc_id] = [ids[i] for i in picks if ids[i] != doc_id]
    return table
