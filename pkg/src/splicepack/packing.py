"""Packers that turn a corpus into length-bounded training examples.

``splice_pack_*`` implements the retrieval-driven construction: grow a tree
breadth-first from a root document, appending the top-k unconsumed neighbors
of each expanded document, until the queue drains or the accumulated length
reaches the budget; then flatten, apply the configured ordering, and trim to
the budget.  Baseline packers (random concatenation, within-domain random,
repository DFS) share the same trim semantics and consumption bookkeeping:
every document is consumed exactly once per run.
"""

from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator, Protocol

import numpy as np

from .corpus import CHARS, Corpus, Document
from .retrieval.repograph import RepoGraph
from .util import derive_seed

METHODS = ("splice", "baseline", "domrnd", "repo")
ORDERS = ("identity", "reverse", "shuffle")

DEFAULT_DOMRND_CHAR_BOUND = 120_000


class NeighborProvider(Protocol):
    def retrieve(self, doc: Document, k: int) -> list[tuple[str, float]]: ...


@dataclass(frozen=True)
class PackingConfig:
    """Hyperparameters of one packing run."""

    method: str
    L: int
    k: int = 1
    order: str = "identity"
    seed: int = 0
    domrnd_char_bound: int = DEFAULT_DOMRND_CHAR_BOUND

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.order not in ORDERS:
            raise ValueError(f"unknown order {self.order!r}; expected one of {ORDERS}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.L < 1:
            raise ValueError("L must be >= 1")
        if self.domrnd_char_bound < 1:
            raise ValueError("domrnd_char_bound must be >= 1")


@dataclass(frozen=True)
class Segment:
    """A (possibly truncated) slice of one document inside an example."""

    doc_id: str
    offset: int
    len: int
    truncated: bool


@dataclass
class PackedExample:
    segments: list[Segment]
    total_len: int
    root_id: str
    tree_edges: list[tuple[str, str]]
    order_applied: str
    seed: int
    method: str

    def consumed_ids(self) -> list[str]:
        """Every document this example consumed, including any the final trim
        dropped: the tree nodes when a tree exists, else the segments."""
        if self.tree_edges:
            return [self.root_id] + [child for _, child in self.tree_edges]
        if self.segments and self.segments[0].doc_id == self.root_id:
            return [seg.doc_id for seg in self.segments]
        return [self.root_id]


@dataclass
class PackStats:
    examples: int = 0
    consumed_docs: int = 0
    discarded_len: int = 0
    total_len: int = 0

    @property
    def mean_len(self) -> float:
        return self.total_len / self.examples if self.examples else 0.0

    def to_dict(self) -> dict:
        return {
            "examples": self.examples,
            "consumed_docs": self.consumed_docs,
            "discarded_len": self.discarded_len,
            "mean_len": self.mean_len,
        }


def order_doc_ids(doc_ids: list[str], order: str, seed: int | None = None) -> list[str]:
    """Apply the configured final ordering to the flattened tree."""
    if order == "identity":
        return list(doc_ids)
    if order == "reverse":
        return list(reversed(doc_ids))
    if order == "shuffle":
        if seed is None:
            raise ValueError("shuffle ordering requires a seed")
        out = list(doc_ids)
        random.Random(seed).shuffle(out)
        return out
    raise ValueError(f"unknown order {order!r}")


def trim(ordered_docs: list[tuple[str, int]], L: int) -> list[Segment]:
    """Accumulate whole documents until the next would overflow ``L``; that
    document becomes a prefix segment filling exactly to ``L`` (when any
    budget remains) and everything after it is dropped."""
    if L < 1:
        raise ValueError("L must be >= 1")
    segments: list[Segment] = []
    acc = 0
    for doc_id, length in ordered_docs:
        if acc + length <= L:
            segments.append(Segment(doc_id, 0, length, False))
            acc += length
            continue
        budget = L - acc
        if budget > 0:
            segments.append(Segment(doc_id, 0, budget, True))
        break
    return segments


def splice_pack_one(corpus: Corpus, retriever: NeighborProvider,
                    config: PackingConfig, root_id: str) -> PackedExample:
    """Build one example: breadth-first neighbor expansion from ``root_id``.

    Each popped document contributes its top-k neighbors; neighbors already
    consumed are skipped, accepted ones are appended, queued, and consumed.
    Expansion stops once the queue is empty or the accumulated length reaches
    the budget (the round in flight may overshoot; trim absorbs it).  Trimmed
    documents stay consumed.
    """
    if config.method != "splice":
        raise ValueError(f"splice_pack_one requires method 'splice', got {config.method!r}")
    root_ord = corpus.ordinal(root_id)
    if corpus.consumed[root_ord]:
        raise ValueError(f"root document {root_id!r} already consumed")
    corpus.consumed[root_ord] = True
    collected = [root_id]
    total = corpus.doc_length(root_ord)
    queue: deque[str] = deque([root_id])
    edges: list[tuple[str, str]] = []
    while queue and total < config.L:
        parent_id = queue.popleft()
        for child_id, _score in retriever.retrieve(corpus.get(parent_id), config.k):
            child_ord = corpus.ordinal(child_id)
            if corpus.consumed[child_ord]:
                continue
            corpus.consumed[child_ord] = True
            collected.append(child_id)
            queue.append(child_id)
            edges.append((parent_id, child_id))
            total += corpus.doc_length(child_ord)
    ex_seed = derive_seed(config.seed, "order", root_id)
    ordered = order_doc_ids(collected, config.order, ex_seed)
    segments = trim([(i, corpus.length_of(i)) for i in ordered], config.L)
    return PackedExample(
        segments=segments,
        total_len=sum(s.len for s in segments),
        root_id=root_id,
        tree_edges=edges,
        order_applied=config.order,
        seed=ex_seed,
        method="splice",
    )


def splice_pack_all(corpus: Corpus, retriever: NeighborProvider,
                    config: PackingConfig) -> Iterator[PackedExample]:
    """Pack the whole corpus: roots come from a seeded uniform permutation,
    skipping documents an earlier tree already consumed."""
    if config.method != "splice":
        raise ValueError(f"splice_pack_all requires method 'splice', got {config.method!r}")
    _require_fresh(corpus)
    perm = np.random.default_rng(derive_seed(config.seed, "roots")).permutation(len(corpus))
    for ordinal in perm:
        if corpus.consumed[ordinal]:
            continue
        yield splice_pack_one(corpus, retriever, config, corpus.documents[ordinal].id)


def _require_fresh(corpus: Corpus) -> None:
    if corpus.any_consumed():
        raise ValueError(
            "corpus already partially consumed; call reset_consumption() before packing")


def _greedy_stream(corpus: Corpus, ordinals: Iterable[int], L: int, seed: int,
                   method: str, length_of: Callable[[int], int]) -> Iterator[PackedExample]:
    """Fill examples to ``L`` in order with trim semantics; no provenance tree."""
    cur: list[Segment] = []
    acc = 0

    def flush() -> PackedExample:
        nonlocal cur, acc
        ex = PackedExample(
            segments=cur,
            total_len=sum(s.len for s in cur),
            root_id=cur[0].doc_id,
            tree_edges=[],
            order_applied="identity",
            seed=seed,
            method=method,
        )
        cur, acc = [], 0
        return ex

    for ordinal in ordinals:
        doc_id = corpus.documents[ordinal].id
        length = length_of(ordinal)
        while True:
            if acc + length <= L:
                corpus.consumed[ordinal] = True
                cur.append(Segment(doc_id, 0, length, False))
                acc += length
                break
            budget = L - acc
            if budget > 0:
                corpus.consumed[ordinal] = True
                cur.append(Segment(doc_id, 0, budget, True))
                acc = L
                yield flush()
                break
            yield flush()  # example exactly full; retry the doc in a fresh one
    if cur:
        yield flush()


def baseline_pack(corpus: Corpus, L: int, seed: int = 0) -> Iterator[PackedExample]:
    """Random example packing: seeded permutation, greedily filled to ``L``."""
    if L < 1:
        raise ValueError("L must be >= 1")
    _require_fresh(corpus)
    perm = np.random.default_rng(derive_seed(seed, "baseline")).permutation(len(corpus))
    yield from _greedy_stream(corpus, perm, L, seed, "baseline", corpus.doc_length)


def domrnd_pack(corpus: Corpus, seed: int = 0,
                char_bound: int = DEFAULT_DOMRND_CHAR_BOUND) -> Iterator[PackedExample]:
    """Within-domain random concatenation of whole documents (no truncation),
    bounded by ``char_bound`` characters; an oversized document stands alone.

    Bounds are measured in characters, so the corpus must use char lengths.
    """
    if char_bound < 1:
        raise ValueError("char_bound must be >= 1")
    if corpus.length_unit != CHARS:
        raise ValueError("domrnd packs by characters; corpus must use char lengths")
    _require_fresh(corpus)
    by_domain: dict[str, list[int]] = {}
    for i, doc in enumerate(corpus):
        if doc.domain is None:
            raise ValueError(f"document {doc.id!r} has no domain tag")
        by_domain.setdefault(doc.domain, []).append(i)

    for domain in sorted(by_domain):
        ordinals = by_domain[domain]
        random.Random(derive_seed(seed, "domrnd", domain)).shuffle(ordinals)
        cur: list[Segment] = []
        acc = 0
        for ordinal in ordinals:
            doc = corpus.documents[ordinal]
            if cur and acc + doc.char_len > char_bound:
                yield _whole_doc_example(cur, acc, seed)
                cur, acc = [], 0
            corpus.consumed[ordinal] = True
            cur.append(Segment(doc.id, 0, doc.char_len, False))
            acc += doc.char_len
        if cur:
            yield _whole_doc_example(cur, acc, seed)


def _whole_doc_example(segments: list[Segment], total: int, seed: int) -> PackedExample:
    return PackedExample(
        segments=segments,
        total_len=total,
        root_id=segments[0].doc_id,
        tree_edges=[],
        order_applied="identity",
        seed=seed,
        method="domrnd",
    )


def repo_pack(corpus: Corpus, graph: RepoGraph, L: int) -> Iterator[PackedExample]:
    """Concatenate each repository chunk in depth-first order, cut to ``L``."""
    if L < 1:
        raise ValueError("L must be >= 1")
    _require_fresh(corpus)
    for tag in graph.chunk_tags():
        ordinals = [corpus.ordinal(doc_id) for doc_id in graph.chunks[tag]]
        for ex in _greedy_stream(corpus, ordinals, L, 0, "repo", corpus.doc_length):
            yield ex


def pack_stats(examples: Iterable[PackedExample], corpus: Corpus) -> PackStats:
    stats = PackStats()
    for ex in examples:
        consumed = ex.consumed_ids()
        stats.examples += 1
        stats.consumed_docs += len(consumed)
        stats.total_len += ex.total_len
        stats.discarded_len += sum(corpus.length_of(i) for i in consumed) - ex.total_len
    return stats


def materialize_example(example: PackedExample, corpus: Corpus) -> str:
    """Concatenated segment texts.  Truncated segments slice by characters,
    which requires the corpus to be in char mode."""
    parts = []
    for seg in example.segments:
        doc = corpus.get(seg.doc_id)
        if not seg.truncated and seg.offset == 0:
            parts.append(doc.text)
        elif corpus.length_unit == CHARS:
            parts.append(doc.text[seg.offset:seg.offset + seg.len])
        else:
            raise ValueError(
                f"cannot materialize truncated segment of {seg.doc_id!r} in token mode")
    return "".join(parts)


def example_to_dict(example: PackedExample) -> dict:
    return {
        "segments": [
            {"id": s.doc_id, "offset": s.offset, "len": s.len, "truncated": s.truncated}
            for s in example.segments
        ],
        "total_len": example.total_len,
        "root": example.root_id,
        "edges": [[p, c] for p, c in example.tree_edges],
        "method": example.method,
        "order": example.order_applied,
        "seed": example.seed,
    }


def example_from_dict(rec: dict) -> PackedExample:
    return PackedExample(
        segments=[Segment(s["id"], s["offset"], s["len"], s["truncated"])
                  for s in rec["segments"]],
        total_len=rec["total_len"],
        root_id=rec["root"],
        tree_edges=[(p, c) for p, c in rec["edges"]],
        order_applied=rec["order"],
        seed=rec["seed"],
        method=rec["method"],
    )


def write_packed(examples: Iterable[PackedExample], corpus: Corpus, path: str | Path,
                 materialize: bool = False) -> PackStats:
    """Stream examples to JSONL, collecting run statistics as they pass."""
    stats = PackStats()
    with open(path, "w", encoding="utf-8") as f:
        for ex in examples:
            rec = example_to_dict(ex)
            if materialize:
                rec["text"] = materialize_example(ex, corpus)
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")
            consumed = ex.consumed_ids()
            stats.examples += 1
            stats.consumed_docs += len(consumed)
            stats.total_len += ex.total_len
            stats.discarded_len += sum(corpus.length_of(i) for i in consumed) - ex.total_len
    return stats


def read_packed(path: str | Path) -> Iterator[PackedExample]:
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                yield example_from_dict(json.loads(line))
