"""Repository-structure adjacency: neighbors are the files that follow a
document in its chunk's depth-first directory order."""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from ..corpus import Corpus, Document


def _dfs_key(path: str) -> tuple[str, ...]:
    # sorting by path components reproduces a depth-first walk that visits
    # directory entries (files and subdirectories alike) lexicographically
    return tuple(path.split("/"))


class RepoGraph:
    """Per-chunk file ordering derived from document paths and chunk tags."""

    def __init__(self, chunks: dict[str, list[str]]):
        self.chunks = chunks
        self._pos: dict[str, tuple[str, int]] = {}
        for tag, doc_ids in chunks.items():
            for i, doc_id in enumerate(doc_ids):
                self._pos[doc_id] = (tag, i)

    @classmethod
    def from_corpus(cls, corpus: "Corpus") -> "RepoGraph":
        """Group documents by chunk tag (domain) and order each chunk
        depth-first.  Documents need path and domain metadata, as produced by
        the repo-tree ingester."""
        grouped: dict[str, list[tuple[tuple[str, ...], str]]] = {}
        for doc in corpus:
            if doc.path is None or doc.domain is None:
                raise ValueError(
                    f"document {doc.id!r} lacks path/domain metadata required for a repo graph")
            grouped.setdefault(doc.domain, []).append((_dfs_key(doc.path), doc.id))
        chunks = {tag: [doc_id for _, doc_id in sorted(members)]
                  for tag, members in grouped.items()}
        return cls(chunks)

    def chunk_tags(self) -> list[str]:
        return sorted(self.chunks)

    def position(self, doc_id: str) -> tuple[str, int]:
        if doc_id not in self._pos:
            raise ValueError(f"document {doc_id!r} not in repo graph")
        return self._pos[doc_id]

    def neighbors(self, doc: "Document", k: int) -> list[tuple[str, float]]:
        """The next ``k`` files after ``doc`` in its chunk; score is the
        negated distance in the ordering.  Empty at the end of a chunk."""
        if k < 1:
            raise ValueError("k must be >= 1")
        if doc.path is None:
            raise ValueError(f"document {doc.id!r} has no path")
        tag, pos = self.position(doc.id)
        following = self.chunks[tag][pos + 1:pos + 1 + k]
        return [(doc_id, -float(i + 1)) for i, doc_id in enumerate(following)]

    retrieve = neighbors
