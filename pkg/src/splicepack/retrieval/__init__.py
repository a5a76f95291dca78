"""Neighbor providers: BM25 lexical index, IVF inner-product embedding index,
and repository-structure adjacency.

All providers share the same retrieval surface: ``retrieve(doc, k)`` returns a
ranked list of ``(doc_id, score)`` pairs, scores nonincreasing, ties broken by
doc id ascending, never containing the query document itself.
"""

from .bm25 import Bm25Index, bm25_build
from .embedding import EmbeddingIndex, embed_load, ivf_train, save_embeddings
from .repograph import RepoGraph

Neighbors = list[tuple[str, float]]

__all__ = [
    "Bm25Index",
    "bm25_build",
    "EmbeddingIndex",
    "embed_load",
    "ivf_train",
    "save_embeddings",
    "RepoGraph",
    "Neighbors",
]
