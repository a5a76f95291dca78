"""splicepack: build long-context training examples from document corpora.

The core construction grows a tree of mutually relevant documents breadth-first
from a sampled root, using a pluggable retriever (BM25, inner-product ANN over
precomputed embeddings, or repository adjacency), then flattens, orders, and
trims it to a length budget.  Companion packers (random baseline, within-domain
random, repository DFS), a weighted stream mixer, burstiness/Zipf analytics,
and a synthetic key-value retrieval task generator round out the toolkit.
"""

__version__ = "0.1.0"
