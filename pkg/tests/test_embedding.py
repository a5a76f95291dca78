import numpy as np
import pytest

from splicepack.retrieval.embedding import (
    EmbeddingIndex,
    embed_load,
    ivf_train,
    save_embeddings,
)

from oracles import ref_exhaustive_ip_topk


def rand_index(n, dim, seed, ids=None):
    rng = np.random.default_rng(seed)
    vectors = rng.normal(size=(n, dim)).astype(np.float32)
    return EmbeddingIndex(vectors, ids or [f"v{i:05d}" for i in range(n)])


def two_clusters(n_per, dim, seed, gap=25.0):
    """Well-separated clusters along opposite axes; labels 0/1."""
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n_per, dim)) * 0.1
    b = rng.normal(size=(n_per, dim)) * 0.1
    a[:, 0] += gap
    b[:, 1] += gap
    vectors = np.vstack([a, b]).astype(np.float32)
    ids = [f"v{i:05d}" for i in range(2 * n_per)]
    labels = [0] * n_per + [1] * n_per
    return EmbeddingIndex(vectors, ids), labels


# -------------------------------------------------------------- file format


def test_embed_roundtrip_bitwise(tmp_path):
    rng = np.random.default_rng(0)
    vectors = rng.normal(size=(17, 5)).astype(np.float32)
    ids = [f"doc-{i}" for i in range(17)]
    p = tmp_path / "emb.bin"
    save_embeddings(p, vectors, ids)
    index = embed_load(p)
    assert index.dim == 5 and index.n_docs == 17
    assert index.ids == ids
    assert np.array_equal(index.vectors, vectors)


def test_embed_header_echo(tmp_path):
    vectors = np.arange(8, dtype=np.float32).reshape(2, 4)
    p = tmp_path / "emb.bin"
    save_embeddings(p, vectors, ["a", "b"])
    index = embed_load(p)
    assert index.dim == 4 and index.n_docs == 2


def test_embed_truncated_file_errors(tmp_path):
    vectors = np.zeros((4, 3), dtype=np.float32)
    p = tmp_path / "emb.bin"
    save_embeddings(p, vectors, ["a", "b", "c", "d"])
    raw = p.read_bytes()
    p.write_bytes(raw[:len(raw) // 2])
    with pytest.raises(ValueError, match="truncated"):
        embed_load(p)


def test_embed_bad_magic(tmp_path):
    p = tmp_path / "emb.bin"
    p.write_bytes(b"WRONGMAG" + b"\x00" * 40)
    with pytest.raises(ValueError, match="bad magic"):
        embed_load(p)


def test_embed_nonfinite_row_named(tmp_path):
    vectors = np.zeros((3, 2), dtype=np.float32)
    vectors[1, 0] = np.nan
    p = tmp_path / "emb.bin"
    save_embeddings(p, vectors, ["a", "b", "c"])
    with pytest.raises(ValueError, match="row 1"):
        embed_load(p)


# ------------------------------------------------------------------ training


def test_kmeans_single_centroid_is_mean():
    index = rand_index(200, 8, seed=1)
    ivf_train(index, nlist=1, train_sample=10_000, seed=0)
    mean = index.vectors.astype(np.float64).mean(axis=0)
    assert np.allclose(index.centroids[0], mean, rtol=1e-12, atol=1e-12)
    assert np.all(index.assignment == 0)


def test_paper_default_parameters_accepted():
    # nlist=8192 needs that many distinct vectors; train_sample=262144
    # exceeds the corpus, so the whole set is used
    index = rand_index(8300, 4, seed=2)
    ivf_train(index, nlist=8192, train_sample=262_144, seed=0)
    assert index.nlist == 8192
    assert index.train_sample == 262_144
    assert len(index._cells) == 8192


def test_two_clusters_recovered_against_assignment_oracle():
    index, labels = two_clusters(150, 6, seed=3)
    ivf_train(index, nlist=2, train_sample=10_000, seed=0)
    # brute-force assignment check: each vector belongs to its argmax centroid
    sims = index.vectors.astype(np.float64) @ index.centroids.T
    assert np.array_equal(index.assignment, np.argmax(sims, axis=1))
    # the two cells partition the points exactly along the true labels
    cells = [set(np.flatnonzero(index.assignment == c)) for c in range(2)]
    true = [set(i for i, l in enumerate(labels) if l == 0),
            set(i for i, l in enumerate(labels) if l == 1)]
    assert cells in ([true[0], true[1]], [true[1], true[0]])


def test_nlist_exceeding_distinct_vectors_errors():
    vectors = np.tile(np.array([[1.0, 0.0], [0.0, 1.0]], dtype=np.float32), (5, 1))
    index = EmbeddingIndex(vectors, [f"v{i}" for i in range(10)])
    with pytest.raises(ValueError, match="distinct"):
        ivf_train(index, nlist=3, train_sample=100, seed=0)


def test_train_deterministic():
    a = rand_index(300, 8, seed=5)
    b = rand_index(300, 8, seed=5)
    ivf_train(a, nlist=8, train_sample=128, seed=42)
    ivf_train(b, nlist=8, train_sample=128, seed=42)
    assert np.array_equal(a.centroids, b.centroids)
    assert np.array_equal(a.assignment, b.assignment)


def test_train_subsample_unused_for_small_corpus():
    index = rand_index(50, 4, seed=6)
    ivf_train(index, nlist=4, train_sample=1_000_000, seed=0)
    assert index.trained


# ------------------------------------------------------------------- queries


def test_full_probe_equals_exhaustive():
    index = rand_index(400, 16, seed=7)
    ivf_train(index, nlist=16, train_sample=400, seed=0)
    for qi in [0, 13, 200, 399]:
        got = index.query(index.ids[qi], 10, nprobe=16)
        want = ref_exhaustive_ip_topk(index.vectors, index.ids, qi, 10)
        assert [g[0] for g in got] == [w[0] for w in want]
        for (_, gs), (_, ws) in zip(got, want):
            assert gs == pytest.approx(ws, rel=1e-12)


def test_single_probe_stays_in_own_cluster():
    index, labels = two_clusters(100, 6, seed=8)
    ivf_train(index, nlist=2, train_sample=10_000, seed=0)
    got = index.query(index.ids[3], 20, nprobe=1)  # query from cluster 0
    mine = {index.ids[i] for i, l in enumerate(labels) if l == 0}
    assert got and all(doc_id in mine for doc_id, _ in got)


def test_k_saturation_returns_all_others():
    index = rand_index(12, 4, seed=9)
    ivf_train(index, nlist=2, train_sample=12, seed=0)
    got = index.query(index.ids[0], 100, nprobe=2)
    assert len(got) == 11
    assert index.ids[0] not in {doc_id for doc_id, _ in got}


def test_recall_nondecreasing_in_nprobe():
    index = rand_index(600, 12, seed=10)
    nlist = 8
    ivf_train(index, nlist=nlist, train_sample=600, seed=0)
    queries = index.ids[:40]
    exact = {q: {d for d, _ in index.query(q, 10, nprobe=nlist)} for q in queries}
    prev = -1.0
    probes = [1, 2, 4, 8]
    for nprobe in probes:
        hits = 0
        for q in queries:
            got = {d for d, _ in index.query(q, 10, nprobe=nprobe)}
            hits += len(got & exact[q])
        recall = hits / (10 * len(queries))
        assert recall >= prev
        prev = recall
    assert prev == 1.0


def test_exact_ties_break_by_id():
    # integer-valued vectors make inner products exact
    vectors = np.array([[2, 0], [1, 1], [1, 1], [0, 2]], dtype=np.float32)
    index = EmbeddingIndex(vectors, ["q", "zz", "aa", "far"])
    ivf_train(index, nlist=1, train_sample=10, seed=0)
    got = index.query("q", 2, nprobe=1)
    assert [g[0] for g in got] == ["aa", "zz"]


def test_query_errors():
    index = rand_index(20, 4, seed=11)
    with pytest.raises(ValueError, match="not trained"):
        index.query("v00000", 3)
    ivf_train(index, nlist=4, train_sample=20, seed=0)
    with pytest.raises(ValueError, match="unknown query id"):
        index.query("ghost", 3)
    with pytest.raises(ValueError, match="nprobe"):
        index.query("v00000", 3, nprobe=5)
    with pytest.raises(ValueError, match="k must be"):
        index.query("v00000", 0)


def test_trained_roundtrip(tmp_path):
    index = rand_index(100, 8, seed=12)
    ivf_train(index, nlist=4, train_sample=64, seed=3)
    p = tmp_path / "idx.ivf"
    index.save_trained(p)
    loaded = EmbeddingIndex.load_trained(p)
    assert loaded.nlist == 4
    assert np.array_equal(loaded.centroids, index.centroids)
    for qi in ["v00000", "v00050"]:
        assert loaded.query(qi, 5, nprobe=2) == index.query(qi, 5, nprobe=2)
