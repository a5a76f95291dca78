import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from splicepack.analysis import (
    bucket_losses,
    burstiness_report,
    length_histogram,
    zipf_coefficient,
)

from oracles import ref_ols_slope


# ----------------------------------------------------------------------- zipf


def test_all_distinct_tokens_give_zero():
    assert zipf_coefficient(list(range(50))) == 0.0


def test_equal_frequencies_give_zero():
    assert zipf_coefficient([1, 1, 2, 2, 3, 3]) == 0.0


def test_known_rank_frequency_profile():
    # frequencies (4, 2, 1): closed-form OLS over three (ln r, ln f) points
    tokens = ["a"] * 4 + ["b"] * 2 + ["c"]
    got = zipf_coefficient(tokens)
    want = -ref_ols_slope(np.log([1, 2, 3]), np.log([4, 2, 1]))
    assert got == pytest.approx(want, rel=1e-12)
    assert got == pytest.approx(1.2336, abs=5e-4)


def test_degenerate_sequence_errors():
    with pytest.raises(ValueError, match="distinct"):
        zipf_coefficient([7, 7, 7])
    with pytest.raises(ValueError, match="distinct"):
        zipf_coefficient([])


@settings(max_examples=40)
@given(st.lists(st.integers(0, 8), min_size=2, max_size=200).filter(
    lambda xs: len(set(xs)) >= 2))
def test_relabeling_invariance(tokens):
    base = zipf_coefficient(tokens)
    relabeled = [f"tok{t * 31 + 7}" for t in tokens]
    assert zipf_coefficient(relabeled) == pytest.approx(base, rel=1e-12)
    assert base >= 0.0


@given(st.lists(st.integers(0, 6), min_size=2, max_size=60).filter(
    lambda xs: len(set(xs)) >= 2), st.integers(2, 5))
def test_concatenated_copies_leave_coefficient_unchanged(tokens, m):
    assert zipf_coefficient(tokens * m) == pytest.approx(
        zipf_coefficient(tokens), rel=1e-9, abs=1e-12)


def test_matches_polyfit_oracle_on_random_windows():
    rng = np.random.default_rng(0)
    for _ in range(20):
        tokens = rng.zipf(1.7, size=400).tolist()
        if len(set(tokens)) < 2:
            continue
        freqs = sorted(np.unique(tokens, return_counts=True)[1], reverse=True)
        want = -ref_ols_slope(np.log(np.arange(1, len(freqs) + 1)), np.log(freqs))
        assert zipf_coefficient(tokens) == pytest.approx(max(0.0, want), rel=1e-10)


# ----------------------------------------------------------------- burstiness


def test_stream_shorter_than_window_errors():
    with pytest.raises(ValueError, match="shorter"):
        burstiness_report(["ab cd"], window_len=100)


def test_constant_composition_windows_have_zero_std():
    piece = "aa aa bb cc "  # 12 chars; windows align with the repetition
    report = burstiness_report([piece * 40], window_len=48)
    assert report.n_windows == 10
    assert report.std == 0.0
    assert report.mean == pytest.approx(report.coefficients[0])


def test_degenerate_windows_skipped_and_counted():
    stream = ["xx xx xx xx " * 4, "aa bb cc dd " * 4]
    report = burstiness_report(stream, window_len=48)
    assert report.skipped_degenerate == 1
    assert report.n_windows == 1


def test_all_windows_degenerate_errors():
    with pytest.raises(ValueError, match="no valid window"):
        burstiness_report(["zz zz zz zz " * 8], window_len=48)


def test_token_sequence_mode():
    seqs = [[1, 1, 2, 3] * 16, [4, 5, 6, 6] * 16]
    report = burstiness_report(seqs, window_len=32)
    assert report.n_windows == 4
    assert all(c >= 0 for c in report.coefficients)


def test_max_windows_subsample_is_seeded():
    stream = ["ab cd ef gh ij kl " * 100]
    a = burstiness_report([stream[0]], window_len=36, max_windows=10, seed=3)
    b = burstiness_report([stream[0]], window_len=36, max_windows=10, seed=3)
    assert a.coefficients == b.coefficients
    assert a.n_windows == 10


def test_thread_count_does_not_change_results():
    rng = np.random.default_rng(1)
    words = [f"w{i}" for i in range(30)]
    stream = [" ".join(rng.choice(words, size=200)) for _ in range(5)]
    a = burstiness_report(stream, window_len=100, threads=1)
    b = burstiness_report(stream, window_len=100, threads=4)
    assert a.coefficients == b.coefficients


def test_report_dict_shape():
    report = burstiness_report(["aa bb cc dd " * 10], window_len=24)
    d = report.to_dict()
    assert set(d) == {"window_len", "n_windows", "mean", "std",
                      "skipped_degenerate", "coefficients"}
    assert d["std"] == pytest.approx(float(np.std(d["coefficients"])))


# -------------------------------------------------------------------- buckets


def test_uniform_loss_means():
    records = [(p, 1.0) for p in range(0, 2000)]
    buckets = bucket_losses(records)
    for c, m in zip(buckets.counts, buckets.means):
        if c:
            assert m == pytest.approx(1.0)
    assert sum(buckets.counts) == 2000


def test_position_zero_lands_in_first_bucket():
    buckets = bucket_losses([(0, 0.5)])
    assert buckets.counts[0] == 1
    assert buckets.means[0] == 0.5
    assert buckets.boundaries()[0] == (1, 2)


def test_last_bucket_closes_at_32768():
    buckets = bucket_losses([(32767, 2.0), (32768, 3.0)])
    assert buckets.counts[-1] == 1  # 1-based 32768 still belongs to the last bucket
    assert buckets.ignored == 1     # 1-based 32769 does not
    assert buckets.boundaries()[-1] == (16384, 32768)


def test_bucket_conservation():
    rng = np.random.default_rng(2)
    records = [(int(p), float(l)) for p, l in
               zip(rng.integers(0, 50_000, size=3000), rng.normal(size=3000))]
    buckets = bucket_losses(records)
    assert sum(buckets.counts) + buckets.ignored == 3000


def test_bucket_means_match_brute_force_grouping():
    rng = np.random.default_rng(3)
    records = [(int(p), float(l)) for p, l in
               zip(rng.integers(0, 40_000, size=5000), rng.normal(size=5000))]
    buckets = bucket_losses(records)
    groups: dict[int, list[float]] = {}
    for pos, loss in records:
        q = pos + 1
        if q > 32768:
            continue
        i = 0
        while 2 ** (i + 1) <= q and i < 14:
            i += 1
        groups.setdefault(i, []).append(loss)
    for i in range(15):
        if i in groups:
            assert buckets.means[i] == pytest.approx(
                float(np.mean(groups[i])), abs=1e-12)
        else:
            assert buckets.means[i] is None


def test_nonfinite_loss_named():
    with pytest.raises(ValueError, match="record 1"):
        bucket_losses([(0, 1.0), (3, math.nan)])


def test_negative_position_rejected():
    with pytest.raises(ValueError, match="negative"):
        bucket_losses([(-1, 1.0)])


# ------------------------------------------------------------------ histogram


def test_histogram_empty():
    hist = length_histogram([], [0, 10, 20])
    assert hist.counts == [0, 0]
    assert hist.below == hist.above == 0


def test_histogram_direct_binning():
    hist = length_histogram([5, 15], [0, 10, 20])
    assert hist.counts == [1, 1]


def test_histogram_out_of_range_counted():
    hist = length_histogram([-5, 5, 25], [0, 10, 20])
    assert hist.counts == [1, 0]
    assert hist.below == 1 and hist.above == 1


def test_histogram_matches_brute_force():
    rng = np.random.default_rng(4)
    values = rng.integers(0, 1000, size=10_000).tolist()
    edges = [0, 100, 250, 500, 999]
    hist = length_histogram(values, edges)
    brute = [0] * (len(edges) - 1)
    below = above = 0
    for v in values:
        if v < edges[0]:
            below += 1
        elif v > edges[-1]:
            above += 1
        else:
            for i in range(len(edges) - 1):
                # last bin is closed on the right, like numpy's histogram
                hi_ok = v <= edges[i + 1] if i == len(edges) - 2 else v < edges[i + 1]
                if edges[i] <= v and hi_ok:
                    brute[i] += 1
                    break
    assert hist.counts == brute
    assert hist.below == below and hist.above == above
    assert sum(hist.counts) + below + above == len(values)


def test_histogram_rejects_bad_edges():
    with pytest.raises(ValueError, match="increasing"):
        length_histogram([1], [0, 0, 5])
    with pytest.raises(ValueError, match="increasing"):
        length_histogram([1], [3])
