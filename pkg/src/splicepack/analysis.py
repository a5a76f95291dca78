"""Corpus and stream statistics: Zipf coefficient of token frequency over
context windows (burstiness), power-of-two position bucketing of per-token
losses, and length histograms.

The Zipf coefficient of a window is the negated slope of an ordinary
least-squares fit to (ln rank, ln frequency) of its token counts, rank 1 being
the most frequent token.  Flatter windows (more mass on rare tokens) score
lower.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np

from .lexical import tokenize
from .util import parallel_map

MAX_BUCKET_POSITION = 32_768  # 1-based; buckets [2^i, 2^(i+1)) for i = 0..14
N_BUCKETS = 15


def zipf_coefficient(tokens: Sequence[Hashable]) -> float:
    """Negated OLS slope of log frequency versus log rank."""
    counts = Counter(tokens)
    if len(counts) < 2:
        raise ValueError("need at least 2 distinct tokens for a rank-frequency fit")
    freqs = np.asarray(sorted(counts.values(), reverse=True), dtype=np.float64)
    if freqs[0] == freqs[-1]:
        return 0.0  # flat distribution, exactly zero slope
    x = np.log(np.arange(1, len(freqs) + 1, dtype=np.float64))
    y = np.log(freqs)
    dx = x - x.mean()
    slope = float((dx * (y - y.mean())).sum() / (dx * dx).sum())
    # frequencies are sorted, so the true slope is <= 0; clamp rounding noise
    return max(0.0, -slope)


@dataclass
class ZipfReport:
    window_len: int
    coefficients: list[float]
    skipped_degenerate: int

    @property
    def n_windows(self) -> int:
        return len(self.coefficients)

    @property
    def mean(self) -> float:
        if self.coefficients[0] == max(self.coefficients) == min(self.coefficients):
            return self.coefficients[0]
        return float(np.mean(self.coefficients))

    @property
    def std(self) -> float:
        # population std, not sample; identical coefficients are exactly zero
        # spread (a float mean would inject last-ulp noise)
        if self.coefficients[0] == max(self.coefficients) == min(self.coefficients):
            return 0.0
        return float(np.std(self.coefficients))

    def to_dict(self) -> dict:
        return {
            "window_len": self.window_len,
            "n_windows": self.n_windows,
            "mean": self.mean,
            "std": self.std,
            "skipped_degenerate": self.skipped_degenerate,
            "coefficients": self.coefficients,
        }


def _carve_windows(pieces: Iterable, window_len: int) -> list:
    """Consecutive non-overlapping windows of the concatenated stream; the
    trailing partial window is discarded.  Works for strings and sequences."""
    windows = []
    parts: list = []
    size = 0
    empty = None
    for piece in pieces:
        if empty is None:
            empty = "" if isinstance(piece, str) else []
        parts.append(piece if isinstance(piece, str) else list(piece))
        size += len(piece)
        if size >= window_len:
            blob = ("".join(parts) if isinstance(empty, str)
                    else [t for chunk in parts for t in chunk])
            off = 0
            while off + window_len <= len(blob):
                windows.append(blob[off:off + window_len])
                off += window_len
            parts = [blob[off:]]
            size = len(blob) - off
    return windows


def burstiness_report(pieces: Iterable, window_len: int, max_windows: int | None = None,
                      seed: int = 0, threads: int = 1) -> ZipfReport:
    """Zipf-coefficient statistics over windows of a materialized stream.

    ``pieces`` is an iterable of strings (char mode: windows are cut by
    character and tokenized with the shared lexical tokenizer) or of token-id
    sequences (windows are cut by token).  When more windows exist than
    ``max_windows``, a seeded uniform subset is evaluated, in window order.
    """
    if window_len < 1:
        raise ValueError("window_len must be >= 1")
    windows = _carve_windows(pieces, window_len)
    if not windows:
        raise ValueError(f"stream shorter than one {window_len}-unit window")
    if max_windows is not None and len(windows) > max_windows:
        rng = np.random.default_rng(seed)
        keep = np.sort(rng.choice(len(windows), size=max_windows, replace=False))
        windows = [windows[i] for i in keep]

    def coeff(window) -> float | None:
        toks = tokenize(window) if isinstance(window, str) else window
        if len(set(toks)) < 2:
            return None
        return zipf_coefficient(toks)

    results = parallel_map(coeff, windows, threads)
    coefficients = [c for c in results if c is not None]
    skipped = len(results) - len(coefficients)
    if not coefficients:
        raise ValueError("no valid window: every window was degenerate")
    return ZipfReport(window_len=window_len, coefficients=coefficients,
                      skipped_degenerate=skipped)


@dataclass
class BucketedLosses:
    """Mean loss per power-of-two position bucket, 1-based positions."""

    counts: list[int]
    means: list[float | None]
    ignored: int

    @staticmethod
    def boundaries() -> list[tuple[int, int]]:
        return [(2**i, 2**(i + 1)) for i in range(N_BUCKETS)]

    def to_dict(self) -> dict:
        return {
            "buckets": [
                {"lo": lo, "hi": hi, "count": c, "mean_loss": m}
                for (lo, hi), c, m in zip(self.boundaries(), self.counts, self.means)
            ],
            "ignored_beyond_max": self.ignored,
        }


def bucket_losses(records: Iterable[tuple[int, float]]) -> BucketedLosses:
    """Group (0-based position, loss) records into buckets [2^i, 2^(i+1)) of
    1-based position, i = 0..14; the last bucket closes at 32768 inclusive.
    Positions beyond that are ignored (counted)."""
    counts = [0] * N_BUCKETS
    sums = [0.0] * N_BUCKETS
    ignored = 0
    for idx, (pos, loss) in enumerate(records):
        if pos < 0:
            raise ValueError(f"record {idx}: negative position {pos}")
        if not np.isfinite(loss):
            raise ValueError(f"record {idx}: non-finite loss {loss!r}")
        q = pos + 1
        if q > MAX_BUCKET_POSITION:
            ignored += 1
            continue
        bucket = min(q.bit_length() - 1, N_BUCKETS - 1)
        counts[bucket] += 1
        sums[bucket] += float(loss)
    means = [s / c if c else None for s, c in zip(sums, counts)]
    return BucketedLosses(counts=counts, means=means, ignored=ignored)


@dataclass
class LengthHistogram:
    edges: list[float]
    counts: list[int]
    below: int
    above: int

    def to_dict(self) -> dict:
        return {"edges": self.edges, "counts": self.counts,
                "below": self.below, "above": self.above}


def length_histogram(lengths: Iterable[float], edges: Sequence[float]) -> LengthHistogram:
    """Counts per [edge, next) bin (last bin closed), plus out-of-range
    counts, so totals always equal the item count."""
    edges = list(edges)
    if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValueError("bin edges must be strictly increasing, at least two")
    values = np.asarray(list(lengths), dtype=np.float64)
    if len(values) == 0:
        return LengthHistogram(edges, [0] * (len(edges) - 1), 0, 0)
    counts, _ = np.histogram(values, bins=edges)
    below = int((values < edges[0]).sum())
    above = int((values > edges[-1]).sum())
    return LengthHistogram(edges, counts.tolist(), below, above)
