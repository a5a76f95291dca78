"""Small shared helpers: seed derivation, hashing, ordered parallel mapping."""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

MASK63 = (1 << 63) - 1


def derive_seed(base: int, *salts: object) -> int:
    """Derive a child seed from a base seed plus arbitrary salt values.

    Hash-based so the result is stable across platforms and Python versions;
    every stream of randomness in the toolkit is keyed this way off one seed.
    """
    payload = repr((int(base),) + tuple(str(s) for s in salts)).encode("utf-8")
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "little") & MASK63


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def parallel_map(fn: Callable[[T], R], items: Sequence[T] | Iterable[T], threads: int = 1) -> list[R]:
    """Map ``fn`` over ``items`` preserving order; results are identical for
    any thread count."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
