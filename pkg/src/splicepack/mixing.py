"""Weighted interleaving of packed-example streams, plus the BOS/EOS
separator policy for materialized token streams.

The mixer is a deterministic deficit scheduler: each step emits from the
stream whose cumulative emitted length divided by its target weight is
smallest (ties by name), which keeps every stream's realized share within one
example length of its target at every prefix.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .lexical import tokenize
from .packing import PackedExample

log = logging.getLogger("splicepack.mixing")

SEPARATORS = ("none", "bos_eos")
METERS = ("length", "examples")


@dataclass(frozen=True)
class MixtureSpec:
    parts: list[tuple[str, float]]
    seed: int = 0
    separator: str = "none"
    bos_id: int | None = None
    eos_id: int | None = None
    meter: str = "length"

    def __post_init__(self):
        if not self.parts:
            raise ValueError("empty mixture spec")
        names = [name for name, _ in self.parts]
        if len(set(names)) != len(names):
            raise ValueError("duplicate stream names in mixture spec")
        for name, weight in self.parts:
            if weight <= 0:
                raise ValueError(f"stream {name!r} has non-positive weight {weight}")
        total = sum(w for _, w in self.parts)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"mixture weights sum to {total}, expected 1.0")
        if self.separator not in SEPARATORS:
            raise ValueError(f"unknown separator policy {self.separator!r}")
        if self.separator == "bos_eos" and (self.bos_id is None or self.eos_id is None):
            raise ValueError("bos_eos separator requires bos_id and eos_id")
        if self.meter not in METERS:
            raise ValueError(f"unknown meter {self.meter!r}; expected one of {METERS}")


def load_mixture_spec(path: str | Path) -> tuple[MixtureSpec, dict[str, str]]:
    """Read a mixture spec file; returns the spec and the stream name → path map."""
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    parts = [(p["name"], float(p["weight"])) for p in raw["parts"]]
    paths = {p["name"]: p["path"] for p in raw["parts"]}
    spec = MixtureSpec(
        parts=parts,
        seed=int(raw.get("seed", 0)),
        separator=raw.get("separator", "none"),
        bos_id=raw.get("bos_id"),
        eos_id=raw.get("eos_id"),
        meter=raw.get("meter", "length"),
    )
    return spec, paths


def mix(spec: MixtureSpec,
        streams: dict[str, Iterable[PackedExample]]) -> Iterator[tuple[str, PackedExample]]:
    """Interleave the named streams; yields (stream name, example).

    Exhausted streams drop out with a warning; everything supplied is emitted
    exactly once.
    """
    for name, _ in spec.parts:
        if name not in streams:
            raise ValueError(f"mixture names stream {name!r} but none was supplied")
    weights = dict(spec.parts)
    iters = {name: iter(streams[name]) for name, _ in spec.parts}
    emitted = {name: 0 for name in iters}
    active = sorted(iters)
    while active:
        name = min(active, key=lambda s: (emitted[s] / weights[s], s))
        try:
            example = next(iters[name])
        except StopIteration:
            log.warning("stream %r exhausted; remaining weight redistributes", name)
            active.remove(name)
            continue
        emitted[name] += example.total_len if spec.meter == "length" else 1
        yield name, example


@dataclass
class SeparatorCounts:
    bos: int = 0
    eos: int = 0
    examples: int = 0

    def to_dict(self) -> dict:
        return {"bos": self.bos, "eos": self.eos, "examples": self.examples}


def emit_separated(stream: Iterable[Sequence[int]], spec: MixtureSpec,
                   counts: SeparatorCounts | None = None) -> Iterator[list[int]]:
    """Frame each materialized example with BOS ... EOS so that consecutive
    examples are separated by an EOS-then-BOS pair, with a leading BOS and a
    trailing EOS.  ``separator="none"`` passes tokens through untouched.

    ``counts``, when given, accumulates the separator report as the stream is
    drained.
    """
    if counts is None:
        counts = SeparatorCounts()
    if spec.separator == "none":
        for toks in stream:
            counts.examples += 1
            yield list(toks)
        return
    bos, eos = spec.bos_id, spec.eos_id
    if bos is None or eos is None:
        raise ValueError("bos_eos separator requires bos_id and eos_id")
    for toks in stream:
        counts.examples += 1
        counts.bos += 1
        counts.eos += 1
        yield [bos, *toks, eos]


class SurrogateVocab:
    """Deterministic stand-in token ids for char-mode streams: lexical terms
    numbered by first appearance, starting above the reserved special ids."""

    def __init__(self, reserved: Iterable[int] = ()):
        self._ids: dict[str, int] = {}
        self._next = max(list(reserved) + [-1]) + 1

    def encode(self, text: str) -> list[int]:
        out = []
        for term in tokenize(text):
            tid = self._ids.get(term)
            if tid is None:
                tid = self._ids[term] = self._next
                self._next += 1
            out.append(tid)
        return out

    def __len__(self) -> int:
        return len(self._ids)
