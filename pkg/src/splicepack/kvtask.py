"""Synthetic key-value retrieval prompts for probing mid-context recall.

Each task is a JSON dictionary of UUID key/value pairs followed by one query
key; the model under test should complete the matching value.  All UUIDs come
from the task seed, so suites are reproducible byte for byte.
"""

from __future__ import annotations

import json
import random
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .util import derive_seed, parallel_map

INSTRUCTION = "Extract the value corresponding to the specified key in the JSON object below."


@dataclass(frozen=True)
class KvTask:
    prompt: str
    query_key: str
    answer: str
    n_pairs: int
    answer_position: int


def _seeded_uuids(rng: random.Random, count: int) -> list[str]:
    """Distinct version-4-format UUID strings drawn from ``rng``."""
    out: list[str] = []
    seen: set[str] = set()
    while len(out) < count:
        u = str(uuid.UUID(int=rng.getrandbits(128), version=4))
        if u not in seen:
            seen.add(u)
            out.append(u)
    return out


def render_prompt(pairs: Sequence[tuple[str, str]], query_key: str,
                  pair_indent: str = " ") -> str:
    """Lay out the dictionary one pair per line: the first pair opens the
    brace, continuation lines are indented to align under it, the last pair
    closes the brace, and the query key follows on its own indented line,
    ending with a colon."""
    lines = []
    last = len(pairs) - 1
    for i, (key, value) in enumerate(pairs):
        prefix = "{" if i == 0 else pair_indent
        suffix = "}" if i == last else ","
        lines.append(f'{prefix}"{key}": "{value}"{suffix}')
    body = "\n".join(lines)
    return f'{INSTRUCTION}\n\nJSON data:\n{body}\n{pair_indent}"{query_key}":'


def gen_kv_task(n_pairs: int, answer_position: int, seed: int,
                pair_indent: str = " ") -> KvTask:
    """One task: ``n_pairs`` distinct UUID pairs with the queried pair at
    ``answer_position`` (0-based)."""
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    if not (0 <= answer_position < n_pairs):
        raise ValueError(
            f"answer_position {answer_position} out of range [0, {n_pairs})")
    rng = random.Random(seed)
    ids = _seeded_uuids(rng, 2 * n_pairs)
    pairs = list(zip(ids[0::2], ids[1::2]))
    query_key, answer = pairs[answer_position]
    prompt = render_prompt(pairs, query_key, pair_indent)
    return KvTask(prompt=prompt, query_key=query_key, answer=answer,
                  n_pairs=n_pairs, answer_position=answer_position)


def gen_kv_suite(n_pairs: int, positions: Sequence[int], examples_per_position: int,
                 seed: int, threads: int = 1) -> Iterator[dict]:
    """Tasks for every (position, example index) combination, each with an
    independently derived seed."""
    specs = [(pos, derive_seed(seed, "kv", pos, i))
             for pos in positions
             for i in range(examples_per_position)]

    def build(spec: tuple[int, int]) -> dict:
        pos, task_seed = spec
        task = gen_kv_task(n_pairs, pos, task_seed)
        return {
            "prompt": task.prompt,
            "answer": task.answer,
            "position": pos,
            "n_pairs": n_pairs,
            "seed": task_seed,
        }

    yield from parallel_map(build, specs, threads)


def write_kv_suite(records: Iterable[dict], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")
            n += 1
    return n


def parse_prompt_mapping(prompt: str) -> dict[str, str]:
    """Recover the JSON dictionary from a prompt (drops the query line)."""
    lines = prompt.splitlines()
    try:
        start = next(i for i, ln in enumerate(lines) if ln.startswith("{"))
    except StopIteration:
        raise ValueError("prompt contains no JSON object") from None
    return json.loads("\n".join(lines[start:-1]))
