"""Shared lexical tokenizer: the single definition used by the BM25 index and
by char-mode burstiness analytics."""

from __future__ import annotations

import itertools
import re

# lowercase, then maximal runs of alphanumeric characters; underscore is a
# separator ([^\W_] == str.isalnum over the lowered text)
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str, cap: int | None = None) -> list[str]:
    """Split ``text`` into lowercase alphanumeric terms.

    ``cap`` truncates to the first ``cap`` terms of the sequence (None = all).
    """
    lowered = text.lower()
    if cap is None:
        return _TOKEN_RE.findall(lowered)
    return list(itertools.islice((m.group() for m in _TOKEN_RE.finditer(lowered)), cap))
