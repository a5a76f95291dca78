"""Corpus ingestion: JSONL files and source-tree walks into a document store.

Documents carry a stable id, raw text, char/token length accounting, and
optional path/domain metadata.  Ingestion filters over-long files, splits
oversized repositories into byte-bounded chunks, and reports everything it
drops.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .util import parallel_map

log = logging.getLogger("splicepack.corpus")

DEFAULT_MAX_CHARS = 30_000
DEFAULT_REPO_SPLIT_BYTES = 25 * 2**20

CHARS = "chars"
TOKENS = "tokens"

# tag for files sitting directly in the ingest root ("." can never collide
# with a subdirectory name)
ROOT_REPO = "."


@dataclass
class Document:
    """One corpus unit."""

    id: str
    text: str
    char_len: int
    token_len: int | None = None
    path: str | None = None
    domain: str | None = None

    @classmethod
    def from_text(cls, id: str, text: str, path: str | None = None,
                  domain: str | None = None, token_len: int | None = None) -> "Document":
        return cls(id=id, text=text, char_len=len(text), token_len=token_len,
                   path=path, domain=domain)


@dataclass
class SkipReport:
    """Counts of records dropped or skipped during ingestion."""

    dropped_too_long: int = 0
    dropped_duplicate: int = 0
    unreadable: int = 0

    def to_dict(self) -> dict:
        return {
            "dropped_too_long": self.dropped_too_long,
            "dropped_duplicate": self.dropped_duplicate,
            "unreadable": self.unreadable,
        }


class Corpus:
    """Ordered, id-unique document collection with a consumption mask.

    The corpus itself is immutable after ingestion except for the consumed
    mask, which only packers flip.
    """

    def __init__(self, documents: Iterable[Document], length_unit: str = CHARS):
        self.documents: list[Document] = list(documents)
        self._by_id: dict[str, int] = {}
        for i, doc in enumerate(self.documents):
            if doc.id in self._by_id:
                raise ValueError(f"duplicate document id: {doc.id!r}")
            self._by_id[doc.id] = i
        self.consumed: list[bool] = [False] * len(self.documents)
        self.length_unit = CHARS
        if length_unit != CHARS:
            self.set_length_unit(length_unit)

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    def ordinal(self, doc_id: str) -> int:
        try:
            return self._by_id[doc_id]
        except KeyError:
            raise KeyError(f"unknown document id: {doc_id!r}") from None

    def get(self, doc_id: str) -> Document:
        return self.documents[self.ordinal(doc_id)]

    def doc_length(self, ordinal: int) -> int:
        """Length of a document in the corpus length unit."""
        doc = self.documents[ordinal]
        if self.length_unit == TOKENS:
            assert doc.token_len is not None
            return doc.token_len
        return doc.char_len

    def length_of(self, doc_id: str) -> int:
        return self.doc_length(self.ordinal(doc_id))

    def set_length_unit(self, unit: str) -> None:
        if unit not in (CHARS, TOKENS):
            raise ValueError(f"unknown length unit: {unit!r}")
        if unit == TOKENS:
            for doc in self.documents:
                if doc.token_len is None:
                    raise ValueError(
                        f"cannot switch to token lengths: document {doc.id!r} has no token_len"
                    )
        self.length_unit = unit

    def reset_consumption(self) -> None:
        self.consumed = [False] * len(self.documents)

    def any_consumed(self) -> bool:
        return any(self.consumed)


def _parse_jsonl_records(path: Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise ValueError(f"{path}: malformed JSON on line {lineno}: {e}") from None
            if not isinstance(rec, dict) or "id" not in rec or "text" not in rec:
                raise ValueError(f"{path}: line {lineno} lacks required 'id'/'text' fields")
            records.append(rec)
    return records


def _records_to_docs(records: Iterable[dict], max_chars: int, report: SkipReport,
                     seen: dict[str, str]) -> list[Document]:
    docs = []
    for rec in records:
        doc_id = str(rec["id"])
        if doc_id in seen:
            raise ValueError(f"duplicate document id: {doc_id!r}")
        seen[doc_id] = doc_id
        text = rec["text"]
        if len(text) > max_chars:
            report.dropped_too_long += 1
            continue
        docs.append(Document.from_text(
            doc_id, text,
            path=rec.get("path"),
            domain=rec.get("domain"),
            token_len=rec.get("token_len"),
        ))
    return docs


def ingest_jsonl(path: str | Path, max_chars: int = DEFAULT_MAX_CHARS) -> tuple[Corpus, SkipReport]:
    """Read one JSONL file of {"id", "text", ...} records, in file order.

    Records longer than ``max_chars`` characters are dropped and counted.
    """
    if max_chars < 1:
        raise ValueError("max_chars must be positive")
    report = SkipReport()
    docs = _records_to_docs(_parse_jsonl_records(Path(path)), max_chars, report, {})
    return Corpus(docs), report


def ingest_jsonl_many(paths: Iterable[str | Path], max_chars: int = DEFAULT_MAX_CHARS,
                      threads: int = 1) -> tuple[Corpus, SkipReport]:
    """Ingest several JSONL shards; parsing may run in parallel but shards are
    merged in lexicographic path order, so output is schedule-independent."""
    ordered = sorted(Path(p) for p in paths)
    parsed = parallel_map(_parse_jsonl_records, ordered, threads)
    report = SkipReport()
    seen: dict[str, str] = {}
    docs: list[Document] = []
    for records in parsed:
        docs.extend(_records_to_docs(records, max_chars, report, seen))
    return Corpus(docs), report


def _repo_key(rel_path: Path) -> str:
    parts = rel_path.parts
    return parts[0] if len(parts) > 1 else ROOT_REPO


def ingest_repo_tree(root: str | Path, max_chars: int = DEFAULT_MAX_CHARS,
                     repo_split_bytes: int = DEFAULT_REPO_SPLIT_BYTES) -> tuple[Corpus, SkipReport]:
    """Walk a directory tree into documents, one per regular file.

    Document ids are root-relative paths; traversal (and output) order is
    lexicographic by path.  Each top-level directory is a repository; a
    repository whose cumulative byte size exceeds ``repo_split_bytes`` is cut
    into consecutive whole-file chunks, each tagged with a distinct domain.
    Files directly under the root form one pseudo-repository.
    """
    root = Path(root)
    if not root.is_dir():
        raise ValueError(f"ingest root is not a directory: {root}")
    if max_chars < 1 or repo_split_bytes < 1:
        raise ValueError("max_chars and repo_split_bytes must be positive")

    report = SkipReport()
    entries: list[tuple[str, str, int]] = []  # (rel path str, text, byte size)
    # lexicographic on path components == a depth-first walk that visits each
    # directory's entries in sorted order
    files = sorted((p for p in root.rglob("*") if p.is_file()),
                   key=lambda p: p.relative_to(root).parts)
    for file in files:
        rel = file.relative_to(root)
        try:
            text = file.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as e:
            log.warning("skipping unreadable file %s: %s", rel, e)
            report.unreadable += 1
            continue
        if len(text) > max_chars:
            report.dropped_too_long += 1
            continue
        entries.append((str(rel), text, len(text.encode("utf-8"))))

    # group by repository, preserving lexicographic file order within each
    repos: dict[str, list[tuple[str, str, int]]] = {}
    for rel_str, text, nbytes in entries:
        repos.setdefault(_repo_key(Path(rel_str)), []).append((rel_str, text, nbytes))

    # chunk tag per file: whole repo if it fits the budget, else whole files
    # packed greedily in lexicographic order until the budget would overflow
    chunk_tag: dict[str, str] = {}
    for repo, files in repos.items():
        if sum(n for _, _, n in files) <= repo_split_bytes:
            for rel_str, _, _ in files:
                chunk_tag[rel_str] = repo
            continue
        chunk_idx, chunk_bytes = 0, 0
        for rel_str, _, nbytes in files:
            if nbytes > repo_split_bytes:
                raise ValueError(
                    f"file {rel_str!r} alone exceeds repo_split_bytes ({nbytes} > {repo_split_bytes})"
                )
            if chunk_bytes + nbytes > repo_split_bytes:
                chunk_idx += 1
                chunk_bytes = 0
            chunk_bytes += nbytes
            chunk_tag[rel_str] = f"{repo}#{chunk_idx:03d}"

    docs = [Document.from_text(rel_str, text, path=rel_str, domain=chunk_tag[rel_str])
            for rel_str, text, _ in entries]
    return Corpus(docs), report


def dedup_exact(corpus: Corpus) -> tuple[Corpus, int]:
    """Drop documents whose text byte-equals an earlier document's text.

    First occurrence wins; relative order is preserved.  Returns the deduped
    corpus and the number of removed documents.
    """
    seen: set[bytes] = set()
    kept: list[Document] = []
    removed = 0
    for doc in corpus:
        key = doc.text.encode("utf-8")
        if key in seen:
            removed += 1
            continue
        seen.add(key)
        kept.append(doc)
    return Corpus(kept, length_unit=corpus.length_unit), removed


def attach_token_lengths(corpus: Corpus, sidecar: str | Path) -> int:
    """Set token_len on documents from a {"id", "token_len"} JSONL sidecar.

    Returns the number of sidecar records that matched no document (each is
    warned about).  Switching the corpus to token lengths afterwards fails if
    any document was left uncovered.
    """
    unmatched = 0
    with open(sidecar, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise ValueError(f"{sidecar}: malformed JSON on line {lineno}: {e}") from None
            doc_id, token_len = str(rec["id"]), int(rec["token_len"])
            if doc_id not in corpus._by_id:
                log.warning("token sidecar id %r matches no document", doc_id)
                unmatched += 1
                continue
            doc = corpus.get(doc_id)
            if token_len < 0 or (token_len == 0 and doc.char_len > 0):
                raise ValueError(
                    f"invalid token_len {token_len} for nonempty document {doc_id!r}"
                )
            doc.token_len = token_len
    return unmatched


def write_corpus_jsonl(corpus: Corpus, path: str | Path) -> None:
    """Serialize a corpus back to the ingestion JSONL format."""
    with open(path, "w", encoding="utf-8") as f:
        for doc in corpus:
            rec: dict = {"id": doc.id, "text": doc.text}
            if doc.path is not None:
                rec["path"] = doc.path
            if doc.domain is not None:
                rec["domain"] = doc.domain
            if doc.token_len is not None:
                rec["token_len"] = doc.token_len
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")
