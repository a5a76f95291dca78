"""Command-line pipeline: ingest -> index -> pack -> mix -> analyze -> gen-kv.

Every artifact gets a sibling ``<artifact>.manifest.json`` recording the
resolved configuration, its hash, the seed, and input/output checksums, so a
run can be reproduced exactly.  All randomness flows from ``--seed``.  A JSON
config file (``--config``) supplies defaults; explicit flags override it.
Set SPLICE_LOG to control log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .analysis import bucket_losses, burstiness_report, length_histogram
from .corpus import (
    DEFAULT_MAX_CHARS,
    DEFAULT_REPO_SPLIT_BYTES,
    Corpus,
    attach_token_lengths,
    dedup_exact,
    ingest_jsonl_many,
    ingest_repo_tree,
    write_corpus_jsonl,
)
from .kvtask import gen_kv_suite, gen_kv_task, write_kv_suite
from .mixing import (
    SeparatorCounts,
    SurrogateVocab,
    emit_separated,
    load_mixture_spec,
    mix,
)
from .packing import (
    DEFAULT_DOMRND_CHAR_BOUND,
    PackingConfig,
    baseline_pack,
    domrnd_pack,
    example_from_dict,
    materialize_example,
    read_packed,
    repo_pack,
    splice_pack_all,
    write_packed,
)
from .reporting import (
    write_bucket_report,
    write_histogram_report,
    write_json,
    write_zipf_report,
)
from .retrieval.bm25 import DEFAULT_B, DEFAULT_K1, DEFAULT_QUERY_CAP, Bm25Index, bm25_build
from .retrieval.embedding import (
    DEFAULT_NLIST,
    DEFAULT_TRAIN_SAMPLE,
    EmbeddingIndex,
    embed_load,
    ivf_train,
)
from .retrieval.repograph import RepoGraph
from .util import canonical_json, sha256_bytes, sha256_file

log = logging.getLogger("splicepack")

NO_LIMIT = 1 << 60  # effectively unlimited max_chars when re-reading artifacts


def load_corpus(path: str | Path, length_unit: str = "chars",
                sidecar: str | None = None) -> Corpus:
    corpus, _ = ingest_jsonl_many([path], max_chars=NO_LIMIT)
    if sidecar:
        attach_token_lengths(corpus, sidecar)
    if length_unit != "chars":
        corpus.set_length_unit(length_unit)
    return corpus


def write_manifest(anchor: Path, subcommand: str, params: dict,
                   inputs: list[str | Path], outputs: list[str | Path]) -> Path:
    params = {k: v for k, v in sorted(params.items())}
    manifest = {
        "command": "splicepack",
        "subcommand": subcommand,
        "version": __version__,
        "seed": params.get("seed"),
        "config": params,
        "config_hash": sha256_bytes(canonical_json(params).encode("utf-8")),
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "outputs": {str(p): sha256_file(p) for p in outputs},
    }
    path = Path(str(anchor) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path


def _parse_int_list(raw: str) -> list[int]:
    return [int(x) for x in raw.split(",") if x.strip() != ""]


def _parse_float_list(raw: str) -> list[float]:
    return [float(x) for x in raw.split(",") if x.strip() != ""]


# ---------------------------------------------------------------- subcommands


def cmd_ingest(args) -> int:
    out = Path(args.out)
    params = {
        "max_chars": args.max_chars,
        "repo_split_bytes": args.repo_split_bytes,
        "dedup": not args.no_dedup,
        "length_unit": args.length_unit,
        "seed": args.seed,
    }
    inputs: list[str] = []
    if args.repo_root:
        corpus, report = ingest_repo_tree(args.repo_root, args.max_chars,
                                          args.repo_split_bytes)
        params["repo_root"] = args.repo_root
    elif args.input:
        corpus, report = ingest_jsonl_many(args.input, args.max_chars,
                                           threads=args.threads)
        inputs = list(args.input)
        params["input"] = sorted(args.input)
    else:
        raise ValueError("ingest needs --input or --repo-root")
    if not args.no_dedup:
        corpus, removed = dedup_exact(corpus)
        report.dropped_duplicate = removed
    if args.token_sidecar:
        attach_token_lengths(corpus, args.token_sidecar)
        inputs.append(args.token_sidecar)
        params["token_sidecar"] = args.token_sidecar
    if args.length_unit != "chars":
        corpus.set_length_unit(args.length_unit)
    write_corpus_jsonl(corpus, out)
    skips = Path(str(out) + ".skips.json")
    write_json(report.to_dict(), skips)
    write_manifest(out, "ingest", params, inputs, [out, skips])
    log.info("ingested %d documents -> %s (skips: %s)", len(corpus), out,
             report.to_dict())
    return 0


def cmd_index(args) -> int:
    out = Path(args.out)
    if args.retriever == "bm25":
        if not args.corpus:
            raise ValueError("--retriever bm25 requires --corpus")
        corpus = load_corpus(args.corpus)
        cap = None if args.query_cap == 0 else args.query_cap
        index = bm25_build(corpus, k1=args.bm25_k1, b=args.bm25_b, query_cap=cap)
        index.save(out)
        params = {"retriever": "bm25", "bm25_k1": args.bm25_k1, "bm25_b": args.bm25_b,
                  "query_cap": args.query_cap, "seed": args.seed}
        write_manifest(out, "index", params, [args.corpus], [out])
        log.info("bm25 index: %d docs, %d terms -> %s", index.n_docs, index.n_terms, out)
    elif args.retriever == "embed":
        if not args.embeddings:
            raise ValueError("--retriever embed requires --embeddings")
        index = embed_load(args.embeddings)
        ivf_train(index, nlist=args.nlist, train_sample=args.train_sample,
                  seed=args.seed)
        index.save_trained(out)
        params = {"retriever": "embed", "nlist": args.nlist,
                  "train_sample": args.train_sample, "seed": args.seed}
        write_manifest(out, "index", params, [args.embeddings], [out])
        log.info("ivf index: %d vectors, nlist=%d -> %s", index.n_docs, args.nlist, out)
    else:
        raise ValueError(f"no index artifact for retriever {args.retriever!r}")
    return 0


def _build_retriever(args, corpus: Corpus):
    if args.retriever == "bm25":
        if args.index:
            return Bm25Index.load(args.index)
        cap = None if args.query_cap == 0 else args.query_cap
        return bm25_build(corpus, k1=args.bm25_k1, b=args.bm25_b, query_cap=cap)
    if args.retriever == "embed":
        if args.index:
            index = EmbeddingIndex.load_trained(args.index)
        elif args.embeddings:
            index = ivf_train(embed_load(args.embeddings), nlist=args.nlist,
                              train_sample=args.train_sample, seed=args.seed)
        else:
            raise ValueError("--retriever embed requires --index or --embeddings")
        if args.nprobe:
            index.default_nprobe = args.nprobe
        return index
    if args.retriever == "repo":
        return RepoGraph.from_corpus(corpus)
    raise ValueError(f"unknown retriever {args.retriever!r}")


def cmd_pack(args) -> int:
    out = Path(args.out)
    corpus = load_corpus(args.corpus, length_unit=args.length_unit,
                         sidecar=args.token_sidecar)
    if len(corpus) == 0:
        raise ValueError("empty corpus")
    params = {
        "method": args.method, "L": args.max_len, "k": args.k,
        "order": args.order, "seed": args.seed, "length_unit": args.length_unit,
        "char_bound": args.char_bound, "retriever": args.retriever,
        "materialize": args.materialize,
    }
    inputs = [args.corpus] + [p for p in (args.index, args.embeddings,
                                          args.token_sidecar) if p]
    if args.method == "splice":
        config = PackingConfig(method="splice", L=args.max_len, k=args.k,
                               order=args.order, seed=args.seed)
        retriever = _build_retriever(args, corpus)
        stream = splice_pack_all(corpus, retriever, config)
    elif args.method == "baseline":
        stream = baseline_pack(corpus, args.max_len, seed=args.seed)
    elif args.method == "domrnd":
        stream = domrnd_pack(corpus, seed=args.seed, char_bound=args.char_bound)
    elif args.method == "repo":
        stream = repo_pack(corpus, RepoGraph.from_corpus(corpus), args.max_len)
    else:
        raise ValueError(f"unknown method {args.method!r}")
    stats = write_packed(stream, corpus, out, materialize=args.materialize)
    stats_path = Path(str(out) + ".stats.json")
    write_json(stats.to_dict(), stats_path)
    write_manifest(out, "pack", params, inputs, [out, stats_path])
    log.info("packed %d examples (mean len %.1f) -> %s", stats.examples,
             stats.mean_len, out)
    return 0


def cmd_mix(args) -> int:
    out = Path(args.out)
    spec, paths = load_mixture_spec(args.spec)
    raw_records: dict[str, list[dict]] = {}
    streams = {}
    for name, path in paths.items():
        with open(path, encoding="utf-8") as f:
            raw_records[name] = [json.loads(line) for line in f if line.strip()]
        streams[name] = [example_from_dict(r) for r in raw_records[name]]

    per_stream: dict[str, dict] = {name: {"examples": 0, "length": 0} for name in streams}
    mixed_order: list[tuple[str, int]] = []
    cursor = {name: 0 for name in streams}
    with open(out, "w", encoding="utf-8") as f:
        for name, example in mix(spec, streams):
            idx = cursor[name]
            cursor[name] += 1
            mixed_order.append((name, idx))
            f.write(json.dumps(raw_records[name][idx], ensure_ascii=False) + "\n")
            per_stream[name]["examples"] += 1
            per_stream[name]["length"] += example.total_len

    counts = SeparatorCounts()
    outputs = [out]
    if args.emit_tokens:
        vocab = SurrogateVocab(reserved=[i for i in (spec.bos_id, spec.eos_id)
                                         if i is not None])
        token_path = Path(str(out) + ".tokens.jsonl")

        def token_stream():
            for name, idx in mixed_order:
                rec = raw_records[name][idx]
                if "text" not in rec:
                    raise ValueError(
                        f"stream {name!r} is not materialized; pack with --materialize")
                yield vocab.encode(rec["text"])

        with open(token_path, "w", encoding="utf-8") as f:
            for toks in emit_separated(token_stream(), spec, counts):
                f.write(json.dumps({"tokens": toks}) + "\n")
        outputs.append(token_path)

    counts_path = Path(str(out) + ".counts.json")
    write_json({"streams": per_stream, "separators": counts.to_dict()}, counts_path)
    outputs.append(counts_path)
    params = {"spec": args.spec, "seed": spec.seed, "separator": spec.separator,
              "meter": spec.meter, "emit_tokens": args.emit_tokens}
    write_manifest(out, "mix", params, [args.spec, *paths.values()], outputs)
    log.info("mixed %d examples -> %s", sum(s["examples"] for s in per_stream.values()), out)
    return 0


def _stream_texts(args):
    """Materialized text of each packed example, preferring inlined text."""
    corpus = load_corpus(args.corpus) if args.corpus else None
    with open(args.stream, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            if "text" in rec:
                yield rec["text"]
            elif corpus is not None:
                yield materialize_example(example_from_dict(rec), corpus)
            else:
                raise ValueError(
                    "stream is not materialized; supply --corpus to materialize")


def cmd_analyze(args) -> int:
    out_base = Path(args.out)
    figures = not args.no_figures
    if args.what == "burstiness":
        report = burstiness_report(_stream_texts(args), args.window_len,
                                   max_windows=args.max_windows, seed=args.seed,
                                   threads=args.threads)
        outputs = write_zipf_report(report, out_base, figures=figures)
        params = {"what": "burstiness", "window_len": args.window_len,
                  "max_windows": args.max_windows, "seed": args.seed}
        inputs = [args.stream] + ([args.corpus] if args.corpus else [])
    elif args.what == "lengths":
        if args.corpus:
            corpus = load_corpus(args.corpus)
            values = [corpus.doc_length(i) for i in range(len(corpus))]
            inputs = [args.corpus]
        elif args.stream:
            values = [ex.total_len for ex in read_packed(args.stream)]
            inputs = [args.stream]
        else:
            raise ValueError("analyze lengths needs --corpus or --stream")
        hist = length_histogram(values, _parse_float_list(args.edges))
        outputs = write_histogram_report(hist, out_base, figures=figures)
        params = {"what": "lengths", "edges": args.edges, "seed": args.seed}
    elif args.what == "buckets":
        def records():
            with open(args.losses, encoding="utf-8") as f:
                for line in f:
                    if line.strip():
                        rec = json.loads(line)
                        yield int(rec["pos"]), float(rec["loss"])

        buckets = bucket_losses(records())
        outputs = write_bucket_report(buckets, out_base, figures=figures)
        params = {"what": "buckets", "seed": args.seed}
        inputs = [args.losses]
    else:
        raise ValueError(f"unknown analysis {args.what!r}")
    write_manifest(out_base, "analyze", params, inputs, outputs)
    return 0


def cmd_gen_kv(args) -> int:
    out = Path(args.out)
    if args.single:
        task = gen_kv_task(args.n_pairs, args.answer_position, args.seed,
                           pair_indent=args.pair_indent)
        out.write_text(task.prompt, encoding="utf-8")
        params = {"n_pairs": args.n_pairs, "answer_position": args.answer_position,
                  "seed": args.seed, "single": True}
        write_manifest(out, "gen-kv", params, [], [out])
        log.info("wrote single prompt (%d chars, answer %s) -> %s",
                 len(task.prompt), task.answer, out)
        return 0
    positions = _parse_int_list(args.positions)
    records = gen_kv_suite(args.n_pairs, positions, args.examples_per_position,
                           args.seed, threads=args.threads)
    n = write_kv_suite(records, out)
    params = {"n_pairs": args.n_pairs, "positions": positions,
              "examples_per_position": args.examples_per_position,
              "seed": args.seed, "single": False}
    write_manifest(out, "gen-kv", params, [], [out])
    log.info("wrote %d tasks -> %s", n, out)
    return 0


def cmd_inspect(args) -> int:
    path = Path(args.path)
    with open(path, "rb") as f:
        head = f.read(8)
    if head == b"SPLCBM25":
        index = Bm25Index.load(path)
        print(f"bm25 index: {index.n_docs} docs, {index.n_terms} terms, "
              f"k1={index.k1} b={index.b} query_cap={index.query_cap} "
              f"avg_doc_len={index.avg_doc_len:.2f}")
        return 0
    if head == b"SPLCEMB1":
        index = embed_load(path)
        print(f"embeddings: {index.n_docs} vectors, dim {index.dim}")
        return 0
    if head == b"SPLCIVF1":
        index = EmbeddingIndex.load_trained(path)
        print(f"ivf index: {index.n_docs} vectors, dim {index.dim}, "
              f"nlist={index.nlist}, train_sample={index.train_sample}")
        return 0
    # assume JSONL / JSON
    with open(path, encoding="utf-8") as f:
        first = f.readline()
        n_lines = 1 + sum(1 for _ in f)
    try:
        rec = json.loads(first) if first.strip() else {}
    except json.JSONDecodeError:
        rec = json.loads(path.read_text(encoding="utf-8"))  # pretty-printed JSON
        n_lines = 1
    if "segments" in rec:
        total = sum(ex.total_len for ex in read_packed(path))
        print(f"packed stream: {n_lines} examples, total length {total}")
    elif "id" in rec and "text" in rec:
        corpus = load_corpus(path)
        chars = sum(d.char_len for d in corpus)
        print(f"corpus: {len(corpus)} documents, {chars} chars")
    elif "prompt" in rec:
        print(f"kv suite: {n_lines} tasks, n_pairs={rec.get('n_pairs')}")
    else:
        print(f"json artifact with keys: {sorted(rec)}")
    return 0


# -------------------------------------------------------------------- parser


def build_parser(config: dict) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splicepack",
        description="Pack document corpora into long, coherent training examples.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file of flag defaults")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1,
                       help="internal parallelism cap; output is independent of it")

    p = sub.add_parser("ingest", help="build a corpus from JSONL shards or a source tree")
    common(p)
    p.add_argument("--input", action="append", help="JSONL shard (repeatable)")
    p.add_argument("--repo-root", help="directory tree to ingest")
    p.add_argument("--out", required=True)
    p.add_argument("--max-chars", type=int, default=DEFAULT_MAX_CHARS)
    p.add_argument("--repo-split-bytes", type=int, default=DEFAULT_REPO_SPLIT_BYTES)
    p.add_argument("--no-dedup", action="store_true")
    p.add_argument("--token-sidecar")
    p.add_argument("--length-unit", choices=["chars", "tokens"], default="chars")
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("index", help="build a retrieval index artifact")
    common(p)
    p.add_argument("--corpus")
    p.add_argument("--retriever", choices=["bm25", "embed"], required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bm25-k1", type=float, default=DEFAULT_K1)
    p.add_argument("--bm25-b", type=float, default=DEFAULT_B)
    p.add_argument("--query-cap", type=int, default=DEFAULT_QUERY_CAP,
                   help="max query terms taken from a document (0 = unlimited)")
    p.add_argument("--embeddings", help="embedding binary file")
    p.add_argument("--nlist", type=int, default=DEFAULT_NLIST)
    p.add_argument("--train-sample", type=int, default=DEFAULT_TRAIN_SAMPLE)
    p.set_defaults(fn=cmd_index)

    p = sub.add_parser("pack", help="pack a corpus into training examples")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", choices=["splice", "baseline", "domrnd", "repo"],
                   default="splice")
    p.add_argument("--retriever", choices=["bm25", "embed", "repo"], default="bm25")
    p.add_argument("--index", help="prebuilt index artifact")
    p.add_argument("--embeddings")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("-L", "--max-len", type=int, default=32_768)
    p.add_argument("--order", choices=["identity", "reverse", "shuffle"],
                   default="identity")
    p.add_argument("--length-unit", choices=["chars", "tokens"], default="chars")
    p.add_argument("--token-sidecar")
    p.add_argument("--char-bound", type=int, default=DEFAULT_DOMRND_CHAR_BOUND)
    p.add_argument("--bm25-k1", type=float, default=DEFAULT_K1)
    p.add_argument("--bm25-b", type=float, default=DEFAULT_B)
    p.add_argument("--query-cap", type=int, default=DEFAULT_QUERY_CAP)
    p.add_argument("--nlist", type=int, default=DEFAULT_NLIST)
    p.add_argument("--train-sample", type=int, default=DEFAULT_TRAIN_SAMPLE)
    p.add_argument("--nprobe", type=int, default=0, help="IVF cells to probe (0 = all)")
    p.add_argument("--materialize", action="store_true",
                   help="inline concatenated text into the output records")
    p.set_defaults(fn=cmd_pack)

    p = sub.add_parser("mix", help="interleave packed streams per a mixture spec")
    common(p)
    p.add_argument("--spec", required=True, help="mixture spec JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--emit-tokens", action="store_true",
                   help="also write a separated surrogate-token stream")
    p.set_defaults(fn=cmd_mix)

    p = sub.add_parser("analyze", help="compute stream/corpus statistics")
    common(p)
    p.add_argument("what", choices=["burstiness", "lengths", "buckets"])
    p.add_argument("--stream", help="packed JSONL")
    p.add_argument("--corpus", help="corpus JSONL")
    p.add_argument("--losses", help="JSONL of {pos, loss} records")
    p.add_argument("--out", required=True, help="report base path (writes .json/.csv/.png)")
    p.add_argument("--window-len", type=int, default=32_768)
    p.add_argument("--max-windows", type=int, default=None)
    p.add_argument("--edges", default="0,1024,4096,16384,65536,262144")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("gen-kv", help="generate key-value retrieval tasks")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--n-pairs", type=int, default=300)
    p.add_argument("--positions", default="0,74,149,224,299",
                   help="comma-separated answer positions")
    p.add_argument("--examples-per-position", type=int, default=500)
    p.add_argument("--single", action="store_true", help="write one raw prompt")
    p.add_argument("--answer-position", type=int, default=0)
    p.add_argument("--pair-indent", default=" ")
    p.set_defaults(fn=cmd_gen_kv)

    p = sub.add_parser("inspect", help="summarize an artifact")
    common(p)
    p.add_argument("path")
    p.set_defaults(fn=cmd_inspect)

    if config:
        for action in sub.choices.values():
            action.set_defaults(**config)
    return parser


def run_command(argv: list[str]) -> int:
    logging.basicConfig(
        level=os.environ.get("SPLICE_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    config = {}
    if known.config:
        with open(known.config, encoding="utf-8") as f:
            config = json.load(f)
    parser = build_parser(config)
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError, KeyError) as e:
        print(f"splicepack: error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
