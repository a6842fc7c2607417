"""Command-line interface: refine, neighbors, drift, trajectory.

Exit codes: 0 success, 2 usage or configuration error, 3 I/O error,
4 data format error, 5 unknown token.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from .analysis import (
    compare_neighbors,
    nearest_neighbors,
    neighbors_csv_rows,
    project_trajectories,
    render_comparison_text,
    render_neighbors_text,
    trajectory_csv_rows,
    truncate_score,
)
from .corpus import FilterConfig, build_corpus, load_plain_text, load_stopwords, load_tagged_tsv
from .errors import (
    ConfigError,
    DimensionError,
    EmbedriftError,
    FormatError,
    ParseError,
    UnknownTokenError,
    VersionError,
)
from .refine import RefineConfig, refine
from .store import EmbeddingTable, load_word2vec_binary, load_word2vec_text, save_word2vec_text
from .trajectory import drift, import_jsonl, mean_drift, token_history, export_jsonl

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_FORMAT = 4
EXIT_UNKNOWN_TOKEN = 5


def _load_vectors(path: str) -> EmbeddingTable:
    # .bin selects the binary reader; anything else is read as text.
    if Path(path).suffix.lower() == ".bin":
        return load_word2vec_binary(path)
    return load_word2vec_text(path)


def _scan_threads() -> int:
    raw = os.environ.get("EMBEDRIFT_THREADS")
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"EMBEDRIFT_THREADS must be an integer (got {raw!r})") from None
    if value < 1:
        raise ConfigError(f"EMBEDRIFT_THREADS must be >= 1 (got {value})")
    return value


def _load_corpus(paths: list[str], fmt: str, stopwords_path: str | None):
    stopwords = load_stopwords(stopwords_path) if stopwords_path else frozenset()
    cfg = FilterConfig(stopwords=stopwords)
    documents = []
    for path in paths:
        if fmt == "tsv":
            part = load_tagged_tsv(path, cfg)
        else:
            part = load_plain_text(path, cfg, doc_prefix=f"{Path(path).name}:")
        documents.extend(part.documents)
    return build_corpus(documents)


def _require_known(table: EmbeddingTable, tokens: list[str], label: str) -> None:
    missing = [t for t in tokens if t not in table]
    if missing:
        raise UnknownTokenError(
            f"unknown token(s) in {label}: {', '.join(missing)}", tuple(missing))


def cmd_refine(args) -> int:
    config = RefineConfig(window_size=args.window, learning_rate=args.alpha,
                          epochs=args.epochs,
                          normalize_pretrained=not args.no_normalize_pretrained)
    corpus = _load_corpus(args.corpus, args.format, args.stopwords)
    stats = corpus.stats
    print(f"documents: {stats.documents}  tokens: {stats.total_tokens}  "
          f"unique: {stats.unique_tokens}  "
          f"mean document length: {stats.mean_document_length:.2f}")

    vectors = _load_vectors(args.vectors)
    refined, log = refine(corpus, vectors, config)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_word2vec_text(refined, out_dir / "refined.vec")
    export_jsonl(log, out_dir / "trajectory.jsonl")
    manifest = {
        "command": "refine",
        "vectors": args.vectors,
        "corpus": list(args.corpus),
        "format": args.format,
        "stopwords": args.stopwords,
        "out": args.out,
        "config": config.as_dict(),
        "corpus_stats": {**stats.as_dict(),
                         "mean_document_length": stats.mean_document_length},
        "started_at": log.header.started_at,
        "duration_s": log.header.duration_s,
    }
    with open(out_dir / "run.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"refined {len(refined)} tokens, {len(log)} snapshots, "
          f"{log.header.duration_s:.2f}s -> {out_dir}")
    return EXIT_OK


def _write_csv(rows: list[list]) -> None:
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerows(rows)


def cmd_neighbors(args) -> int:
    threads = _scan_threads()
    refined = _load_vectors(args.refined)
    original = _load_vectors(args.original) if args.original else None
    _require_known(refined, args.token, "refined table")
    if original is not None:
        _require_known(original, args.token, "original table")
    for token in args.token:
        if original is not None:
            ref_list, orig_list = compare_neighbors(refined, original, token,
                                                    args.k, threads)
            if args.csv:
                _write_csv(neighbors_csv_rows(ref_list))
                _write_csv(neighbors_csv_rows(orig_list))
            else:
                print(render_comparison_text(ref_list, orig_list))
                print()
        else:
            neighbors = nearest_neighbors(refined, token, args.k, threads)
            if args.csv:
                _write_csv(neighbors_csv_rows(neighbors))
            else:
                print(render_neighbors_text(neighbors))
                print()
    return EXIT_OK


def cmd_drift(args) -> int:
    refined = _load_vectors(args.refined)
    original = _load_vectors(args.original)
    if args.token:
        tokens = list(args.token)
        _require_known(refined, tokens, "refined table")
    else:
        tokens = sorted(t for t in refined.tokens() if t in original)

    rows: list[list] = [["token", "drift"]]
    for token in tokens:
        value = drift(refined, original, token)
        rows.append([token, "N/A" if value is None else value])
    if args.mean:
        shared = [t for t in tokens if t in original]
        rows.append(["MEAN", mean_drift(refined, original, shared)])

    if args.csv:
        _write_csv([[r[0], r[1] if isinstance(r[1], str) else float(r[1])]
                    for r in rows])
    else:
        width = max(len(str(r[0])) for r in rows)
        for token, value in rows[1:]:
            shown = value if isinstance(value, str) else truncate_score(value)
            print(f"{token:<{width}}  {shown}")
    return EXIT_OK


def cmd_trajectory(args) -> int:
    if not 1 <= len(args.token) <= 2:
        raise ConfigError(f"expected 1 or 2 tokens (got {len(args.token)})")
    log = import_jsonl(args.trajectory)
    origin = _load_vectors(args.original)
    projected = project_trajectories(log, origin, args.token, args.dims)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        wrote_header = False
        for traj in projected:
            rows = trajectory_csv_rows(traj, token_history(log, traj.token))
            if not wrote_header:
                writer.writerow(rows[0])
                wrote_header = True
            writer.writerows(rows[1:])
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embedrift",
        description="Iteratively refine static token embeddings over a corpus "
                    "and analyze how they move.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("refine", help="run a refinement pass and write outputs")
    p.add_argument("--vectors", required=True,
                   help="pre-trained vectors (.bin binary, else word2vec text)")
    p.add_argument("--corpus", required=True, action="append",
                   help="corpus file (repeatable)")
    p.add_argument("--format", choices=["plain", "tsv"], default="plain",
                   help="corpus format: plain text (one document per line) or "
                        "tagged TSV (token<TAB>lemma<TAB>pos)")
    p.add_argument("--window", type=int, default=13, help="context window size (odd)")
    p.add_argument("--alpha", type=float, default=0.01, help="learning rate")
    p.add_argument("--epochs", type=int, default=1, help="number of passes")
    p.add_argument("--stopwords", help="stopword list, one token per line")
    p.add_argument("--no-normalize-pretrained", action="store_true",
                   help="keep pre-trained vectors at their original norms")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("neighbors", help="rank most similar tokens")
    p.add_argument("--refined", required=True, help="refined vectors file")
    p.add_argument("--original", help="original vectors for side-by-side output")
    p.add_argument("--token", required=True, action="append",
                   help="query token (repeatable)")
    p.add_argument("--k", type=int, default=10, help="number of neighbors")
    p.add_argument("--csv", action="store_true", help="emit CSV instead of a table")
    p.set_defaults(func=cmd_neighbors)

    p = sub.add_parser("drift", help="cosine similarity to the original vectors")
    p.add_argument("--refined", required=True)
    p.add_argument("--original", required=True)
    p.add_argument("--token", action="append",
                   help="token to report (repeatable; default: all shared)")
    p.add_argument("--mean", action="store_true", help="append a MEAN row")
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=cmd_drift)

    p = sub.add_parser("trajectory", help="export PCA-projected update history")
    p.add_argument("--trajectory", required=True, help="trajectory JSONL file")
    p.add_argument("--original", required=True, help="original vectors file")
    p.add_argument("--token", required=True, action="append",
                   help="token to project (1 or 2)")
    p.add_argument("--dims", type=int, choices=[2, 3], default=2)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_trajectory)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UnknownTokenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNKNOWN_TOKEN
    except (FormatError, ParseError, DimensionError, VersionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except EmbedriftError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
