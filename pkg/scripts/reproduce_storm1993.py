#!/usr/bin/env python3
"""Full-scale reproduction run on the 1993 NOAA storm event narratives.

Needs external data that is not bundled:
  * GoogleNews-vectors-negative300.bin (word2vec binary, ~3.5 GB)
  * the 1993 storm event narratives, either as plain text (one narrative
    per line, --narratives) or as the NOAA StormEvents details CSV
    (--noaa-csv, the EVENT_NARRATIVE column is extracted), or as tagged
    TSV (--tagged-tsv) if a POS tagger ran upstream.

Runs window=13, alpha=0.01, epochs=2 and reports:
  * mean drift of refined vs. original vectors over shared tokens,
    expected to land in 0.56 +/- 0.10 (the tolerance is wide because the
    exact POS/lemma preprocessing used upstream is not bundled)
  * the top neighbors of 'thunderstorm', expected to be led by 'storm'

Example:
  python scripts/reproduce_storm1993.py \
      --vectors GoogleNews-vectors-negative300.bin \
      --noaa-csv StormEvents_details-ftp_v1.0_d1993_*.csv \
      --stopwords stopwords.txt --out runs/storm1993
"""

from __future__ import annotations

import argparse
import csv
import gzip
import sys
from pathlib import Path

from embedrift import (
    FilterConfig,
    RefineConfig,
    build_corpus,
    load_plain_text,
    load_stopwords,
    load_tagged_tsv,
    load_word2vec_binary,
    load_word2vec_text,
    mean_drift,
    nearest_neighbors,
    normalize_all,
    refine,
    save_word2vec_text,
    tokenize_plain,
)
from embedrift.analysis import render_neighbors_text
from embedrift.trajectory import export_jsonl


def read_noaa_narratives(path: Path) -> list[str]:
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rt", encoding="utf-8", errors="replace", newline="") as fh:
        reader = csv.DictReader(fh)
        column = next((c for c in reader.fieldnames or []
                       if c.strip().upper() == "EVENT_NARRATIVE"), None)
        if column is None:
            raise SystemExit(f"{path}: no EVENT_NARRATIVE column found")
        return [row[column].strip() for row in reader if row.get(column, "").strip()]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--vectors", required=True,
                        help="GoogleNews-vectors-negative300.bin (or a text .vec)")
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--narratives", nargs="+",
                        help="plain-text narratives, one per line")
    source.add_argument("--noaa-csv", nargs="+",
                        help="NOAA StormEvents details CSV file(s)")
    source.add_argument("--tagged-tsv", nargs="+",
                        help="pre-tagged narratives (token<TAB>lemma<TAB>pos)")
    parser.add_argument("--stopwords", help="stopword list, one token per line")
    parser.add_argument("--window", type=int, default=13)
    parser.add_argument("--alpha", type=float, default=0.01)
    parser.add_argument("--epochs", type=int, default=2)
    parser.add_argument("--out", default="storm1993-out", help="output directory")
    args = parser.parse_args()

    stopwords = load_stopwords(args.stopwords) if args.stopwords else frozenset()
    cfg = FilterConfig(stopwords=stopwords)

    print("loading corpus ...")
    if args.tagged_tsv:
        documents = []
        for path in args.tagged_tsv:
            documents.extend(load_tagged_tsv(path, cfg).documents)
    elif args.noaa_csv:
        documents = []
        for path in args.noaa_csv:
            for i, narrative in enumerate(read_noaa_narratives(Path(path))):
                doc = tokenize_plain(narrative, cfg, doc_id=f"{Path(path).name}:{i}")
                if doc.tokens:
                    documents.append(doc)
    else:
        documents = []
        for path in args.narratives:
            documents.extend(load_plain_text(path, cfg).documents)
    corpus = build_corpus(documents)
    stats = corpus.stats
    print(f"documents: {stats.documents}  tokens: {stats.total_tokens}  "
          f"unique: {stats.unique_tokens}  "
          f"mean document length: {stats.mean_document_length:.2f}")

    print("loading vectors ...")
    if Path(args.vectors).suffix.lower() == ".bin":
        vectors = load_word2vec_binary(args.vectors)
    else:
        vectors = load_word2vec_text(args.vectors)
    unique = {t for d in corpus.documents for t in d.tokens}
    in_vocab = sum(1 for t in unique if t in vectors)
    print(f"vectors: {len(vectors)} entries, dim {vectors.dim}; "
          f"{in_vocab}/{len(unique)} corpus tokens covered")

    run_cfg = RefineConfig(window_size=args.window, learning_rate=args.alpha,
                           epochs=args.epochs)
    print(f"refining (window={args.window}, alpha={args.alpha}, "
          f"epochs={args.epochs}) ...")
    refined, log = refine(corpus, vectors, run_cfg)
    print(f"done in {log.header.duration_s:.2f}s, {len(log)} updates")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_word2vec_text(refined, out / "refined.vec")
    export_jsonl(log, out / "trajectory.jsonl")
    print(f"wrote {out}/refined.vec and {out}/trajectory.jsonl")

    origin = normalize_all(vectors)
    value = mean_drift(refined, origin)
    in_band = 0.46 <= value <= 0.66
    print(f"\nmean drift over shared tokens: {value:.4f} "
          f"(expected 0.56 +/- 0.10): {'OK' if in_band else 'OUT OF BAND'}")

    verdict = True
    if "thunderstorm" in refined:
        top = nearest_neighbors(refined, "thunderstorm", 10)
        print()
        print(render_neighbors_text(top))
        first = top.entries[0][0] if top.entries else "?"
        ok = first == "storm"
        print(f"top neighbor of 'thunderstorm' is {first!r} "
              f"(expected 'storm'): {'OK' if ok else 'MISMATCH'}")
        verdict = verdict and ok
    else:
        print("'thunderstorm' not present in the refined table; "
              "check the corpus preprocessing")
        verdict = False

    return 0 if (in_band and verdict) else 1


if __name__ == "__main__":
    sys.exit(main())
