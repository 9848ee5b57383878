#!/usr/bin/env python3
"""Chunking throughput experiment.

Generates random documents with sentence token counts spanning the greedy and
hard-split regimes, then reports packing throughput and the chunk-size
distribution. Useful when tuning max_tokens / hard_split_threshold.
"""

from __future__ import annotations

import argparse
import random
import statistics
import time

from bmrkit.chunker import ChunkingConfig, WordTokenizer, chunk_text_by_tokens


def make_document(rng: random.Random, max_sentence_tokens: int) -> str:
    sentences = []
    for _ in range(rng.randint(1, 6)):
        n = rng.randint(1, max_sentence_tokens)
        sentences.append(" ".join(f"w{rng.randrange(50)}" for _ in range(n)) + " end.")
    return " ".join(sentences)


def run(args: argparse.Namespace) -> None:
    rng = random.Random(args.seed)
    docs = [make_document(rng, args.max_sentence_tokens) for _ in range(args.documents)]
    total_tokens = sum(len(d.split()) for d in docs)

    cfg = ChunkingConfig(
        max_tokens=args.max_tokens, hard_split_threshold=args.hard_split_threshold
    )
    tok = WordTokenizer()

    started = time.perf_counter()
    sizes: list[int] = []
    for doc in docs:
        sizes.extend(c.token_count for c in chunk_text_by_tokens(doc, cfg, tok))
    elapsed = time.perf_counter() - started

    print(f"documents:        {args.documents}")
    print(f"total tokens:     {total_tokens}")
    print(f"chunks produced:  {len(sizes)}")
    print(f"elapsed:          {elapsed:.2f}s ({total_tokens / elapsed / 1e6:.2f} Mtok/s)")
    print(f"chunk tokens:     min={min(sizes)} "
          f"median={statistics.median(sizes):.0f} max={max(sizes)}")
    over = [s for s in sizes if s > cfg.max_tokens]
    print(f"over budget:      {len(over)} (must be 0)")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--documents", type=int, default=500)
    parser.add_argument("--max-sentence-tokens", type=int, default=5000)
    parser.add_argument("--max-tokens", type=int, default=3000)
    parser.add_argument("--hard-split-threshold", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=7)
    run(parser.parse_args())
