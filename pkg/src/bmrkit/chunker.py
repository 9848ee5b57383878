"""Token-bounded chunking: greedy sentence packing with a hard-split fallback.

Sentences are packed into chunks until the next one would exceed the token
budget. A single sentence larger than the hard-split threshold is sliced into
fixed token windows instead; the pending buffer is flushed first so no text is
ever dropped.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Protocol, Sequence

SENTENCE_BOUNDARY = re.compile(r"(?<=\.|[!?])\s+")

DEFAULT_MAX_TOKENS = 3000
DEFAULT_HARD_SPLIT_THRESHOLD = 2000


class Tokenizer(Protocol):
    """Minimal encode/decode pair the chunker needs.

    ``decode(encode(t))`` must equal ``t`` up to whitespace normalization so
    hard-split windows reassemble cleanly.
    """

    def encode(self, text: str) -> Sequence: ...

    def decode(self, tokens: Sequence) -> str: ...


class WordTokenizer:
    """Reference tokenizer: one token per whitespace-delimited word.

    Deterministic and model-independent; production adapters can wrap a real
    model tokenizer behind the same interface.
    """

    def encode(self, text: str) -> list[str]:
        return text.split()

    def decode(self, tokens: Sequence) -> str:
        return " ".join(tokens)


@dataclass
class ChunkingConfig:
    max_tokens: int = DEFAULT_MAX_TOKENS
    hard_split_threshold: int = DEFAULT_HARD_SPLIT_THRESHOLD

    def __post_init__(self) -> None:
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")
        if self.hard_split_threshold <= 0:
            raise ValueError("hard_split_threshold must be positive")


@dataclass
class Chunk:
    """An index-ordered slice of source text, the unit of parallel extraction."""

    index: int
    text: str
    token_count: int


def split_sentences(text: str) -> list[str]:
    """Split at whitespace runs that follow '.', '!' or '?'.

    The delimiting whitespace is consumed; terminal punctuation stays with its
    sentence; empty segments are dropped.
    """
    return [seg for seg in SENTENCE_BOUNDARY.split(text) if seg]


def count_tokens(text: str, tok: Tokenizer) -> int:
    return len(tok.encode(text))


def chunk_text_by_tokens(
    text: str,
    cfg: ChunkingConfig | None = None,
    tok: Tokenizer | None = None,
) -> list[Chunk]:
    """Split ``text`` into chunks of at most ``cfg.max_tokens`` tokens.

    Sentences are packed greedily in order. A sentence whose own token count
    exceeds the hard-split threshold (or the window size itself) is emitted as
    consecutive decode windows of at most ``max_tokens`` tokens, after flushing
    any pending buffer. Concatenating all chunks preserves every word in order.
    """
    cfg = cfg or ChunkingConfig()
    tok = tok or WordTokenizer()

    texts: list[str] = []
    buf: list[str] = []
    buf_count = 0

    def flush() -> None:
        nonlocal buf, buf_count
        if buf:
            texts.append(" ".join(buf))
            buf = []
            buf_count = 0

    for sent in split_sentences(text):
        n = count_tokens(sent, tok)
        # Oversized sentences bypass packing; anything wider than the window
        # itself must also be sliced or the chunk-size bound would break.
        if n > cfg.hard_split_threshold or n > cfg.max_tokens:
            flush()
            ids = tok.encode(sent)
            for i in range(0, len(ids), cfg.max_tokens):
                texts.append(tok.decode(ids[i : i + cfg.max_tokens]))
            continue
        if buf_count + n > cfg.max_tokens and buf:
            flush()
        buf.append(sent)
        buf_count += n
    flush()

    return [
        Chunk(index=i, text=t, token_count=count_tokens(t, tok))
        for i, t in enumerate(t for t in texts if t.strip())
    ]
