"""Tokenization, corpus I/O and token-level edit distance.

A sentence is a plain ``tuple`` of token strings.  Tuples are immutable and
hashable, which the phrase table, LM and decoder all rely on.
"""

from __future__ import annotations

import logging
import unicodedata
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator

from . import kernels
from .errors import EmptySource, LineCountMismatch

log = logging.getLogger(__name__)

Sentence = tuple  # tuple[str, ...]

PUNCT = frozenset(".,;:!?\"'()")


def _glued(chunk: str, i: int) -> bool:
    # apostrophes inside words (don't, everyone's) and separators inside numbers (3.5, 1,000)
    if i == 0 or i == len(chunk) - 1:
        return False
    left, ch, right = chunk[i - 1], chunk[i], chunk[i + 1]
    if ch == "'":
        return left.isalnum() and right.isalnum()
    if ch in ".,":
        return left.isdigit() and right.isdigit()
    return False


def tokenize(text: str) -> Sentence:
    tokens = []
    for chunk in unicodedata.normalize("NFC", text).split():
        buf = []
        for i, ch in enumerate(chunk):
            if ch in PUNCT and not _glued(chunk, i):
                if buf:
                    tokens.append("".join(buf))
                    buf = []
                tokens.append(ch)
            else:
                buf.append(ch)
        if buf:
            tokens.append("".join(buf))
    return tuple(tokens)


def detokenize(sentence: Iterable[str]) -> str:
    return " ".join(sentence)


def split_tokens(line: str) -> Sentence:
    """Whitespace split for already tokenized text (no punctuation rules)."""
    return tuple(unicodedata.normalize("NFC", line).split())


@dataclass(frozen=True)
class ParallelCorpus:
    pairs: tuple
    name: str = ""
    dropped: int = field(default=0, compare=False)

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    @property
    def sources(self):
        return [s for s, _ in self.pairs]

    @property
    def targets(self):
        return [t for _, t in self.pairs]

    def swapped(self, name=None) -> "ParallelCorpus":
        return ParallelCorpus(tuple((t, s) for s, t in self.pairs), name or f"{self.name}.swapped")

    @classmethod
    def from_pairs(cls, pairs, name=""):
        """Build from (source, target) strings or token sequences; empty sides are dropped."""
        out = []
        dropped = 0
        for s, t in pairs:
            s = tokenize(s) if isinstance(s, str) else tuple(s)
            t = tokenize(t) if isinstance(t, str) else tuple(t)
            if not s or not t:
                dropped += 1
                continue
            out.append((s, t))
        return cls(tuple(out), name, dropped)


def _read_lines(path) -> list[str]:
    with open(path, encoding="utf-8", newline="\n") as fh:
        return [line.rstrip("\n").rstrip("\r") for line in fh]


def load_parallel(source_path, target_path, name: str | None = None) -> ParallelCorpus:
    src_lines = _read_lines(source_path)
    tgt_lines = _read_lines(target_path)
    if len(src_lines) != len(tgt_lines):
        raise LineCountMismatch(
            f"{source_path} has {len(src_lines)} lines, {target_path} has {len(tgt_lines)}"
        )
    pairs = []
    dropped = 0
    for i, (s, t) in enumerate(zip(src_lines, tgt_lines)):
        s_tok, t_tok = tokenize(s), tokenize(t)
        if not s_tok and not t_tok:
            dropped += 1
            continue
        if not s_tok or not t_tok:
            log.warning("line %d: one side blank, pair dropped", i + 1)
            dropped += 1
            continue
        pairs.append((s_tok, t_tok))
    name = name or Path(source_path).stem
    log.info("loaded %d pairs from %s (%d dropped)", len(pairs), name, dropped)
    return ParallelCorpus(tuple(pairs), name, dropped)


def iter_sentences(path) -> Iterator[Sentence]:
    """Stream one tokenized sentence per line; blank lines are skipped."""
    with open(path, encoding="utf-8", newline="\n") as fh:
        for line in fh:
            sent = tokenize(line)
            if sent:
                yield sent


def write_sentences(path, sentences: Iterable[Sentence]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for sent in sentences:
            fh.write(detokenize(sent) + "\n")
            n += 1
    return n


def iter_tsv_pairs(path) -> Iterator[tuple]:
    """Yield (poor, good, *extra columns) from a TSV pair file."""
    with open(path, encoding="utf-8", newline="\n") as fh:
        for line in fh:
            cols = line.rstrip("\n").split("\t")
            if len(cols) < 2:
                continue
            yield (split_tokens(cols[0]), split_tokens(cols[1]), *cols[2:])


def edit_distance(a: Sentence, b: Sentence) -> int:
    """Token-level Levenshtein distance with unit costs."""
    if not a or not b:
        return max(len(a), len(b))
    ea, eb = kernels.encode_pair(a, b)
    return int(kernels.levenshtein(ea, eb))


def edit_rate(poor: Sentence, good: Sentence, exact: bool = False):
    """Edit distance normalized by the length of ``poor``."""
    if not poor:
        raise EmptySource("edit rate is undefined for an empty poor sentence")
    d = edit_distance(poor, good)
    if exact:
        return Fraction(d, len(poor))
    return d / len(poor)
