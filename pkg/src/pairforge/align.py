"""Word alignment and phrase-table construction.

IBM Model 1 EM for lexical translation tables, Viterbi links, grow-diag
symmetrization and consistent phrase-pair extraction.
"""

from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import kernels
from .errors import DimensionMismatch, EmptyCorpus, LengthMismatch
from .textcore import ParallelCorpus

log = logging.getLogger(__name__)

NULL = "<NULL>"
LEX_FLOOR = 1e-12


@dataclass
class TranslationTable:
    """t(target | source); ``t[source][target]``.  Rows sum to one."""

    t: dict
    log_likelihood: list = field(default_factory=list)

    def prob(self, target: str, source: str) -> float:
        row = self.t.get(source)
        if row is None:
            return 0.0
        return row.get(target, 0.0)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for src in sorted(self.t):
                row = self.t[src]
                for tgt in sorted(row):
                    fh.write(f"{src} {tgt} {row[tgt]!r}\n")

    @classmethod
    def read(cls, path) -> "TranslationTable":
        t: dict = defaultdict(dict)
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                parts = line.split()
                if len(parts) == 3:
                    t[parts[0]][parts[1]] = float(parts[2])
        return cls(dict(t))


def em_model1(corpus: ParallelCorpus, iterations: int = 5) -> TranslationTable:
    """Train t(target | source) with a NULL source word.

    Initialization is uniform over the target words each source word
    co-occurs with.  ``log_likelihood[i]`` is the corpus log-likelihood
    (natural log, up to the constant length term) of the table after ``i``
    M-steps, so the list has ``iterations + 1`` entries.
    """
    pairs = list(corpus)
    if not pairs:
        raise EmptyCorpus("IBM Model 1 needs at least one sentence pair")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")

    src_ids: dict = {NULL: 0}
    tgt_ids: dict = {}
    param_ids: dict = {}
    param_src = []
    param_tgt = []
    flat = []
    seg_len = []
    for src, tgt in pairs:
        s_ids = [0] + [src_ids.setdefault(w, len(src_ids)) for w in src]
        for e in tgt:
            e_id = tgt_ids.setdefault(e, len(tgt_ids))
            for f_id in s_ids:
                key = (f_id, e_id)
                idx = param_ids.get(key)
                if idx is None:
                    idx = param_ids[key] = len(param_src)
                    param_src.append(f_id)
                    param_tgt.append(e_id)
                flat.append(idx)
            seg_len.append(len(s_ids))

    param_src = np.asarray(param_src, dtype=np.int64)
    param_idx = np.asarray(flat, dtype=np.int64)
    seg_len = np.asarray(seg_len, dtype=np.int64)
    n_params = param_src.shape[0]

    fanout = np.bincount(param_src, minlength=len(src_ids)).astype(np.float64)
    t = 1.0 / fanout[param_src]

    history = []
    for _ in range(iterations):
        counts, ll = kernels.em_estep(t, param_idx, seg_len, n_params)
        history.append(float(ll))
        totals = np.bincount(param_src, weights=counts, minlength=len(src_ids))
        t = counts / totals[param_src]
    _, ll = kernels.em_estep(t, param_idx, seg_len, n_params)
    history.append(float(ll))

    src_words = list(src_ids)
    tgt_words = list(tgt_ids)
    table: dict = defaultdict(dict)
    for k in range(n_params):
        table[src_words[param_src[k]]][tgt_words[param_tgt[k]]] = float(t[k])
    return TranslationTable(dict(table), history)


@dataclass(frozen=True)
class AlignmentMatrix:
    links: frozenset
    source_len: int
    target_len: int

    def __post_init__(self):
        object.__setattr__(self, "links", frozenset(self.links))
        for s, t in self.links:
            if not (0 <= s < self.source_len and 0 <= t < self.target_len):
                raise DimensionMismatch(f"link {(s, t)} outside {self.source_len}x{self.target_len}")

    def transposed(self) -> "AlignmentMatrix":
        return AlignmentMatrix(frozenset((t, s) for s, t in self.links), self.target_len, self.source_len)

    def to_pharaoh(self) -> str:
        return " ".join(f"{s}-{t}" for s, t in sorted(self.links))

    @classmethod
    def from_pharaoh(cls, text: str, source_len: int, target_len: int) -> "AlignmentMatrix":
        links = []
        for item in text.split():
            s, t = item.split("-")
            links.append((int(s), int(t)))
        return cls(frozenset(links), source_len, target_len)


def viterbi_align(table: TranslationTable, pair) -> AlignmentMatrix:
    """Link every target word to its most probable source word.

    NULL wins only when strictly more probable than every source word; ties
    among source words go to the lowest index.
    """
    src, tgt = pair
    links = set()
    for j, e in enumerate(tgt):
        best_i, best_p = -1, 0.0
        for i, f in enumerate(src):
            p = table.prob(e, f)
            if p > best_p:
                best_i, best_p = i, p
        if best_i >= 0 and best_p >= table.prob(e, NULL):
            links.add((best_i, j))
    return AlignmentMatrix(frozenset(links), len(src), len(tgt))


_NEIGHBORS = ((-1, 0), (0, -1), (1, 0), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1))


def symmetrize(forward: AlignmentMatrix, reverse: AlignmentMatrix) -> AlignmentMatrix:
    """grow-diag (no final step).

    ``reverse`` is the target-to-source alignment in its own orientation,
    i.e. links are (target index, source index).
    """
    if reverse.source_len != forward.target_len or reverse.target_len != forward.source_len:
        raise DimensionMismatch(
            f"forward is {forward.source_len}x{forward.target_len}, "
            f"reverse is {reverse.source_len}x{reverse.target_len}"
        )
    rev = reverse.transposed().links
    union = forward.links | rev
    current = set(forward.links & rev)
    src_aligned = {s for s, _ in current}
    tgt_aligned = {t for _, t in current}
    added = True
    while added:
        added = False
        for s in range(forward.source_len):
            for t in range(forward.target_len):
                if (s, t) not in current:
                    continue
                for ds, dt in _NEIGHBORS:
                    ns, nt = s + ds, t + dt
                    if (ns, nt) in current or (ns, nt) not in union:
                        continue
                    if ns not in src_aligned or nt not in tgt_aligned:
                        current.add((ns, nt))
                        src_aligned.add(ns)
                        tgt_aligned.add(nt)
                        added = True
    return AlignmentMatrix(frozenset(current), forward.source_len, forward.target_len)


def _phrase_spans(alignment: AlignmentMatrix, max_len: int):
    """Yield (s1, s2, t1, t2) inclusive spans of consistent phrase pairs."""
    ls, lt = alignment.source_len, alignment.target_len
    tgt_aligned = [False] * lt
    by_src = defaultdict(list)
    for s, t in alignment.links:
        tgt_aligned[t] = True
        by_src[s].append(t)
    for s1 in range(ls):
        for s2 in range(s1, min(ls, s1 + max_len)):
            ts = [t for s in range(s1, s2 + 1) for t in by_src.get(s, ())]
            if not ts:
                continue
            t1, t2 = min(ts), max(ts)
            if t2 - t1 + 1 > max_len:
                continue
            if any(t1 <= t <= t2 and not s1 <= s <= s2 for s, t in alignment.links):
                continue
            start = t1
            while True:
                end = t2
                while end - start + 1 <= max_len:
                    yield s1, s2, start, end
                    end += 1
                    if end >= lt or tgt_aligned[end]:
                        break
                start -= 1
                if start < 0 or tgt_aligned[start]:
                    break


def extract_phrases(pair, alignment: AlignmentMatrix, max_len: int = 7) -> list:
    """All consistent phrase pairs of one sentence pair as (src, tgt, count)."""
    src, tgt = pair
    counts = Counter()
    for s1, s2, t1, t2 in _phrase_spans(alignment, max_len):
        counts[(tuple(src[s1:s2 + 1]), tuple(tgt[t1:t2 + 1]))] += 1
    return [(s, t, c) for (s, t), c in counts.items()]


def _lex_weight(words_out, words_in, links, table: TranslationTable) -> float:
    # links: (index into words_in, index into words_out); table gives t(out | in)
    linked = defaultdict(list)
    for i, o in links:
        linked[o].append(i)
    w = 1.0
    for o, word in enumerate(words_out):
        if o in linked:
            w *= sum(table.prob(word, words_in[i]) for i in linked[o]) / len(linked[o])
        else:
            w *= table.prob(word, NULL)
    return max(w, LEX_FLOOR)


@dataclass(frozen=True)
class PhraseTableEntry:
    src: tuple
    tgt: tuple
    features: tuple  # phi(t|s), phi(s|t), lex(t|s), lex(s|t)

    def __post_init__(self):
        if not self.src or not self.tgt:
            raise ValueError("phrase table entries need non-empty sides")
        if len(self.features) != 4 or not all(0.0 < f <= 1.0 + 1e-9 for f in self.features):
            raise ValueError(f"features must be four probabilities in (0, 1]: {self.features}")


class PhraseTable:
    def __init__(self, entries: Iterable[PhraseTableEntry] = (), max_phrase_len: int = 7):
        self.max_phrase_len = max_phrase_len
        grouped = defaultdict(list)
        for e in entries:
            grouped[e.src].append(e)
        self.entries = {
            src: tuple(sorted(es, key=lambda e: (-e.features[0], e.tgt))) for src, es in sorted(grouped.items())
        }

    def __contains__(self, src) -> bool:
        return tuple(src) in self.entries

    def __len__(self) -> int:
        return sum(len(v) for v in self.entries.values())

    def get(self, src, limit: int | None = None) -> tuple:
        es = self.entries.get(tuple(src), ())
        return es[:limit] if limit else es

    def __iter__(self):
        for es in self.entries.values():
            yield from es

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for e in self:
                feats = " ".join(repr(f) for f in e.features)
                fh.write(f"{' '.join(e.src)} ||| {' '.join(e.tgt)} ||| {feats}\n")

    @classmethod
    def read(cls, path, max_phrase_len: int | None = None) -> "PhraseTable":
        entries = []
        longest = 1
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                parts = [p.strip() for p in line.split("|||")]
                if len(parts) < 3:
                    continue
                src, tgt = tuple(parts[0].split()), tuple(parts[1].split())
                feats = tuple(float(x) for x in parts[2].split()[:4])
                entries.append(PhraseTableEntry(src, tgt, feats))
                longest = max(longest, len(src), len(tgt))
        return cls(entries, max_phrase_len or longest)


def build_phrase_table(
    corpus: ParallelCorpus,
    alignments: list,
    max_len: int,
    lex_fwd: TranslationTable,
    lex_rev: TranslationTable,
) -> PhraseTable:
    """Relative-frequency phrase table with averaged lexical weights.

    ``lex_fwd`` is t(target | source), ``lex_rev`` t(source | target).  A
    phrase pair's lexical weights are averaged over its occurrences instead
    of taking the most frequent internal alignment.
    """
    pairs = list(corpus)
    if len(pairs) != len(alignments):
        raise LengthMismatch(f"{len(pairs)} sentence pairs but {len(alignments)} alignments")
    joint = Counter()
    lex_sum = defaultdict(lambda: [0.0, 0.0])
    for (src, tgt), al in zip(pairs, alignments):
        if al.source_len != len(src) or al.target_len != len(tgt):
            raise DimensionMismatch("alignment does not match sentence lengths")
        for s1, s2, t1, t2 in _phrase_spans(al, max_len):
            sp, tp = tuple(src[s1:s2 + 1]), tuple(tgt[t1:t2 + 1])
            inner = [(s - s1, t - t1) for s, t in al.links if s1 <= s <= s2 and t1 <= t <= t2]
            joint[(sp, tp)] += 1
            acc = lex_sum[(sp, tp)]
            acc[0] += _lex_weight(tp, sp, inner, lex_fwd)
            acc[1] += _lex_weight(sp, tp, [(t, s) for s, t in inner], lex_rev)
    src_count = Counter()
    tgt_count = Counter()
    for (sp, tp), c in joint.items():
        src_count[sp] += c
        tgt_count[tp] += c
    entries = []
    for (sp, tp), c in sorted(joint.items()):
        lf, lr = lex_sum[(sp, tp)]
        entries.append(
            PhraseTableEntry(
                sp, tp, (c / src_count[sp], c / tgt_count[tp], min(lf / c, 1.0), min(lr / c, 1.0))
            )
        )
    return PhraseTable(entries, max_len)


def align_corpus(corpus: ParallelCorpus, iterations: int = 5):
    """Train both lexical tables and return (fwd table, rev table, symmetrized alignments)."""
    fwd = em_model1(corpus, iterations)
    rev = em_model1(corpus.swapped(), iterations)
    alignments = []
    for src, tgt in corpus:
        a_f = viterbi_align(fwd, (src, tgt))
        a_r = viterbi_align(rev, (tgt, src))
        alignments.append(symmetrize(a_f, a_r))
    return fwd, rev, alignments


def train_phrase_table(corpus: ParallelCorpus, iterations: int = 5, max_len: int = 7) -> PhraseTable:
    fwd, rev, alignments = align_corpus(corpus, iterations)
    table = build_phrase_table(corpus, alignments, max_len, fwd, rev)
    log.info("phrase table: %d entries, %d source phrases", len(table), len(table.entries))
    return table
