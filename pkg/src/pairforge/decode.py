"""Log-linear phrase-based stack decoder.

Feature vector layout, used everywhere (n-best files, MERT, weights)::

    [phi(t|s), phi(s|t), lex(t|s), lex(s|t), lm, word_penalty, distortion]

Phrase and LM features are log10 values, the word penalty is the number of
target tokens and distortion is the (non-positive) sum of jump costs.
"""

from __future__ import annotations

import heapq
import json
import math
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .align import PhraseTable
from .errors import EmptySource, NegativeFactor
from .lm import NGramModel
from .textcore import Sentence

N_FEATURES = 7
FEATURE_NAMES = ("phi_ts", "phi_st", "lex_ts", "lex_st", "lm", "wp", "dist")
OOV_PENALTY = math.log10(1e-4)
TIE_EPS = 1e-9


@dataclass(frozen=True)
class LogLinearWeights:
    lm: float = 0.5
    phrase: tuple = (0.2, 0.2, 0.2, 0.2)
    word_penalty: float = 0.5
    distortion: float = 0.3

    def __post_init__(self):
        object.__setattr__(self, "phrase", tuple(float(x) for x in self.phrase))
        if len(self.phrase) != 4:
            raise ValueError("exactly four phrase weights are required")
        vec = self.vector()
        if not np.all(np.isfinite(vec)):
            raise ValueError(f"weights must be finite: {vec}")
        if self.lm < 0:
            raise ValueError(f"lm weight must be >= 0, got {self.lm}")

    def vector(self) -> np.ndarray:
        return np.array([*self.phrase, self.lm, self.word_penalty, self.distortion], dtype=np.float64)

    @classmethod
    def from_vector(cls, vec) -> "LogLinearWeights":
        vec = [float(x) for x in vec]
        return cls(lm=vec[4], phrase=tuple(vec[:4]), word_penalty=vec[5], distortion=vec[6])

    def l1_normalized(self) -> "LogLinearWeights":
        vec = self.vector()
        norm = np.abs(vec).sum()
        return self if norm == 0 else LogLinearWeights.from_vector(vec / norm)

    def to_json(self) -> dict:
        return {"lm": self.lm, "phrase": list(self.phrase), "word_penalty": self.word_penalty, "distortion": self.distortion}

    @classmethod
    def from_json(cls, obj: dict) -> "LogLinearWeights":
        unknown = set(obj) - {"lm", "phrase", "word_penalty", "distortion"}
        if unknown:
            raise ValueError(f"unknown weight keys: {sorted(unknown)}")
        return cls(lm=obj["lm"], phrase=tuple(obj["phrase"]), word_penalty=obj["word_penalty"], distortion=obj["distortion"])

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "LogLinearWeights":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def scale_lm_weight(w: LogLinearWeights, factor: float) -> LogLinearWeights:
    """Copy of ``w`` with the language-model weight multiplied by ``factor``."""
    if factor < 0:
        raise NegativeFactor(f"lm scale factor must be >= 0, got {factor}")
    return replace(w, lm=w.lm * factor)


@dataclass(frozen=True)
class DecoderParams:
    beam_size: int = 4
    distortion_limit: int = 6
    table_limit: int = 20

    def __post_init__(self):
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        if self.distortion_limit < 0:
            raise ValueError("distortion_limit must be >= 0")


class Hypothesis:
    __slots__ = ("coverage", "n_covered", "lm_state", "score", "feats", "last_end", "parent", "phrase", "words", "alts")

    def __init__(self, coverage, n_covered, lm_state, score, feats, last_end, parent, phrase, words):
        self.coverage = coverage
        self.n_covered = n_covered
        self.lm_state = lm_state
        self.score = score
        self.feats = feats
        self.last_end = last_end
        self.parent = parent
        self.phrase = phrase
        self.words = words
        self.alts = []

    @property
    def surface(self) -> str:
        return " ".join(self.words)

    def signature(self):
        return self.coverage, self.lm_state, self.last_end

    def chain(self):
        h = self
        while h is not None:
            yield h
            h = h.parent


def _better(a: Hypothesis, b: Hypothesis) -> bool:
    if a.score > b.score + TIE_EPS:
        return True
    if b.score > a.score + TIE_EPS:
        return False
    return a.surface < b.surface


def phrase_options(pt: PhraseTable, src: Sentence, table_limit: int | None = 20) -> dict:
    """Map (start, end_exclusive) -> list of (target, 4 log10 phrase features).

    Positions without a single-token entry get a copy-through option carrying
    the fixed OOV penalty on the first phrase feature.
    """
    n = len(src)
    options = {}
    for i in range(n):
        for j in range(i + 1, min(n, i + pt.max_phrase_len) + 1):
            entries = pt.get(src[i:j], table_limit)
            if entries:
                options[(i, j)] = [(e.tgt, tuple(math.log10(f) for f in e.features)) for e in entries]
        if (i, i + 1) not in options:
            options[(i, i + 1)] = [((src[i],), (OOV_PENALTY, 0.0, 0.0, 0.0))]
    return options


def _first_gap(coverage: int, n: int) -> int:
    i = 0
    while i < n and coverage >> i & 1:
        i += 1
    return i


def _search(options: dict, n: int, lm: NGramModel, wvec, params: DecoderParams, limit: int):
    full = (1 << n) - 1
    w = [float(x) for x in wvec]
    zero = (0.0,) * N_FEATURES
    root = Hypothesis(0, 0, lm.start_state(), 0.0, zero, -1, None, (), ())
    stacks = [dict() for _ in range(n + 1)]
    stacks[0][root.signature()] = root
    spans_by_start = {}
    for (i, j), opts in options.items():
        spans_by_start.setdefault(i, []).append((j, opts))

    for k in range(n):
        stack = stacks[k]
        if not stack:
            continue
        hyps = sorted(stack.values(), key=lambda h: (-h.score, h.surface))[: params.beam_size]
        for hyp in hyps:
            for i in range(n):
                if hyp.coverage >> i & 1:
                    continue
                jump = i - hyp.last_end - 1
                if abs(jump) > limit:
                    continue
                for j, opts in spans_by_start.get(i, ()):
                    span_mask = ((1 << (j - i)) - 1) << i
                    if hyp.coverage & span_mask:
                        continue
                    cov = hyp.coverage | span_mask
                    if cov != full:
                        gap = _first_gap(cov, n)
                        if abs(gap - j) > limit:
                            continue
                    for tgt, pf in opts:
                        state = hyp.lm_state
                        lm_delta = 0.0
                        for word in tgt:
                            lp, state = lm.advance(state, word)
                            lm_delta += lp
                        if cov == full:
                            lm_delta += lm.finish(state)
                        delta = (pf[0], pf[1], pf[2], pf[3], lm_delta, float(len(tgt)), -float(abs(jump)))
                        feats = tuple(a + b for a, b in zip(hyp.feats, delta))
                        score = hyp.score + sum(wi * di for wi, di in zip(w, delta))
                        new = Hypothesis(cov, hyp.n_covered + j - i, state, score, feats, j - 1, hyp, tgt, hyp.words + tgt)
                        target = stacks[new.n_covered]
                        sig = new.signature()
                        old = target.get(sig)
                        if old is None:
                            target[sig] = new
                        elif _better(new, old):
                            new.alts = old.alts
                            old.alts = []
                            new.alts.append(old)
                            target[sig] = new
                        else:
                            old.alts.append(new)
    return sorted(stacks[n].values(), key=lambda h: (-h.score, h.surface))[: params.beam_size]


def _kbest(finals, max_pops: int):
    """Yield (score, words, feats) for distinct surfaces in descending score order.

    Paths deviate from the best derivation by swapping in recombined
    alternatives; a path only deviates at positions deeper than the one that
    created it, so every derivation is produced once.
    """
    heap = []
    counter = 0
    for h in finals:
        heapq.heappush(heap, (-h.score, counter, tuple(h.chain()), 0, h.feats))
        counter += 1
    seen = set()
    pops = 0
    while heap and pops < max_pops:
        neg, _, nodes, start, feats = heapq.heappop(heap)
        pops += 1
        words = tuple(w for node in reversed(nodes) for w in node.phrase)
        if words not in seen:
            seen.add(words)
            yield -neg, words, feats
        for p in range(start, len(nodes)):
            base = nodes[p]
            for alt in base.alts:
                new_nodes = nodes[:p] + tuple(alt.chain())
                new_feats = tuple(f - b + a for f, b, a in zip(feats, base.feats, alt.feats))
                heapq.heappush(heap, (neg + base.score - alt.score, counter, new_nodes, p + 1, new_feats))
                counter += 1


@dataclass
class NBestEntry:
    target: Sentence
    features: tuple
    total: float


@dataclass
class NBestList:
    sentence_id: int
    entries: list = field(default_factory=list)

    def write(self, fh) -> None:
        for e in self.entries:
            feats = " ".join(repr(float(f)) for f in e.features)
            fh.write(f"{self.sentence_id} ||| {' '.join(e.target)} ||| {feats} ||| {e.total!r}\n")


def read_nbest(path) -> list:
    lists: dict = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = [p.strip() for p in line.split("|||")]
            if len(parts) != 4:
                continue
            sid = int(parts[0])
            entry = NBestEntry(tuple(parts[1].split()), tuple(float(x) for x in parts[2].split()), float(parts[3]))
            lists.setdefault(sid, NBestList(sid)).entries.append(entry)
    return [lists[k] for k in sorted(lists)]


def _run(pt, lm, w, src, params):
    src = tuple(src)
    if not src:
        raise EmptySource("cannot decode an empty sentence")
    options = phrase_options(pt, src, params.table_limit)
    wvec = w.vector()
    finals = _search(options, len(src), lm, wvec, params, params.distortion_limit)
    if not finals:
        # distortion constraints stranded every path; monotone search always completes
        finals = _search(options, len(src), lm, wvec, params, 0)
    return finals, wvec


def nbest(pt: PhraseTable, lm: NGramModel, w: LogLinearWeights, src: Sentence, n: int,
          params: DecoderParams = DecoderParams(), sentence_id: int = 0) -> NBestList:
    if n < 1:
        raise ValueError("n must be >= 1")
    finals, wvec = _run(pt, lm, w, src, params)
    items = []
    for item in _kbest(finals, max(50 * n, 2000)):
        if len(items) >= n and item[0] < items[n - 1][0] - TIE_EPS:
            break
        items.append(item)
    # equal-score derivations are ordered by surface string
    items.sort(key=lambda it: -it[0])
    groups = []
    for item in items:
        if groups and abs(groups[-1][0][0] - item[0]) <= TIE_EPS:
            groups[-1].append(item)
        else:
            groups.append([item])
    out = NBestList(sentence_id)
    for group in groups:
        for _, words, feats in sorted(group, key=lambda it: " ".join(it[1])):
            out.entries.append(NBestEntry(words, tuple(float(f) for f in feats), float(np.dot(wvec, feats))))
            if len(out.entries) == n:
                return out
    return out


def decode(pt: PhraseTable, lm: NGramModel, w: LogLinearWeights, src: Sentence,
           params: DecoderParams = DecoderParams()):
    """Best translation of ``src`` as (target tokens, feature vector)."""
    best = nbest(pt, lm, w, src, 1, params).entries[0]
    return best.target, best.features


class Translator:
    """A decoder handle: models, weights and search parameters bundled together."""

    def __init__(self, pt: PhraseTable, lm: NGramModel, weights: LogLinearWeights,
                 params: DecoderParams = DecoderParams(), cache_size: int = 4096):
        self.pt = pt
        self.lm = lm
        self.weights = weights
        self.params = params
        self.cache_size = cache_size
        self._cache: OrderedDict = OrderedDict()

    def with_weights(self, weights: LogLinearWeights) -> "Translator":
        return Translator(self.pt, self.lm, weights, self.params, self.cache_size)

    def beginner(self, factor: float = 0.8) -> "Translator":
        return self.with_weights(scale_lm_weight(self.weights, factor))

    def translate(self, src: Sentence) -> Sentence:
        src = tuple(src)
        hit = self._cache.get(src)
        if hit is not None:
            self._cache.move_to_end(src)
            return hit
        out, _ = decode(self.pt, self.lm, self.weights, src, self.params)
        if self.cache_size:
            self._cache[src] = out
            if len(self._cache) > self.cache_size:
                self._cache.popitem(last=False)
        return out

    def translate_all(self, sources: Iterable[Sentence]) -> list:
        return [self.translate(s) for s in sources]

    def nbest(self, src: Sentence, n: int, sentence_id: int = 0) -> NBestList:
        return nbest(self.pt, self.lm, self.weights, src, n, self.params, sentence_id)
