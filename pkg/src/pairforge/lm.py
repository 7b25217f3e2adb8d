"""Interpolated Kneser-Ney n-gram language model with ARPA import/export.

Probabilities are stored the ARPA way: ``prob[ngram]`` is the fully
interpolated log10 probability of the n-gram's last word given its history,
``backoff[context]`` the log10 interpolation weight of that context.  Under
that encoding the usual backoff lookup reproduces the interpolated
distribution exactly, so trained and ARPA-loaded models share one query path.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from .errors import EmptyCorpus

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"
DISCOUNT = 0.75
# log10(0) stand-in used by ARPA writers for <s>
LOG_ZERO = -99.0


@dataclass(frozen=True)
class NGramModel:
    order: int
    prob: dict
    backoff: dict
    vocab: frozenset
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def predictable(self):
        """Words that can be generated, i.e. the vocabulary without ``<s>``."""
        return sorted(self.vocab - {BOS})

    def map_token(self, w: str) -> str:
        return w if w in self.vocab else UNK

    def word_logprob(self, w: str, context: tuple = ()) -> float:
        """log10 P(w | context); ``context`` is truncated to order-1 words."""
        w = self.map_token(w)
        if self.order > 1:
            context = tuple(self.map_token(c) for c in context[-(self.order - 1):])
        else:
            context = ()
        key = (context, w)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        acc = 0.0
        ctx = context
        while True:
            p = self.prob.get(ctx + (w,))
            if p is not None:
                acc += p
                break
            if not ctx:
                acc += LOG_ZERO
                break
            acc += self.backoff.get(ctx, 0.0)
            ctx = ctx[1:]
        self._cache[key] = acc
        return acc

    def start_state(self) -> tuple:
        return (BOS,) if self.order > 1 else ()

    def advance(self, state: tuple, w: str):
        """Score one word from an LM state; returns (log10 prob, next state)."""
        w = self.map_token(w)
        lp = self.word_logprob(w, state)
        if self.order == 1:
            return lp, ()
        return lp, (state + (w,))[-(self.order - 1):]

    def finish(self, state: tuple) -> float:
        return self.word_logprob(EOS, state)

    def logprob(self, sentence: Iterable[str]) -> float:
        state = self.start_state()
        total = 0.0
        for w in sentence:
            lp, state = self.advance(state, w)
            total += lp
        return total + self.finish(state)


def _map_unk(corpus):
    freq = Counter(w for sent in corpus for w in sent)
    return [tuple(w if freq[w] > 1 else UNK for w in sent) for sent in corpus]


def train_lm(corpus, order: int = 3, discount: float = DISCOUNT) -> NGramModel:
    corpus = [tuple(s) for s in corpus]
    if not corpus:
        raise EmptyCorpus("cannot train a language model on an empty corpus")
    if not 1 <= order <= 5:
        raise ValueError(f"order must be in 1..5, got {order}")
    corpus = _map_unk(corpus)

    raw = [Counter() for _ in range(order + 1)]
    for sent in corpus:
        padded = (BOS,) + sent + (EOS,)
        for k in range(1, order + 1):
            for i in range(len(padded) - k + 1):
                gram = padded[i:i + k]
                if k > 1 and gram[-1] == BOS:
                    continue
                if gram == (BOS,):
                    continue
                raw[k][gram] += 1

    # adjusted counts: raw at the top order and for <s>-initial grams, else continuation counts
    adjusted = [None] * (order + 1)
    adjusted[order] = raw[order]
    for k in range(order - 1, 0, -1):
        cont = Counter()
        for gram in raw[k + 1]:
            cont[gram[1:]] += 1
        adj = Counter()
        for gram, c in raw[k].items():
            adj[gram] = c if gram[0] == BOS else cont[gram]
        adjusted[k] = adj

    vocab = {BOS, EOS, UNK}
    vocab.update(g[0] for g in raw[1])
    predictable = sorted(vocab - {BOS})

    prob: dict = {}
    backoff: dict = {}

    uni = adjusted[1]
    total = sum(uni.values())
    types = sum(1 for c in uni.values() if c > 0)
    gamma = discount * types / total
    uniform = 1.0 / len(predictable)
    for w in predictable:
        c = uni.get((w,), 0)
        prob[(w,)] = math.log10(max(c - discount, 0.0) / total + gamma * uniform)
    prob[(BOS,)] = LOG_ZERO

    def lower(w, ctx):
        # log10 P(w | ctx) using the tables filled so far
        acc = 0.0
        while True:
            p = prob.get(ctx + (w,))
            if p is not None:
                return acc + p
            acc += backoff.get(ctx, 0.0)
            ctx = ctx[1:]

    for k in range(2, order + 1):
        totals = defaultdict(float)
        ntypes = Counter()
        for gram, c in adjusted[k].items():
            totals[gram[:-1]] += c
            ntypes[gram[:-1]] += 1
        for ctx in sorted(totals):
            backoff[ctx] = math.log10(discount * ntypes[ctx] / totals[ctx])
        for gram in sorted(adjusted[k]):
            ctx, w = gram[:-1], gram[-1]
            gamma = discount * ntypes[ctx] / totals[ctx]
            p = (adjusted[k][gram] - discount) / totals[ctx] + gamma * 10 ** lower(w, ctx[1:])
            prob[gram] = math.log10(p)

    return NGramModel(order, prob, backoff, frozenset(vocab))


def logprob(model: NGramModel, sentence) -> float:
    return model.logprob(sentence)


def perplexity(model: NGramModel, corpus) -> float:
    corpus = list(corpus)
    if not corpus:
        raise EmptyCorpus("perplexity of an empty corpus")
    total = 0.0
    events = 0
    for sent in corpus:
        total += model.logprob(sent)
        events += len(sent) + 1
    return 10 ** (-total / events)


# --------------------------------------------------------------------------
# ARPA


def write_arpa(model: NGramModel, path) -> None:
    by_order = defaultdict(list)
    for gram in model.prob:
        by_order[len(gram)].append(gram)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n\\data\\\n")
        for k in range(1, model.order + 1):
            fh.write(f"ngram {k}={len(by_order[k])}\n")
        for k in range(1, model.order + 1):
            fh.write(f"\n\\{k}-grams:\n")
            for gram in sorted(by_order[k]):
                line = f"{model.prob[gram]!r}\t{' '.join(gram)}"
                if gram in model.backoff:
                    line += f"\t{model.backoff[gram]!r}"
                fh.write(line + "\n")
        fh.write("\n\\end\\\n")


def read_arpa(path) -> NGramModel:
    prob: dict = {}
    backoff: dict = {}
    order = 0
    section = None
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line == "\\data\\":
                section = "data"
                continue
            if line == "\\end\\":
                break
            if line.startswith("\\") and line.endswith("-grams:"):
                section = int(line[1:].split("-")[0])
                order = max(order, section)
                continue
            if section == "data":
                if line.startswith("ngram "):
                    k = int(line[6:].split("=")[0])
                    order = max(order, k)
                continue
            if isinstance(section, int):
                parts = line.split("\t") if "\t" in line else line.split()
                if "\t" in line:
                    lp, words = float(parts[0]), tuple(parts[1].split())
                    bo = float(parts[2]) if len(parts) > 2 else None
                else:
                    lp = float(parts[0])
                    words = tuple(parts[1:1 + section])
                    bo = float(parts[1 + section]) if len(parts) > 1 + section else None
                prob[words] = lp
                if bo is not None:
                    backoff[words] = bo
    vocab = {g[0] for g in prob if len(g) == 1} | {BOS, EOS, UNK}
    return NGramModel(order, prob, backoff, frozenset(vocab))
