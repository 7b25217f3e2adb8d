"""Minimum error rate training with exact line search over n-best envelopes."""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field

import numpy as np

from .decode import N_FEATURES, LogLinearWeights, Translator
from .errors import EmptyPool
from .metrics import MAX_ORDER, sentence_stats
from .textcore import ParallelCorpus

log = logging.getLogger(__name__)

IMPROVE_EPS = 1e-9


def bleu_rows(stats: np.ndarray) -> np.ndarray:
    """Vectorized BLEU-4 (0-100) for each row of [m1..m4, t1..t4, c, r]."""
    stats = np.atleast_2d(stats).astype(np.float64)
    m = stats[:, :MAX_ORDER]
    t = stats[:, MAX_ORDER:2 * MAX_ORDER]
    c = stats[:, -2]
    r = stats[:, -1]
    ok = (c > 0) & np.all(m > 0, axis=1)
    out = np.zeros(stats.shape[0])
    if not ok.any():
        return out
    mo, to, co, ro = m[ok], t[ok], c[ok], r[ok]
    log_p = np.log(mo / to).sum(axis=1) / MAX_ORDER
    bp = np.where(co >= ro, 0.0, 1.0 - ro / np.maximum(co, 1e-300))
    out[ok] = 100.0 * np.exp(log_p + bp)
    return out


class NBestPool:
    """Accumulated n-best hypotheses per dev sentence with BLEU statistics."""

    def __init__(self, refs):
        self.refs = [tuple(r) for r in refs]
        self.targets = [[] for _ in self.refs]
        self._feats = [[] for _ in self.refs]
        self._stats = [[] for _ in self.refs]
        self._keys = [set() for _ in self.refs]
        self._arrays = None

    def __len__(self):
        return sum(len(t) for t in self.targets)

    def add(self, sid: int, target, features) -> bool:
        key = (tuple(target), tuple(round(float(f), 9) for f in features))
        if key in self._keys[sid]:
            return False
        self._keys[sid].add(key)
        self.targets[sid].append(tuple(target))
        self._feats[sid].append(np.asarray(features, dtype=np.float64))
        self._stats[sid].append(sentence_stats(self.refs[sid], tuple(target)).as_array())
        self._arrays = None
        return True

    def sizes(self) -> list:
        return [len(t) for t in self.targets]

    def arrays(self, sizes=None):
        """Per-sentence (features H x 7, stats H x 10) arrays, optionally truncated."""
        if sizes is None and self._arrays is not None:
            return self._arrays
        out = []
        for sid in range(len(self.refs)):
            k = len(self.targets[sid]) if sizes is None else sizes[sid]
            if k == 0:
                out.append((np.zeros((0, N_FEATURES)), np.zeros((0, 2 * MAX_ORDER + 2), dtype=np.int64)))
            else:
                out.append((np.vstack(self._feats[sid][:k]), np.vstack(self._stats[sid][:k])))
        if sizes is None:
            self._arrays = out
        return out

    def select(self, w, sizes=None) -> list:
        """Index of the best hypothesis per sentence (lowest index on ties)."""
        wv = w.vector() if isinstance(w, LogLinearWeights) else np.asarray(w, dtype=np.float64)
        return [int(np.argmax(F @ wv)) if len(F) else -1 for F, _ in self.arrays(sizes)]

    def bleu(self, w, sizes=None) -> float:
        arrays = self.arrays(sizes)
        total = np.zeros(2 * MAX_ORDER + 2, dtype=np.int64)
        for (F, S), idx in zip(arrays, self.select(w, sizes)):
            if idx >= 0:
                total += S[idx]
        return float(bleu_rows(total)[0])


def _envelope(a: np.ndarray, b: np.ndarray):
    """Upper envelope of lines a + gamma * b as [(start_gamma, index)], left to right."""
    order = np.lexsort((np.arange(len(a)), -a, b))
    hull = []
    for idx in order:
        if hull and b[idx] == b[hull[-1][1]]:
            continue
        x = -math.inf
        while hull:
            top = hull[-1][1]
            x = (a[top] - a[idx]) / (b[idx] - b[top])
            if x <= hull[-1][0]:
                hull.pop()
                x = -math.inf
            else:
                break
        hull.append((x, int(idx)))
    return hull


def _sweep(arrays, wv, dv, lo=-math.inf, hi=math.inf):
    """Intervals [left, right) of gamma in (lo, hi) with their corpus BLEU."""
    base = np.zeros(2 * MAX_ORDER + 2, dtype=np.int64)
    ev_x = []
    ev_delta = []
    for F, S in arrays:
        if not len(F):
            continue
        hull = _envelope(F @ wv, F @ dv)
        k = 0
        while k + 1 < len(hull) and hull[k + 1][0] <= lo:
            k += 1
        base += S[hull[k][1]]
        prev = hull[k][1]
        for x, idx in hull[k + 1:]:
            if x >= hi:
                break
            ev_x.append(x)
            ev_delta.append(S[idx] - S[prev])
            prev = idx
    if not ev_x:
        return [lo], [hi], bleu_rows(base)
    ev_x = np.asarray(ev_x)
    ev_delta = np.vstack(ev_delta)
    order = np.argsort(ev_x, kind="stable")
    ev_x = ev_x[order]
    cum = np.cumsum(ev_delta[order], axis=0)
    # collapse events sharing one gamma: keep the stats after the last of them
    last = np.r_[ev_x[1:] != ev_x[:-1], True]
    xs = ev_x[last]
    stats = np.vstack([base, base + cum[last]])
    lefts = [lo, *xs.tolist()]
    rights = [*xs.tolist(), hi]
    return lefts, rights, bleu_rows(stats)


def _midpoint(left: float, right: float) -> float:
    if math.isinf(left) and math.isinf(right):
        return 0.0
    if math.isinf(left):
        return right - 1.0
    if math.isinf(right):
        return left + 1.0
    return 0.5 * (left + right)


def _as_arrays(pool, refs):
    if isinstance(pool, NBestPool):
        return pool.arrays()
    if refs is None:
        raise ValueError("references are required for a raw n-best pool")
    arrays = []
    for hyps, ref in zip(pool, refs):
        if not hyps:
            arrays.append((np.zeros((0, N_FEATURES)), np.zeros((0, 2 * MAX_ORDER + 2), dtype=np.int64)))
            continue
        F = np.vstack([np.asarray(f, dtype=np.float64) for _, f in hyps])
        S = np.vstack([sentence_stats(tuple(ref), tuple(t)).as_array() for t, _ in hyps])
        arrays.append((F, S))
    return arrays


def line_search(pool, refs, w, direction, lo: float = -math.inf, hi: float = math.inf):
    """Exact BLEU line search along ``w + gamma * direction``.

    ``pool`` is an :class:`NBestPool` or a list (one per sentence) of
    (target, features) lists.  Returns (gamma*, BLEU at gamma*).  gamma* is
    0 unless some interval strictly beats the current weights; otherwise it
    is the midpoint of the best interval (unbounded sides use boundary +/- 1).
    """
    arrays = _as_arrays(pool, refs)
    if not arrays or all(len(F) == 0 for F, _ in arrays):
        raise EmptyPool("line search over an empty n-best pool")
    wv = w.vector() if isinstance(w, LogLinearWeights) else np.asarray(w, dtype=np.float64)
    dv = np.asarray(direction, dtype=np.float64)
    lefts, rights, scores = _sweep(arrays, wv, dv, lo, hi)

    total = np.zeros(2 * MAX_ORDER + 2, dtype=np.int64)
    for F, S in arrays:
        if len(F):
            total += S[int(np.argmax(F @ wv))]
    current = float(bleu_rows(total)[0])

    best = float(scores.max())
    if best <= current + IMPROVE_EPS:
        return 0.0, current
    candidates = [k for k in range(len(scores)) if scores[k] >= best - 1e-12]
    k = min(candidates, key=lambda i: abs(_midpoint(lefts[i], rights[i])))
    return _midpoint(lefts[k], rights[k]), float(scores[k])


def _lm_bounds(wv: np.ndarray, dv: np.ndarray):
    # keep lm + gamma * d_lm >= 0
    lm, d = wv[4], dv[4]
    if d > 0:
        return -lm / d, math.inf
    if d < 0:
        return -math.inf, lm / -d
    return -math.inf, math.inf


def directions(rng: np.random.Generator, count: int) -> list:
    out = [np.eye(N_FEATURES)[i] for i in range(N_FEATURES)]
    for _ in range(max(count - N_FEATURES, 0)):
        v = rng.standard_normal(N_FEATURES)
        out.append(v / np.linalg.norm(v))
    return out[:max(count, N_FEATURES)]


def optimize(pool: NBestPool, start: LogLinearWeights, dirs, max_sweeps: int = 30):
    """Greedy coordinate/random-direction ascent of pooled BLEU from ``start``."""
    wv = start.vector()
    current = pool.bleu(wv)
    for _ in range(max_sweeps):
        best = (current, None, 0.0)
        for d in dirs:
            lo, hi = _lm_bounds(wv, d)
            gamma, score = line_search(pool, None, wv, d, lo, hi)
            if gamma != 0.0 and score > best[0] + IMPROVE_EPS:
                best = (score, d, gamma)
        if best[1] is None:
            break
        cand = wv + best[2] * best[1]
        cand[4] = max(cand[4], 0.0)
        score = pool.bleu(cand)
        if score <= current + IMPROVE_EPS:
            break
        wv, current = cand, score
    return LogLinearWeights.from_vector(wv), current


@dataclass
class MertState:
    weights: LogLinearWeights
    pool: NBestPool
    iteration: int = 0
    dev_bleu_history: list = field(default_factory=list)
    pool_sizes: list = field(default_factory=list)
    log: list = field(default_factory=list)

    def write_log(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("iteration,dev_bleu\n")
            for it, b in self.log:
                fh.write(f"{it},{b!r}\n")


def mert_run(dev: ParallelCorpus, translator: Translator, init: LogLinearWeights,
             outer_iters: int = 10, directions_per_iter: int = 12, seed: int = 0,
             nbest_size: int = 100) -> MertState:
    """Full tuning loop; returns the state of the best accepted iteration.

    Each outer iteration decodes the dev sources with the current weights,
    merges the n-best lists into the pool and re-optimizes from the current,
    best-accepted and initial weights.  New weights are accepted only if
    their pooled BLEU is at least the previously accepted value, so
    ``dev_bleu_history`` never decreases.
    """
    if not len(dev):
        raise EmptyPool("empty development set")
    if outer_iters < 1:
        raise ValueError("outer_iters must be >= 1")
    rng = np.random.default_rng(seed)
    pool = NBestPool(dev.targets)
    sources = dev.sources
    current = init
    state = MertState(init, pool)
    for it in range(1, outer_iters + 1):
        tr = translator.with_weights(current)
        added = 0
        for sid, src in enumerate(sources):
            for entry in tr.nbest(src, nbest_size, sid).entries:
                added += pool.add(sid, entry.target, entry.features)
        if added == 0:
            log.info("mert iteration %d: no new hypotheses, stopping", it)
            break
        dirs = directions(rng, directions_per_iter)
        starts = [current]
        if state.dev_bleu_history:
            starts.append(state.weights)
        starts.append(init)
        best_w, best_b = None, -1.0
        for start in starts:
            w_opt, b_opt = optimize(pool, start, dirs)
            if b_opt > best_b + IMPROVE_EPS:
                best_w, best_b = w_opt, b_opt
        current = best_w.l1_normalized()
        score = pool.bleu(current)
        log.info("mert iteration %d: pool=%d pooled BLEU=%.4f", it, len(pool), score)
        if not state.dev_bleu_history or score >= state.dev_bleu_history[-1]:
            state.weights = current
            state.iteration = it
            state.dev_bleu_history.append(score)
            state.pool_sizes = pool.sizes()
            state.log.append((it, score))
    return state


def mert_tune(dev: ParallelCorpus, translator: Translator, init: LogLinearWeights,
              outer_iters: int = 10, directions_per_iter: int = 12, seed: int = 0,
              nbest_size: int = 100) -> LogLinearWeights:
    return mert_run(dev, translator, init, outer_iters, directions_per_iter, seed, nbest_size).weights


def sample_dev(corpus: ParallelCorpus, size: int = 5000, seed: int = 0):
    """Split off a random dev set; returns (dev, remainder), both in corpus order."""
    n = len(corpus)
    size = min(size, n)
    picked = set(random.Random(seed).sample(range(n), size))
    dev = tuple(p for i, p in enumerate(corpus.pairs) if i in picked)
    rest = tuple(p for i, p in enumerate(corpus.pairs) if i not in picked)
    return ParallelCorpus(dev, f"{corpus.name}.dev"), ParallelCorpus(rest, f"{corpus.name}.train")
