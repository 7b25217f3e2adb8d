"""Reference implementations used as oracles by several test modules."""

import math
import random

import numpy as np

from pairforge.decode import OOV_PENALTY, LogLinearWeights


def span_options(pt, src, table_limit=20):
    n = len(src)
    opts = {}
    for i in range(n):
        for j in range(i + 1, n + 1):
            entries = pt.get(src[i:j], table_limit)
            if entries:
                opts[(i, j)] = [(e.tgt, [math.log10(f) for f in e.features]) for e in entries]
        if (i, i + 1) not in opts:
            opts[(i, i + 1)] = [((src[i],), [OOV_PENALTY, 0.0, 0.0, 0.0])]
    return opts


def all_derivations(pt, lm, src, table_limit=20, distortion_limit=6):
    """Every complete derivation as (target words, feature vector)."""
    n = len(src)
    opts = span_options(pt, src, table_limit)
    full = (1 << n) - 1
    out = []

    def rec(cov, last_end, words, phrase_feats, dist):
        if cov == full:
            feats = phrase_feats + [lm.logprob(words), float(len(words)), dist]
            out.append((tuple(words), feats))
            return
        for (i, j), choices in opts.items():
            mask = ((1 << (j - i)) - 1) << i
            if cov & mask:
                continue
            jump = abs(i - last_end - 1)
            if jump > distortion_limit:
                continue
            for tgt, pf in choices:
                rec(cov | mask, j - 1, words + list(tgt), [a + b for a, b in zip(phrase_feats, pf)], dist - jump)

    rec(0, -1, [], [0.0] * 4, 0.0)
    return out


def exhaustive_best(pt, lm, w, src, table_limit=20, distortion_limit=6, eps=1e-9):
    wv = w.vector()
    scored = [(float(np.dot(wv, f)), words, f) for words, f in all_derivations(pt, lm, src, table_limit, distortion_limit)]
    top = max(s for s, _, _ in scored)
    tied = [(" ".join(words), words, f) for s, words, f in scored if s >= top - eps]
    return min(tied)[1]


def oracle_cases(vocab, count=100, max_len=4, seed=0):
    """Random short sources paired with random non-negative-lm weight vectors."""
    rng = random.Random(seed)
    cases = []
    for _ in range(count):
        n = rng.randint(1, max_len)
        src = tuple(rng.choice(vocab) for _ in range(n))
        w = LogLinearWeights(lm=rng.uniform(0.0, 1.0), phrase=tuple(rng.uniform(-0.2, 1.0) for _ in range(4)),
                             word_penalty=rng.uniform(-1.0, 1.0), distortion=rng.uniform(-0.2, 1.0))
        cases.append((src, w))
    return cases


def write_toy_project(root, n_parallel=1500, n_mono=200, n_seed=120, mix=None, seed=0, **extra):
    """Toy corpora plus a JSON config under ``root``; returns the config path."""
    import json
    from pathlib import Path

    from pairforge import toydata
    from pairforge.synth import corrupt
    from pairforge.textcore import ParallelCorpus

    root = Path(root)
    data = root / "data"
    data.mkdir(parents=True, exist_ok=True)
    parallel = toydata.generate(n_parallel, seed=seed + 1)
    toydata.write_corpus(parallel, data / "train")
    mono = toydata.generate(n_mono, seed=seed + 2)
    (data / "mono.src").write_text("".join(" ".join(s) + "\n" for s in mono.sources))
    (data / "mono.en").write_text("".join(" ".join(t) + "\n" for t in mono.targets))
    clean = toydata.generate(n_seed, seed=seed + 3).targets
    seed_pairs = ParallelCorpus.from_pairs(
        [(" ".join(t), " ".join(corrupt(t, seed=seed, source_id=i).poor)) for i, t in enumerate(clean)])
    toydata.write_corpus(seed_pairs, data / "seed", "correct", "erroneous")
    cfg = {
        "parallel_src": "data/train.src", "parallel_tgt": "data/train.en",
        "mono_src": "data/mono.src", "mono_tgt": "data/mono.en",
        "seed_correct": "data/seed.correct", "seed_erroneous": "data/seed.erroneous",
        "out_dir": "out", "seed": seed, "dev_size": 100, "mert_iterations": 2, "nbest_size": 20,
        "max_phrase_len": 4,
        "generator_mix": mix or {"SMT_GOLD": 1, "SMT_NMT": 1, "CORRUPTION": 1, "ROUND_TRIP": 1, "BACK_TRANSLATION": 1},
    }
    cfg.update(extra)
    path = root / "config.json"
    path.write_text(json.dumps(cfg, indent=2))
    return path


PIPELINE = ("train-lm", "align", "phrases", "tune", "synthesize")


# criterion number -> (passed, one-line summary); printed at the end of the run
ACCEPTANCE = {}


def verdict(number, title, ok, detail=""):
    ACCEPTANCE[number] = (bool(ok), f"{title}: {detail}" if detail else title)
    print(f"{'PASS' if ok else 'FAIL'} criterion {number}: {ACCEPTANCE[number][1]}")
    assert ok, f"criterion {number} failed: {detail}"
