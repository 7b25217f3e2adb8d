"""BLEU, edit extraction, F-beta scoring and error-type profiling."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from . import kernels, morph
from .errors import EmptyInput, LengthMismatch
from .textcore import PUNCT, Sentence

MAX_ORDER = 4


# --------------------------------------------------------------------------
# BLEU


@dataclass
class BleuStats:
    matches: list = field(default_factory=lambda: [0] * MAX_ORDER)
    totals: list = field(default_factory=lambda: [0] * MAX_ORDER)
    hyp_len: int = 0
    ref_len: int = 0

    def __add__(self, other: "BleuStats") -> "BleuStats":
        return BleuStats(
            [a + b for a, b in zip(self.matches, other.matches)],
            [a + b for a, b in zip(self.totals, other.totals)],
            self.hyp_len + other.hyp_len,
            self.ref_len + other.ref_len,
        )

    def as_array(self) -> np.ndarray:
        return np.array([*self.matches, *self.totals, self.hyp_len, self.ref_len], dtype=np.int64)

    def precisions(self) -> list:
        return [m / t if t else 0.0 for m, t in zip(self.matches, self.totals)]

    def score(self) -> float:
        return bleu_from_array(self.as_array())


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def sentence_stats(ref: Sentence, hyp: Sentence) -> BleuStats:
    matches, totals = [], []
    for n in range(1, MAX_ORDER + 1):
        h = _ngrams(hyp, n)
        r = _ngrams(ref, n)
        matches.append(sum(min(c, r[g]) for g, c in h.items()))
        totals.append(max(len(hyp) - n + 1, 0))
    return BleuStats(matches, totals, len(hyp), len(ref))


def bleu_from_array(stats) -> float:
    """BLEU-4 (0-100) from [m1..m4, t1..t4, hyp_len, ref_len]; no smoothing."""
    m = stats[:MAX_ORDER]
    t = stats[MAX_ORDER:2 * MAX_ORDER]
    c, r = stats[-2], stats[-1]
    if c == 0 or any(mi == 0 for mi in m):
        return 0.0
    log_p = sum(math.log(mi / ti) for mi, ti in zip(m, t)) / MAX_ORDER
    bp = 0.0 if c >= r else 1.0 - r / c
    return 100.0 * math.exp(log_p + bp)


def corpus_stats(refs: Sequence[Sentence], hyps: Sequence[Sentence]) -> BleuStats:
    if len(refs) != len(hyps):
        raise LengthMismatch(f"{len(refs)} references but {len(hyps)} hypotheses")
    if not refs:
        raise EmptyInput("BLEU needs at least one sentence")
    total = BleuStats()
    for r, h in zip(refs, hyps):
        total = total + sentence_stats(tuple(r), tuple(h))
    return total


def bleu(refs: Sequence[Sentence], hyps: Sequence[Sentence]) -> float:
    return corpus_stats(refs, hyps).score()


# --------------------------------------------------------------------------
# edits


class ErrorType(str, Enum):
    VERB_FORM = "VERB_FORM"
    NOUN_NUM = "NOUN_NUM"
    DET = "DET"
    PREP = "PREP"
    ORTH = "ORTH"
    WORD_ORDER = "WORD_ORDER"
    MISSING = "MISSING"
    UNNECESSARY = "UNNECESSARY"
    OTHER = "OTHER"


@dataclass(frozen=True)
class Edit:
    start: int
    end: int
    replacement: tuple
    type: ErrorType = ErrorType.OTHER

    def __post_init__(self):
        object.__setattr__(self, "replacement", tuple(self.replacement))
        if self.start > self.end:
            raise ValueError(f"edit span [{self.start}, {self.end}) is reversed")
        if self.start == self.end and not self.replacement:
            raise ValueError("an edit must change something")

    @property
    def key(self) -> tuple:
        return self.start, self.end, self.replacement


@dataclass(frozen=True)
class EditScript:
    source: tuple
    edits: tuple = ()

    def apply(self) -> tuple:
        out = []
        pos = 0
        for e in self.edits:
            out.extend(self.source[pos:e.start])
            out.extend(e.replacement)
            pos = e.end
        out.extend(self.source[pos:])
        return tuple(out)


def _orth_key(tokens) -> str:
    return "".join(ch for tok in tokens for ch in tok.lower() if ch not in PUNCT)


def classify_edit(edit: Edit, source: Sentence) -> ErrorType:
    """First matching rule wins; OTHER is the catch-all."""
    orig = tuple(source[edit.start:edit.end])
    corr = edit.replacement
    if not orig:
        return ErrorType.MISSING
    if not corr:
        return ErrorType.UNNECESSARY
    if _orth_key(orig) == _orth_key(corr):
        return ErrorType.ORTH
    if len(orig) == 1 and len(corr) == 1:
        if morph.same_verb(orig[0], corr[0]):
            return ErrorType.VERB_FORM
        if morph.number_pair(orig[0], corr[0]):
            return ErrorType.NOUN_NUM
    lo = [t.lower() for t in orig]
    lc = [t.lower() for t in corr]
    dets = morph.determiners()
    if all(t in dets for t in lo) and all(t in dets for t in lc):
        return ErrorType.DET
    preps = morph.prepositions()
    if all(t in preps for t in lo) and all(t in preps for t in lc):
        return ErrorType.PREP
    if len(orig) > 1 and sorted(orig) == sorted(corr):
        return ErrorType.WORD_ORDER
    return ErrorType.OTHER


def extract_edits(source: Sentence, target: Sentence, classify: bool = True) -> EditScript:
    """Span edits turning ``source`` into ``target``.

    Levenshtein alignment (match > substitution > deletion > insertion on
    ties); runs of adjacent non-match operations become one edit.
    """
    source, target = tuple(source), tuple(target)
    if source == target:
        return EditScript(source, ())
    a, b = kernels.encode_pair(source, target)
    ops = kernels.edit_ops(a, b).tolist()
    edits = []
    i = j = 0
    k = 0
    n_ops = len(ops)
    while k < n_ops:
        if ops[k] == kernels.OP_MATCH:
            i += 1
            j += 1
            k += 1
            continue
        i0, j0 = i, j
        while k < n_ops and ops[k] != kernels.OP_MATCH:
            op = ops[k]
            if op == kernels.OP_SUB:
                i += 1
                j += 1
            elif op == kernels.OP_DEL:
                i += 1
            else:
                j += 1
            k += 1
        edit = Edit(i0, i, target[j0:j])
        if classify:
            edit = Edit(i0, i, edit.replacement, classify_edit(edit, source))
        edits.append(edit)
    return EditScript(source, tuple(edits))


def f_beta(system: Sequence[EditScript], gold: Sequence[EditScript], beta: float = 0.5):
    """Corpus (P, R, F) with exact span+correction matching, edit types ignored."""
    if len(system) != len(gold):
        raise LengthMismatch(f"{len(system)} system sentences but {len(gold)} gold sentences")
    if beta <= 0:
        raise ValueError("beta must be positive")
    tp = fp = fn = 0
    for sys_s, gold_s in zip(system, gold):
        s = {e.key for e in sys_s.edits}
        g = {e.key for e in gold_s.edits}
        tp += len(s & g)
        fp += len(s - g)
        fn += len(g - s)
    p = tp / (tp + fp) if tp + fp else 1.0
    r = tp / (tp + fn) if tp + fn else 1.0
    b2 = beta * beta
    denom = b2 * p + r
    f = (1 + b2) * p * r / denom if denom else 0.0
    return p, r, f


def error_stats(pairs: Iterable) -> dict:
    """Token error rate, share of rule-typed edits and a per-type histogram.

    ``pairs`` yields objects with ``poor``/``good`` attributes or
    (poor, good) tuples; edits run from the poor side to the good side.
    """
    total_tokens = 0
    edited_tokens = 0
    n_edits = 0
    typed = 0
    per_type = Counter()
    n_pairs = 0
    for item in pairs:
        poor, good = (item.poor, item.good) if hasattr(item, "poor") else (item[0], item[1])
        n_pairs += 1
        script = extract_edits(poor, good)
        total_tokens += len(poor)
        for e in script.edits:
            edited_tokens += e.end - e.start
            n_edits += 1
            per_type[e.type.value] += 1
            if e.type is not ErrorType.OTHER:
                typed += 1
    if n_pairs == 0:
        raise EmptyInput("error statistics need at least one pair")
    return {
        "pairs": n_pairs,
        "tokens": total_tokens,
        "edits": n_edits,
        "error_rate": 100.0 * edited_tokens / total_tokens if total_tokens else 0.0,
        "pct_in_rules": 100.0 * typed / n_edits if n_edits else 100.0,
        "per_type_counts": {t.value: per_type.get(t.value, 0) for t in ErrorType},
    }


# --------------------------------------------------------------------------
# M2


def write_m2(fh, scripts: Iterable[EditScript]) -> None:
    first = True
    for script in scripts:
        if not first:
            fh.write("\n")
        first = False
        fh.write("S " + " ".join(script.source) + "\n")
        for e in script.edits:
            fh.write(f"A {e.start} {e.end}|||{e.type.value}|||{' '.join(e.replacement)}|||REQUIRED|||-NONE-|||0\n")
    if not first:
        fh.write("\n")


def parse_m2(text: str) -> list:
    scripts = []
    source = None
    edits = []
    for line in text.splitlines():
        if line.startswith("S "):
            source = tuple(line[2:].split())
            edits = []
        elif line.startswith("A "):
            fields = line[2:].split("|||")
            start, end = (int(x) for x in fields[0].split())
            if start < 0:
                continue
            try:
                etype = ErrorType(fields[1])
            except ValueError:
                etype = ErrorType.OTHER
            edits.append(Edit(start, end, tuple(fields[2].split()), etype))
        elif not line.strip() and source is not None:
            scripts.append(EditScript(source, tuple(edits)))
            source = None
    if source is not None:
        scripts.append(EditScript(source, tuple(edits)))
    return scripts


def read_m2(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return parse_m2(fh.read())
