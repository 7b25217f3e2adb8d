"""Poor-to-good pair synthesis, baseline generators, filtering and writers.

Everything here streams: sources are consumed in fixed-size batches and
records are yielded as soon as they exist, so memory is bounded by the
batch size and the decoder cache rather than by corpus length.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from enum import Enum
from itertools import islice
from pathlib import Path
from typing import Callable, Iterable, Iterator

from . import metrics, morph
from .align import align_corpus, build_phrase_table
from .decode import DecoderParams, LogLinearWeights, Translator
from .errors import ConfigError, EmptyCorpus, EmptySource
from .lm import train_lm
from .mert import mert_tune, sample_dev
from .mtclient import good_sentences
from .textcore import ParallelCorpus, Sentence, edit_rate

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.6
BATCH_SIZE = 256


class Generator(str, Enum):
    SMT_NMT = "SMT_NMT"
    SMT_GOLD = "SMT_GOLD"
    CORRUPTION = "CORRUPTION"
    ROUND_TRIP = "ROUND_TRIP"
    BACK_TRANSLATION = "BACK_TRANSLATION"


@dataclass(frozen=True)
class PairRecord:
    poor: tuple
    good: tuple
    generator: Generator
    edit_rate: float
    source_id: int = 0

    @classmethod
    def make(cls, poor, good, generator, source_id: int = 0) -> "PairRecord":
        poor, good = tuple(poor), tuple(good)
        return cls(poor, good, Generator(generator), edit_rate(poor, good), source_id)

    def tsv(self) -> str:
        return f"{' '.join(self.poor)}\t{' '.join(self.good)}\t{self.generator.value}\t{self.edit_rate!r}"


# --------------------------------------------------------------------------
# rule-based corruption

ACTIONS = ("delete", "duplicate", "swap-adjacent", "inflection-substitute", "determiner-drop")


def _is_word(tok: str) -> bool:
    return any(ch.isalnum() for ch in tok)


def _inflections(tokens, i):
    """Candidate replacements for tokens[i] that stay rule-typed."""
    w = tokens[i]
    low = w.lower()
    if not low.isalpha():
        return []
    lemmas = morph.verb_lemmas(low)
    if lemmas:
        forms = {f for base in sorted(lemmas) for f in morph.verb_forms(base)}
        return sorted(f for f in forms if f != low and morph.same_verb(low, f))
    # a noun is guessed from a preceding determiner; only singular -> plural
    if i > 0 and tokens[i - 1].lower() in morph.determiners() and low not in morph.determiners() \
            and low not in morph.prepositions() and not low.endswith("s") and len(low) > 2:
        return [morph.plural(low)]
    return []


def _default_match(action: str) -> Callable:
    if action == "determiner-drop":
        return lambda toks, i: toks[i].lower() in morph.determiners()
    if action == "inflection-substitute":
        return lambda toks, i: bool(_inflections(toks, i))
    if action == "swap-adjacent":
        return lambda toks, i: i + 1 < len(toks) and toks[i] != toks[i + 1] and _is_word(toks[i]) and _is_word(toks[i + 1])
    if action == "duplicate":
        return lambda toks, i: _is_word(toks[i])
    return lambda toks, i: True


@dataclass(frozen=True)
class CorruptionRule:
    action: str
    probability: float
    match: Callable = None

    def __post_init__(self):
        if self.action not in ACTIONS:
            raise ConfigError(f"corruption.{self.action}", "unknown action")
        if not 0.0 <= self.probability <= 1.0:
            raise ConfigError(f"corruption.{self.action}", f"probability {self.probability} outside [0, 1]")
        if self.match is None:
            object.__setattr__(self, "match", _default_match(self.action))


@dataclass(frozen=True)
class CorruptionRuleSet:
    rules: tuple

    @classmethod
    def default(cls) -> "CorruptionRuleSet":
        return cls.from_probabilities({"determiner-drop": 0.15, "inflection-substitute": 0.15,
                                       "swap-adjacent": 0.05, "duplicate": 0.05, "delete": 0.1})

    @classmethod
    def from_probabilities(cls, probs) -> "CorruptionRuleSet":
        """From a mapping action -> probability (insertion order is rule order)
        or a list of {"action": ..., "probability": ...} objects."""
        if isinstance(probs, dict):
            items = list(probs.items())
        else:
            items = [(r["action"], r["probability"]) for r in probs]
        return cls(tuple(CorruptionRule(a, float(p)) for a, p in items))

    def to_json(self) -> list:
        return [{"action": r.action, "probability": r.probability} for r in self.rules]


def _apply_rules(tokens: tuple, rules: CorruptionRuleSet, rng: random.Random):
    # one output slot per input token; touched slots never sit next to each other
    # so neighbouring corruptions cannot merge into a single untyped edit
    slots = [[t] for t in tokens]
    touched = [False] * len(tokens)
    history = []

    def free(*idx):
        return all(0 <= j < len(slots) and not touched[j] for j in idx) and \
            not any(touched[j] for k in idx for j in (k - 1, k + 1) if 0 <= j < len(slots) and j not in idx)

    for rule in rules.rules:
        if rule.probability <= 0.0:
            continue
        for i in range(len(tokens)):
            span = (i, i + 1) if rule.action == "swap-adjacent" else (i,)
            if not free(*span) or not rule.match(tokens, i):
                continue
            if rng.random() >= rule.probability:
                continue
            before = [list(slots[j]) for j in span]
            if rule.action in ("delete", "determiner-drop"):
                if sum(len(s) for s in slots) <= 1:
                    continue
                slots[i] = []
            elif rule.action == "duplicate":
                slots[i] = [tokens[i], tokens[i]]
            elif rule.action == "swap-adjacent":
                slots[i], slots[i + 1] = [tokens[i + 1]], [tokens[i]]
            else:
                slots[i] = [rng.choice(_inflections(tokens, i))]
            for j in span:
                touched[j] = True
            history.append((span, before))
    return slots, touched, history


def corrupt(sentence: Sentence, rules: CorruptionRuleSet | None = None, seed=0, source_id: int = 0) -> PairRecord:
    """Noise a clean sentence with the ordered rule set.

    Randomness comes from ``random.Random(f"{seed}:{source_id}")`` so a
    sentence's corruption does not depend on what was processed before it.
    If Levenshtein re-alignment would still merge two corruptions into an
    untyped edit, the most recent corruptions are undone until every edit
    is typed.
    """
    tokens = tuple(sentence)
    if not tokens:
        raise EmptySource("cannot corrupt an empty sentence")
    rules = rules or CorruptionRuleSet.default()
    rng = random.Random(f"{seed}:{source_id}")
    slots, touched, history = _apply_rules(tokens, rules, rng)
    while True:
        poor = tuple(t for s in slots for t in s)
        script = metrics.extract_edits(poor, tokens)
        if all(e.type is not metrics.ErrorType.OTHER for e in script.edits) or not history:
            break
        span, before = history.pop()
        for j, old in zip(span, before):
            slots[j] = old
    return PairRecord.make(poor, tokens, Generator.CORRUPTION, source_id)


# --------------------------------------------------------------------------
# translation-based generators


def roundtrip(sentence: Sentence, fwd: Translator, rev: Translator, source_id: int = 0) -> PairRecord:
    """poor = rev(fwd(sentence)); good = sentence."""
    sentence = tuple(sentence)
    bridge = fwd.translate(sentence)
    return PairRecord.make(rev.translate(bridge), sentence, Generator.ROUND_TRIP, source_id)


def train_system(corpus: ParallelCorpus, lm_order: int = 3, iterations: int = 5, max_phrase_len: int = 7,
                 params: DecoderParams = DecoderParams(), dev: ParallelCorpus | None = None,
                 init: LogLinearWeights | None = None, seed: int = 0, outer_iters: int = 10,
                 dev_size: int = 200) -> Translator:
    """Align, extract phrases, train a target-side LM and tune with MERT.

    Without an explicit dev set, up to ``dev_size`` pairs are sampled from the
    training corpus itself (they stay in training: seed corpora are small).
    """
    if not len(corpus):
        raise EmptyCorpus("cannot train a translation system on an empty corpus")
    fwd, rev, alignments = align_corpus(corpus, iterations)
    pt = build_phrase_table(corpus, alignments, max_phrase_len, fwd, rev)
    lm = train_lm(corpus.targets, lm_order)
    init = init or LogLinearWeights()
    translator = Translator(pt, lm, init, params)
    if dev is None:
        dev, _ = sample_dev(corpus, dev_size, seed)
    weights = mert_tune(dev, translator, init, outer_iters=outer_iters, seed=seed)
    return translator.with_weights(weights)


def train_error_generator(seed_pairs: ParallelCorpus, **kwargs) -> Translator:
    """A corrected -> erroneous translator trained on seed GEC pairs."""
    return train_system(seed_pairs, **kwargs)


def _batches(it: Iterable, size: int) -> Iterator[list]:
    it = iter(it)
    while True:
        chunk = list(islice(it, size))
        if not chunk:
            return
        yield chunk


def translate_pairs(sources: Iterable[Sentence], beginner: Translator, good, start_id: int = 0,
                    batch_size: int = BATCH_SIZE) -> Iterator[PairRecord]:
    """Unfiltered poor/good records; poor from the beginner, good from the provider."""
    tag = Generator(good.tag)
    sid = start_id
    for chunk in _batches(sources, batch_size):
        chunk = [tuple(s) for s in chunk]
        ids = list(range(sid, sid + len(chunk)))
        goods = good_sentences(good, chunk, ids)
        for i, src, g in zip(ids, chunk, goods):
            yield PairRecord.make(beginner.translate(src), g, tag, i)
        sid += len(chunk)


def corrupt_pairs(sentences: Iterable[Sentence], rules: CorruptionRuleSet | None = None, seed=0,
                  start_id: int = 0) -> Iterator[PairRecord]:
    rules = rules or CorruptionRuleSet.default()
    for i, s in enumerate(sentences, start_id):
        yield corrupt(s, rules, seed, i)


def roundtrip_pairs(sentences: Iterable[Sentence], fwd: Translator, rev: Translator,
                    start_id: int = 0) -> Iterator[PairRecord]:
    for i, s in enumerate(sentences, start_id):
        yield roundtrip(s, fwd, rev, i)


def back_translation_pairs(sentences: Iterable[Sentence], generator: Translator,
                           start_id: int = 0) -> Iterator[PairRecord]:
    for i, s in enumerate(sentences, start_id):
        s = tuple(s)
        yield PairRecord.make(generator.translate(s), s, Generator.BACK_TRANSLATION, i)


# --------------------------------------------------------------------------
# filtering


@dataclass
class DropReport:
    threshold: float | None
    total: int = 0
    dropped: int = 0
    per_generator: dict = field(default_factory=dict)

    @property
    def retained(self) -> int:
        return self.total - self.dropped

    def count(self, record: PairRecord, kept: bool) -> None:
        entry = self.per_generator.setdefault(record.generator.value, {"total": 0, "retained": 0, "dropped": 0})
        entry["total"] += 1
        self.total += 1
        if kept:
            entry["retained"] += 1
        else:
            entry["dropped"] += 1
            self.dropped += 1

    def to_json(self) -> dict:
        return {
            "threshold": self.threshold,
            "total": self.total,
            "retained": self.retained,
            "dropped": self.dropped,
            "per_generator": {g.value: self.per_generator[g.value] for g in Generator if g.value in self.per_generator},
        }


def filter_pairs(records: Iterable[PairRecord], threshold: float | None = DEFAULT_THRESHOLD,
                 report: DropReport | None = None):
    """Drop records whose edit rate is strictly above ``threshold``.

    Returns (retained iterator, report).  The report fills in as the
    iterator is consumed.  ``threshold=None`` keeps everything.
    """
    if threshold is not None and threshold <= 0:
        raise ValueError("threshold must be positive")
    report = report if report is not None else DropReport(threshold)

    def run():
        for rec in records:
            kept = threshold is None or rec.edit_rate <= threshold
            report.count(rec, kept)
            if kept:
                yield rec

    return run(), report


def generate_pairs(sources: Iterable[Sentence], beginner: Translator, good, threshold: float | None = DEFAULT_THRESHOLD,
                   report: DropReport | None = None, batch_size: int = BATCH_SIZE):
    """translate_pairs followed by filter_pairs; returns (retained iterator, report)."""
    return filter_pairs(translate_pairs(sources, beginner, good, batch_size=batch_size), threshold, report)


# --------------------------------------------------------------------------
# output


class PairWriter:
    """Ordered sink writing TSV, M2 and two aligned text files side by side."""

    def __init__(self, prefix):
        prefix = Path(prefix)
        self.paths = {
            "tsv": prefix.with_name(prefix.name + ".tsv"),
            "m2": prefix.with_name(prefix.name + ".m2"),
            "poor": prefix.with_name(prefix.name + ".poor.txt"),
            "good": prefix.with_name(prefix.name + ".good.txt"),
        }
        self._fh = {}
        self.count = 0

    def __enter__(self):
        self._fh = {k: open(p, "w", encoding="utf-8", newline="\n") for k, p in self.paths.items()}
        return self

    def __exit__(self, *exc):
        for fh in self._fh.values():
            fh.close()
        return False

    def write(self, rec: PairRecord) -> None:
        fh = self._fh
        fh["tsv"].write(rec.tsv() + "\n")
        metrics.write_m2(fh["m2"], [metrics.extract_edits(rec.poor, rec.good)])
        fh["poor"].write(" ".join(rec.poor) + "\n")
        fh["good"].write(" ".join(rec.good) + "\n")
        self.count += 1

    def write_all(self, records: Iterable[PairRecord]) -> int:
        n = 0
        for rec in records:
            self.write(rec)
            n += 1
        return n


def read_pairs_tsv(path) -> Iterator[PairRecord]:
    """Stream records back from the TSV format (edit rate as stored)."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 4:
                raise ValueError(f"{path}:{lineno + 1}: expected 4 tab-separated columns")
            yield PairRecord(tuple(cols[0].split()), tuple(cols[1].split()), Generator(cols[2]), float(cols[3]), lineno)


def mix_quotas(mix: dict, available: dict, limit: int | None = None) -> dict:
    """Per-generator record counts honouring the mix ratio.

    ``available`` maps generator -> number of input sentences.  The total is
    the largest one every enabled generator can supply at its share.
    """
    enabled = {g: w for g, w in mix.items() if w > 0 and available.get(g, 0) > 0}
    if not enabled:
        raise ConfigError("generator_mix", "no generator has both a positive share and an input")
    z = sum(enabled.values())
    total = min(available[g] * z / w for g, w in enabled.items())
    if limit is not None:
        total = min(total, limit)
    # integer arithmetic after rounding the shares keeps the result platform independent
    return {g: min(available[g], int(total * w / z + 1e-9)) for g, w in enabled.items()}


def take(it: Iterable, n: int | None) -> Iterator:
    return iter(it) if n is None else islice(it, n)

