import io
import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from pairforge.errors import EmptyInput, LengthMismatch
from pairforge.metrics import (Edit, EditScript, ErrorType, bleu, classify_edit, corpus_stats, error_stats,
                               extract_edits, f_beta, parse_m2, sentence_stats, write_m2)


def S(text):
    return tuple(text.split())


# --- BLEU ---------------------------------------------------------------------

def test_identity_is_100():
    refs = [S("the cat sat on the mat"), S("a b c d e")]
    assert bleu(refs, refs) == 100.0


def test_clipped_unigram_precision():
    st_ = sentence_stats(S("the cat"), S("the the the"))
    assert (st_.matches[0], st_.totals[0]) == (1, 3)
    assert st_.precisions()[0] == 1 / 3


def test_brevity_penalty():
    got = bleu([S("a b c d e f")], [S("a b c d e")])
    assert got == pytest.approx(100 * math.exp(1 - 6 / 5))


def test_zero_precision_gives_zero():
    assert bleu([S("a b c d")], [S("a b c x")]) == 0.0


def test_bleu_errors():
    with pytest.raises(LengthMismatch):
        bleu([S("a")], [])
    with pytest.raises(EmptyInput):
        bleu([], [])


sents = st.lists(st.sampled_from("abcde"), min_size=1, max_size=8).map(tuple)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(sents, sents), min_size=2, max_size=6), st.data())
def test_stats_are_additive(pairs, data):
    k = data.draw(st.integers(1, len(pairs) - 1))
    refs, hyps = [p[0] for p in pairs], [p[1] for p in pairs]
    whole = corpus_stats(refs, hyps)
    parts = corpus_stats(refs[:k], hyps[:k]) + corpus_stats(refs[k:], hyps[k:])
    assert whole == parts
    assert all(m <= t for m, t in zip(whole.matches, whole.totals))


# --- edit extraction ------------------------------------------------------------

def test_identical_has_no_edits():
    assert extract_edits(S("a b c"), S("a b c")).edits == ()


def test_merged_span():
    script = extract_edits(S("We should keep a body healthy ."), S("We should stay healthy ."))
    assert [(e.start, e.end, e.replacement) for e in script.edits] == [(2, 5, ("stay",))]


def test_single_insertion():
    script = extract_edits(S("a b"), S("a c b"))
    assert [(e.start, e.end, e.replacement) for e in script.edits] == [(1, 1, ("c",))]
    assert script.edits[0].type is ErrorType.MISSING


def test_edit_invariants():
    with pytest.raises(ValueError):
        Edit(2, 1, ())
    with pytest.raises(ValueError):
        Edit(1, 1, ())


def test_apply_invariant_fuzz():
    rng = random.Random(0)
    vocab = list("abcdefg") + ["the", "a", "in", "on", "goes", "go"]
    for _ in range(10_000):
        src = tuple(rng.choice(vocab) for _ in range(rng.randint(0, 9)))
        tgt = tuple(rng.choice(vocab) for _ in range(rng.randint(0, 9)))
        script = extract_edits(src, tgt, classify=False)
        assert script.apply() == tgt


@settings(max_examples=300, deadline=None)
@given(st.lists(st.sampled_from("abc"), max_size=8).map(tuple), st.lists(st.sampled_from("abc"), max_size=8).map(tuple))
def test_edits_are_ordered_and_disjoint(src, tgt):
    script = extract_edits(src, tgt)
    assert script.apply() == tgt
    ends = [(e.start, e.end) for e in script.edits]
    assert all(a[1] <= b[0] for a, b in zip(ends, ends[1:]))
    assert all(isinstance(e.type, ErrorType) for e in script.edits)


# --- classification ---------------------------------------------------------------

@pytest.mark.parametrize("src, start, end, repl, expected", [
    ("he go home", 1, 2, "goes", ErrorType.VERB_FORM),
    ("he went home", 1, 2, "goes", ErrorType.VERB_FORM),
    ("cat sat", 0, 0, "the", ErrorType.MISSING),
    ("the the cat", 1, 2, "", ErrorType.UNNECESSARY),
    ("cat dog", 0, 2, "dog cat", ErrorType.WORD_ORDER),
    ("The cat", 0, 1, "the", ErrorType.ORTH),
    ("two cat", 1, 2, "cats", ErrorType.NOUN_NUM),
    ("a apple", 0, 1, "an", ErrorType.DET),
    ("in monday", 0, 1, "on", ErrorType.PREP),
    ("the cat", 1, 2, "dog", ErrorType.OTHER),
])
def test_classify(src, start, end, repl, expected):
    assert classify_edit(Edit(start, end, S(repl)), S(src)) is expected


# --- F-beta ---------------------------------------------------------------------

def script(src, *edits):
    return EditScript(S(src), tuple(Edit(a, b, S(r)) for a, b, r in edits))


def test_perfect_system():
    gold = [script("a b c", (0, 1, "x")), script("d e", (1, 1, "f"))]
    assert f_beta(gold, gold) == (1.0, 1.0, 1.0)


def test_empty_system():
    gold = [script("a b c", (0, 1, "x"))]
    assert f_beta([script("a b c")], gold) == (1.0, 0.0, 0.0)


def test_half_recall():
    gold = [script("a b c", (0, 1, "x"), (2, 3, "y"))]
    system = [script("a b c", (0, 1, "x"))]
    p, r, f = f_beta(system, gold, 0.5)
    assert (p, r) == (1.0, 0.5)
    assert f == pytest.approx(0.833333, abs=1e-6)


def test_type_is_ignored_when_matching():
    gold = [EditScript(S("a b"), (Edit(0, 1, ("x",), ErrorType.DET),))]
    system = [EditScript(S("a b"), (Edit(0, 1, ("x",), ErrorType.OTHER),))]
    assert f_beta(system, gold)[2] == 1.0


def test_fbeta_errors():
    with pytest.raises(LengthMismatch):
        f_beta([], [script("a")])
    with pytest.raises(ValueError):
        f_beta([], [], beta=0)


edit_sets = st.sets(st.tuples(st.integers(0, 4), st.integers(0, 2), st.sampled_from("xyz")), max_size=5)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(edit_sets, edit_sets), min_size=1, max_size=4))
def test_f1_symmetric(pairs):
    def mk(es):
        return EditScript(S("a b c d e f g"), tuple(Edit(s, s + d, (r,)) for s, d, r in sorted(es)))
    sys_, gold = [mk(a) for a, _ in pairs], [mk(b) for _, b in pairs]
    assert f_beta(sys_, gold, 1.0)[2] == pytest.approx(f_beta(gold, sys_, 1.0)[2])


# --- error statistics ---------------------------------------------------------------

def test_identical_pairs_profile():
    out = error_stats([(S("a b"), S("a b")), (S("c"), S("c"))])
    assert out["error_rate"] == 0.0 and out["pct_in_rules"] == 100.0 and out["edits"] == 0


def test_two_det_edits_in_ten_tokens():
    pairs = [(S("a cat sat on mat"), S("the cat sat on mat")), (S("he saw the dog ."), S("he saw a dog ."))]
    out = error_stats(pairs)
    assert (out["error_rate"], out["pct_in_rules"]) == (20.0, 100.0)
    assert out["per_type_counts"]["DET"] == 2 and out["tokens"] == 10


def test_error_stats_empty():
    with pytest.raises(EmptyInput):
        error_stats([])


# --- M2 -------------------------------------------------------------------------

def test_m2_format_and_round_trip():
    scripts = [extract_edits(S("a cat sat"), S("the cat sat")), extract_edits(S("ok ."), S("ok ."))]
    buf = io.StringIO()
    write_m2(buf, scripts)
    text = buf.getvalue()
    assert text.splitlines()[:3] == ["S a cat sat", "A 0 1|||DET|||the|||REQUIRED|||-NONE-|||0", ""]
    back = parse_m2(text)
    assert back == scripts
