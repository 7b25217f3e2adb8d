import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from pairforge.errors import EmptyCorpus
from pairforge.lm import BOS, EOS, UNK, NGramModel, logprob, perplexity, read_arpa, train_lm, write_arpa


def S(text):
    return tuple(text.split())


ABC = [S("a b"), S("a b"), S("a c")]
# interpolated KN, D = 0.75, bigram order; "c" is a singleton and becomes <unk>.
# P(b|a) = (2 - .75)/3 + (.75*2/3) * Pcont(b),  Pcont(b) = (1 - .75)/5 + .75*4/5 * 1/4 = 0.2
P_B_GIVEN_A = 1.25 / 3 + 0.5 * 0.2
P_UNK_GIVEN_A = 0.25 / 3 + 0.5 * 0.2
# log P("a c") = log P(a|<s>) + log P(<unk>|a) + log P(</s>|<unk>) = log(.8 * .18333 * .55)
LOGPROB_A_C = math.log10(0.8 * (0.25 / 3 + 0.1) * 0.55)


def total_mass(model, context):
    return sum(10 ** model.word_logprob(w, context) for w in model.predictable)


def test_hand_derived_bigram_values():
    m = train_lm(ABC, 2)
    assert 10 ** m.word_logprob("b", ("a",)) == pytest.approx(P_B_GIVEN_A, abs=1e-9)
    assert 10 ** m.word_logprob("c", ("a",)) == pytest.approx(P_UNK_GIVEN_A, abs=1e-9)
    assert m.word_logprob("b", ("a",)) > m.word_logprob("c", ("a",))
    assert logprob(m, S("a c")) == pytest.approx(LOGPROB_A_C, abs=1e-9)


def test_symmetric_followers():
    m = train_lm([S("a b"), S("a c"), S("b c"), S("c b")], 2)
    assert m.word_logprob("b", ("a",)) == pytest.approx(m.word_logprob("c", ("a",)))


def test_single_type_unigram():
    m = train_lm([S("a a a a")] * 5, 1)
    p_a = 10 ** m.word_logprob("a")
    assert 0.5 < p_a < 1.0
    assert total_mass(m, ()) == pytest.approx(1.0, abs=1e-9)


def test_vocab_has_markers():
    m = train_lm(ABC, 3)
    assert {BOS, EOS, UNK} <= m.vocab
    assert m.prob[(BOS,)] == -99.0
    assert all(p <= 0 for p in m.prob.values())


def test_empty_sentence_scores_end_marker_only():
    m = train_lm(ABC, 2)
    assert logprob(m, ()) == pytest.approx(m.word_logprob(EOS, (BOS,)))


def test_seen_sentence_wins_among_its_length():
    # repeated so its words are not singletons (singletons become <unk>)
    m = train_lm([S("x y z")] * 2, 3)
    best = logprob(m, S("x y z"))
    for perm in (S("x z y"), S("y x z"), S("z y x")):
        assert logprob(m, perm) < best


def test_empty_corpus():
    with pytest.raises(EmptyCorpus):
        train_lm([], 3)
    with pytest.raises(EmptyCorpus):
        perplexity(train_lm(ABC, 2), [])


def test_uniform_model_perplexity_is_vocab_size():
    words = ["a", "b", "c", EOS]
    lp = math.log10(1 / len(words))
    m = NGramModel(1, {(w,): lp for w in words} | {(BOS,): -99.0}, {}, frozenset(words) | {BOS, UNK})
    assert perplexity(m, [S("a b c"), S("c a")]) == pytest.approx(4.0)


def test_perplexity_counts_end_marker():
    m = train_lm(ABC, 2)
    lp = logprob(m, S("a b"))
    assert perplexity(m, [S("a b")]) == pytest.approx(10 ** (-lp / 3))


def test_higher_order_fits_training_data_better(toy_corpus):
    data = toy_corpus.targets[:500]
    assert perplexity(train_lm(data, 3), data) <= perplexity(train_lm(data, 1), data)


def test_fluency_sensitivity(toy_corpus):
    data = toy_corpus.targets[:500]
    rng = random.Random(0)
    shuffled = [tuple(rng.sample(s, len(s))) for s in data]
    m = train_lm(data, 3)
    assert perplexity(m, data) < perplexity(m, shuffled)


def test_adding_a_sentence_does_not_raise_its_perplexity(toy_corpus):
    base = toy_corpus.targets[:200]
    for extra in toy_corpus.targets[200:210]:
        before = perplexity(train_lm(base, 3), [extra])
        after = perplexity(train_lm(base + [extra], 3), [extra])
        assert after <= before + 1e-9


def test_arpa_round_trip(tmp_path, toy_corpus):
    m = train_lm(toy_corpus.targets[:300], 3)
    write_arpa(m, tmp_path / "m.arpa")
    text = (tmp_path / "m.arpa").read_text()
    assert text.lstrip().startswith("\\data\\") and text.rstrip().endswith("\\end\\")
    m2 = read_arpa(tmp_path / "m.arpa")
    assert m2.order == 3 and m2.vocab == m.vocab
    for s in toy_corpus.targets[300:320]:
        assert logprob(m2, s) == logprob(m, s)


@pytest.fixture(scope="module")
def trigram(toy_corpus):
    return train_lm(toy_corpus.targets[:400], 3)


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_every_context_normalizes(trigram, data):
    vocab = sorted(trigram.vocab - {EOS}) + ["never-seen"]
    ctx = tuple(data.draw(st.lists(st.sampled_from(vocab), min_size=0, max_size=2)))
    assert total_mass(trigram, ctx) == pytest.approx(1.0, abs=1e-6)
