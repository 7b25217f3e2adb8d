"""Template-grammar generator for a small synthetic bilingual corpus.

The toy source language has no articles, no verb agreement and no plural
marking, puts adjectives after nouns, and uses one verb ("zuo") and one
preposition ("zai") for several English words.  Choosing the right English
form therefore depends on target-side context, which is what a language
model contributes during decoding.
"""

from __future__ import annotations

import random
from pathlib import Path

from .morph import plural, third_person
from .textcore import ParallelCorpus

# source pronoun, english pronoun, third person singular
PRONOUNS = [("wo", "i", False), ("ni", "you", False), ("women", "we", False),
            ("tamen", "they", False), ("ta", "he", True), ("tanv", "she", True)]
PEOPLE = [("laoshi", "teacher"), ("xuesheng", "student"), ("yisheng", "doctor"),
          ("nongmin", "farmer"), ("pengyou", "friend"), ("mama", "mother")]
# source verb, english base, article class of its object
VERBS = [("xihuan", "like", "the"), ("kan", "see", "the"), ("mai", "buy", "a"),
         ("yao", "want", "a"), ("xuyao", "need", "a"), ("fang", "visit", "the"),
         ("du", "read", "the"), ("xi", "wash", "the")]
NOUNS = [("shu", "book"), ("pingguo", "apple"), ("che", "car"), ("fangzi", "house"),
         ("bei", "cup"), ("yizi", "chair"), ("dianying", "movie"), ("xin", "letter"),
         ("yusan", "umbrella"), ("zhuozi", "table")]
ADJECTIVES = [("hong", "red"), ("da", "big"), ("jiu", "old"), ("xinde", "new"),
              ("xiao", "small"), ("gui", "expensive")]
# "zuo" objects and the English verb they collocate with
ZUO_OBJECTS = [("dangao", "cake", "make", "a"), ("cuowu", "mistake", "make", "a"),
               ("jueding", "decision", "make", "a"), ("zuoye", "homework", "do", "the"),
               ("gongzuo", "work", "do", "the"), ("yundong", "exercise", "do", "the")]
# "zai" complements and the preposition they take
ZAI_PLACES = [("jia", ("at", "home")), ("xuexiao", ("at", "school")), ("zaoshang", ("in", "the", "morning")),
              ("wanshang", ("in", "the", "evening")), ("zhouyi", ("on", "monday")),
              ("zhoumo", ("on", "the", "weekend")), ("gongyuan", ("in", "the", "park"))]


def _article(det: str, next_word: str) -> str:
    if det == "a" and next_word[0] in "aeiou":
        return "an"
    return det


def _subject(rng: random.Random):
    r = rng.random()
    if r < 0.5:
        src, eng, third = rng.choice(PRONOUNS)
        return [src], [eng], third
    person_src, person = rng.choice(PEOPLE)
    if r < 0.75:
        return [person_src], ["the", person], True
    if r < 0.9:
        return ["wo", "de", person_src], ["my", person], True
    return ["henduo", person_src], ["many", plural(person)], False


def _object(rng: random.Random, det: str):
    noun_src, noun = rng.choice(NOUNS)
    src = [noun_src]
    words = [noun]
    if rng.random() < 0.4:
        adj_src, adj = rng.choice(ADJECTIVES)
        src.append(adj_src)
        words.insert(0, adj)
    r = rng.random()
    if r < 0.15:
        src.insert(0, "liang")
        words[-1] = plural(words[-1])
        return src, ["two"] + words
    if r < 0.3:
        src.insert(0, "zhe")
        return src, ["this"] + words
    return src, [_article(det, words[0])] + words


def sentence_pair(rng: random.Random):
    subj_src, subj, third = _subject(rng)
    if rng.random() < 0.3:
        zuo_src, noun, verb, det = rng.choice(ZUO_OBJECTS)
        verb_src = ["zuo"]
        obj_src = [zuo_src]
        obj_words = [_article(det, noun), noun]
    else:
        verb_src_word, verb, det = rng.choice(VERBS)
        verb_src = [verb_src_word]
        obj_src, obj_words = _object(rng, det)
    verb_form = third_person(verb) if third else verb
    src = subj_src + verb_src + obj_src
    eng = subj + [verb_form] + obj_words
    if rng.random() < 0.4:
        place_src, place = rng.choice(ZAI_PLACES)
        src += ["zai", place_src]
        eng += list(place)
    return tuple(src + ["."]), tuple(eng + ["."])


def generate(n: int, seed: int = 0, name: str = "toy") -> ParallelCorpus:
    rng = random.Random(seed)
    return ParallelCorpus(tuple(sentence_pair(rng) for _ in range(n)), name)


def monolingual(n: int, seed: int = 0):
    """Stream ``n`` source-side sentences."""
    rng = random.Random(seed)
    for _ in range(n):
        yield sentence_pair(rng)[0]


def write_corpus(corpus: ParallelCorpus, prefix, src_ext: str = "src", tgt_ext: str = "en"):
    prefix = Path(prefix)
    src_path = prefix.with_name(f"{prefix.name}.{src_ext}")
    tgt_path = prefix.with_name(f"{prefix.name}.{tgt_ext}")
    with open(src_path, "w", encoding="utf-8", newline="\n") as fs, open(tgt_path, "w", encoding="utf-8", newline="\n") as ft:
        for s, t in corpus:
            fs.write(" ".join(s) + "\n")
            ft.write(" ".join(t) + "\n")
    return src_path, tgt_path
