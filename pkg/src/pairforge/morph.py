"""Closed word lists and suffix-rule English morphology.

Shared by the error-type classifier and the corruption generator so that
every inflection the generator produces is one the classifier recognizes.
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

_VOWELS = set("aeiou")


def _read_list(name: str) -> list:
    text = resources.files("pairforge").joinpath("data").joinpath(name).read_text(encoding="utf-8")
    return [line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#")]


@lru_cache(maxsize=None)
def determiners() -> frozenset:
    return frozenset(_read_list("determiners.txt"))


@lru_cache(maxsize=None)
def prepositions() -> frozenset:
    return frozenset(_read_list("prepositions.txt"))


@lru_cache(maxsize=None)
def verbs() -> frozenset:
    return frozenset(_read_list("verbs.txt")) | frozenset(irregular_verbs())


@lru_cache(maxsize=None)
def irregular_verbs() -> dict:
    table = {}
    for line in _read_list("irregular_verbs.tsv"):
        cols = line.split("\t")
        table[cols[0]] = tuple(cols[1:])
    return table


def third_person(base: str) -> str:
    if base.endswith(("s", "sh", "ch", "x", "z", "o")):
        return base + "es"
    if len(base) > 1 and base.endswith("y") and base[-2] not in _VOWELS:
        return base[:-1] + "ies"
    return base + "s"


def past(base: str) -> str:
    if base.endswith("e"):
        return base + "d"
    if len(base) > 1 and base.endswith("y") and base[-2] not in _VOWELS:
        return base[:-1] + "ied"
    return base + "ed"


def gerund(base: str) -> str:
    if base.endswith("e") and not base.endswith("ee") and len(base) > 2:
        return base[:-1] + "ing"
    return base + "ing"


def plural(noun: str) -> str:
    return third_person(noun)


@lru_cache(maxsize=None)
def verb_forms(base: str) -> tuple:
    irregular = irregular_verbs().get(base)
    if irregular is None:
        forms = (base, third_person(base), past(base), gerund(base))
    else:
        forms = (base,) + irregular
        if base != "be" and not any(f.endswith("s") for f in irregular):
            forms += (third_person(base),)
    return tuple(dict.fromkeys(forms))


@lru_cache(maxsize=None)
def _form_index() -> dict:
    index = {}
    for base in sorted(verbs()):
        for form in verb_forms(base):
            index.setdefault(form, set()).add(base)
    return {k: frozenset(v) for k, v in index.items()}


def _suffix_lemmas(word: str) -> set:
    out = {word}
    for suffix, repl in (("ies", "y"), ("es", ""), ("s", ""), ("ied", "y"), ("ed", ""), ("ed", "e"), ("d", ""), ("ing", ""), ("ing", "e")):
        if word.endswith(suffix) and len(word) > len(suffix) + 1:
            out.add(word[: len(word) - len(suffix)] + repl)
    return out


def verb_lemmas(word: str) -> frozenset:
    word = word.lower()
    return _form_index().get(word, frozenset())


def same_verb(a: str, b: str) -> bool:
    """True when a and b are different forms of one verb."""
    a, b = a.lower(), b.lower()
    if a == b:
        return False
    if verb_lemmas(a) & verb_lemmas(b):
        return True
    # unlisted verbs: a shared stem reached through -ed / -ing
    if a.endswith(("ed", "ing")) or b.endswith(("ed", "ing")):
        return bool(_suffix_lemmas(a) & _suffix_lemmas(b))
    return False


def number_pair(a: str, b: str) -> bool:
    """True when one word is the regular plural of the other."""
    a, b = a.lower(), b.lower()
    if a == b or not a.isalpha() or not b.isalpha():
        return False
    return a in (b + "s", b + "es", plural(b)) or b in (a + "s", a + "es", plural(a))
