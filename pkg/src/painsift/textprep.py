"""Deterministic text normalization: tokenize, stopword removal, stemming, n-grams.

Tokens are maximal lowercase [a-z0-9] runs, except that pain-score patterns
like "8/10" are kept as single tokens. Stemming is a table-driven suffix
stripper; the rule table and the stopword list ship as plain-text data files
(see painsift/data/) and both can be overridden with custom files.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Optional, Sequence

from .errors import DataError

__all__ = [
    "load_stopwords",
    "Stemmer",
    "default_stemmer",
    "stem",
    "tokenize",
    "extract_ngrams",
    "Preprocessor",
]

_TOKEN_RE = re.compile(r"\d+/\d+|[a-z0-9]+")

_VOWELS = frozenset("aeiou")


def _data_path(name: str):
    return resources.files("painsift").joinpath("data").joinpath(name)


def load_stopwords(path: Optional[str] = None) -> frozenset[str]:
    """Read the stopword list, one word per line, '#' comments allowed."""
    if path is None:
        text = _data_path("stopwords.txt").read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    words = set()
    for line in text.splitlines():
        word = line.split("#", 1)[0].strip().lower()
        if word:
            words.add(word)
    if not words:
        raise DataError("stopword list is empty")
    return frozenset(words)


def _is_consonant(word: str, i: int) -> bool:
    c = word[i]
    if c in _VOWELS:
        return False
    if c == "y":
        # y is a vowel when preceded by a consonant
        return i == 0 or not _is_consonant(word, i - 1)
    return True


def _measure(stem: str) -> int:
    """Porter measure: the number of vowel-run -> consonant-run transitions."""
    m = 0
    prev_cons = None
    for i in range(len(stem)):
        cons = _is_consonant(stem, i)
        if cons and prev_cons is False:
            m += 1
        prev_cons = cons
    return m


def _has_vowel(stem: str) -> bool:
    return any(not _is_consonant(stem, i) for i in range(len(stem)))


def _ends_double(word: str) -> bool:
    return (
        len(word) >= 2
        and word[-1] == word[-2]
        and _is_consonant(word, len(word) - 1)
    )


def _ends_cvc(stem: str) -> bool:
    if len(stem) < 3:
        return False
    if not (
        _is_consonant(stem, len(stem) - 3)
        and not _is_consonant(stem, len(stem) - 2)
        and _is_consonant(stem, len(stem) - 1)
    ):
        return False
    return stem[-1] not in "wxy"


@dataclass(frozen=True)
class _Rule:
    step: str
    suffix: str
    replacement: str
    condition: str


def _check_atom(atom: str, stem: str, replacement: str) -> bool:
    if atom == "always":
        return True
    if atom == "m>0":
        return _measure(stem) > 0
    if atom == "m>1":
        return _measure(stem) > 1
    if atom == "m=1":
        return _measure(stem) == 1
    if atom == "mres>1":
        return _measure(stem + replacement) > 1
    if atom == "hasvowel":
        return _has_vowel(stem)
    if atom == "endcons":
        return bool(stem) and _is_consonant(stem, len(stem) - 1)
    if atom == "endcvc":
        return _ends_cvc(stem)
    if atom == "enddouble":
        return _ends_double(stem)
    if atom == "endl":
        return stem.endswith("l")
    if atom == "ends":
        return stem.endswith("s")
    if atom == "endz":
        return stem.endswith("z")
    if atom == "endst":
        return stem.endswith("s") or stem.endswith("t")
    raise DataError(f"unknown stemmer condition atom {atom!r}")


def _check_condition(condition: str, stem: str, replacement: str) -> bool:
    for atom in condition.split("&"):
        atom = atom.strip()
        negate = atom.startswith("!")
        if negate:
            atom = atom[1:]
        ok = _check_atom(atom, stem, replacement)
        if ok == negate:
            return False
    return True


_STEP_ORDER = ("1a", "1b", "1b2", "1c", "2", "3", "4", "5a", "5b")
_MAX_PASSES = 100


class Stemmer:
    """Table-driven suffix stripper; rules documented in the data file."""

    def __init__(self, rules: Sequence[_Rule]):
        steps: dict[str, list[_Rule]] = {s: [] for s in _STEP_ORDER}
        for rule in rules:
            if rule.step not in steps:
                raise DataError(f"unknown stemmer step {rule.step!r}")
            steps[rule.step].append(rule)
        self._steps = steps
        # the public stem() caches results; vocabularies repeat tokens heavily
        self.stem = lru_cache(maxsize=65536)(self._stem)

    @classmethod
    def from_file(cls, path: Optional[str] = None) -> "Stemmer":
        if path is None:
            text = _data_path("stemmer_rules.txt").read_text(encoding="utf-8")
        else:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        rules = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("|")
            if len(parts) != 4:
                raise DataError(f"stemmer rules line {lineno}: expected 4 '|' fields")
            step, suffix, replacement, condition = (p.strip() for p in parts)
            if replacement == "-":
                replacement = ""
            rules.append(_Rule(step, suffix, replacement, condition))
        if not rules:
            raise DataError("stemmer rule table is empty")
        return cls(rules)

    def _apply_step(self, word: str, step: str) -> tuple[str, Optional[_Rule]]:
        """Try the step's rules top to bottom; first suffix match decides."""
        for rule in self._steps[step]:
            if rule.suffix == "@@":
                stem = word
            elif rule.suffix == "@dd":
                if not _ends_double(word):
                    continue
                stem = word[:-1]
            elif word.endswith(rule.suffix) and len(word) > len(rule.suffix):
                stem = word[: -len(rule.suffix)]
            else:
                continue
            if not _check_condition(rule.condition, stem, rule.replacement):
                return word, None
            if rule.replacement == "@single":
                return stem, rule
            return stem + rule.replacement, rule
        return word, None

    def _one_pass(self, word: str) -> str:
        for step in _STEP_ORDER:
            if step == "1b2":
                continue  # chained from 1b below
            new, rule = self._apply_step(word, step)
            if step == "1b" and rule is not None and rule.suffix in ("ed", "ing"):
                new, _ = self._apply_step(new, "1b2")
            word = new
        return word

    def _stem(self, token: str) -> str:
        """Stem one lowercase token; non-alphabetic tokens pass through."""
        if len(token) <= 2 or not token.isalpha():
            return token
        word = token
        for _ in range(_MAX_PASSES):
            new = self._one_pass(word)
            if new == word:
                break
            word = new
        return word


_DEFAULT_STEMMER: Optional[Stemmer] = None
_DEFAULT_STOPWORDS: Optional[frozenset[str]] = None


def default_stemmer() -> Stemmer:
    global _DEFAULT_STEMMER
    if _DEFAULT_STEMMER is None:
        _DEFAULT_STEMMER = Stemmer.from_file()
    return _DEFAULT_STEMMER


def _default_stopwords() -> frozenset[str]:
    global _DEFAULT_STOPWORDS
    if _DEFAULT_STOPWORDS is None:
        _DEFAULT_STOPWORDS = load_stopwords()
    return _DEFAULT_STOPWORDS


def stem(token: str) -> str:
    """Stem a single token with the bundled rule table."""
    return default_stemmer().stem(token)


def tokenize(
    text: str,
    stopwords: Optional[frozenset[str]] = None,
    stemmer: Optional[Stemmer] = None,
) -> list[str]:
    """Normalize raw text into a token list.

    Lowercase, split into alphanumeric runs (pain scores like "8/10" stay
    whole), drop stopwords, stem the rest. The stopword filter is applied
    again after stemming so no output token is ever a stopword.
    """
    if stopwords is None:
        stopwords = _default_stopwords()
    if stemmer is None:
        stemmer = default_stemmer()
    out = []
    for raw in _TOKEN_RE.findall(text.lower()):
        if raw in stopwords:
            continue
        token = stemmer.stem(raw)
        if token and token not in stopwords:
            out.append(token)
    return out


def extract_ngrams(tokens: Sequence[str], n_min: int = 1, n_max: int = 2) -> dict[str, int]:
    """Count sliding-window n-grams; multi-token keys are space-joined."""
    if not 1 <= n_min <= n_max <= 3:
        raise ValueError(f"invalid n-gram range {n_min}..{n_max} (need 1 <= min <= max <= 3)")
    counts: dict[str, int] = {}
    for n in range(n_min, n_max + 1):
        for i in range(len(tokens) - n + 1):
            key = " ".join(tokens[i : i + n]) if n > 1 else tokens[i]
            counts[key] = counts.get(key, 0) + 1
    return counts


@dataclass(frozen=True)
class Preprocessor:
    """Tokenizer + stemmer + n-gram settings bundled for the pipeline."""

    stopwords: frozenset[str]
    stemmer: Stemmer
    n_min: int = 1
    n_max: int = 2

    @classmethod
    def create(
        cls,
        stopwords_path: Optional[str] = None,
        stemmer_rules_path: Optional[str] = None,
        n_min: int = 1,
        n_max: int = 2,
    ) -> "Preprocessor":
        stopwords = (
            _default_stopwords() if stopwords_path is None else load_stopwords(stopwords_path)
        )
        stemmer = (
            default_stemmer()
            if stemmer_rules_path is None
            else Stemmer.from_file(stemmer_rules_path)
        )
        return cls(stopwords=stopwords, stemmer=stemmer, n_min=n_min, n_max=n_max)

    def tokens(self, text: str) -> list[str]:
        return tokenize(text, stopwords=self.stopwords, stemmer=self.stemmer)

    def ngrams(self, text: str) -> dict[str, int]:
        return extract_ngrams(self.tokens(text), self.n_min, self.n_max)
