"""Vocabulary construction, chi-squared term selection, and vectorization.

Term-class association uses Pearson chi-squared on 2x2 presence/absence
tables (document frequency, not raw counts). Linguistic feature values are
raw n-gram counts over the selected vocabulary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "Vocabulary",
    "FeatureVector",
    "chi2_score",
    "select_top_k",
    "ngram_class_report",
    "ClassReportRow",
    "vectorize",
    "concat_features",
]


@dataclass(frozen=True)
class Vocabulary:
    """Ordered term list with a term -> column index map."""

    terms: tuple[str, ...]
    index: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(set(self.terms)) != len(self.terms):
            raise ValueError("vocabulary terms must be unique")
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.terms)})

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self.index


Layout = tuple[tuple[str, int], ...]


@dataclass(frozen=True)
class FeatureVector:
    """Dense feature values plus a (segment name, length) layout descriptor."""

    values: np.ndarray
    layout: Layout

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 1:
            raise ValueError("feature values must be a 1-D vector")
        if sum(n for _, n in self.layout) != values.shape[0]:
            raise ValueError("layout lengths do not add up to the vector length")

    def segment(self, name: str) -> np.ndarray:
        start = 0
        for seg_name, n in self.layout:
            if seg_name == name:
                return self.values[start : start + n]
            start += n
        raise KeyError(f"no segment named {name!r}")

    def __len__(self) -> int:
        return int(self.values.shape[0])


def chi2_score(table: Sequence[Sequence[float]]) -> float:
    """Pearson chi-squared of a 2x2 contingency table, no continuity correction.

    A zero row or column total makes the term/class degenerate; the score is
    defined as 0 in that case.
    """
    obs = np.asarray(table, dtype=np.float64)
    if obs.shape != (2, 2):
        raise ValueError(f"expected a 2x2 table, got shape {obs.shape}")
    if np.any(obs < 0):
        raise ValueError("contingency counts must be non-negative")
    rows = obs.sum(axis=1)
    cols = obs.sum(axis=0)
    n = obs.sum()
    if n <= 0 or np.any(rows == 0) or np.any(cols == 0):
        return 0.0
    expected = np.outer(rows, cols) / n
    return float(((obs - expected) ** 2 / expected).sum())


def _doc_frequencies(
    bags: Sequence[Mapping[str, int]], labels: Sequence[str]
) -> tuple[list[str], dict[str, int], dict[str, dict[str, int]]]:
    """Per-class and overall document frequencies of every term."""
    if len(bags) != len(labels):
        raise ValueError("bags and labels must be parallel sequences")
    classes = sorted(set(labels))
    class_sizes = {c: 0 for c in classes}
    df: dict[str, dict[str, int]] = {}
    for bag, lab in zip(bags, labels):
        class_sizes[lab] += 1
        for term in bag:
            per_class = df.setdefault(term, dict.fromkeys(classes, 0))
            per_class[lab] += 1
    return classes, class_sizes, df


def _term_chi2(
    per_class_df: Mapping[str, int], class_sizes: Mapping[str, int], n_docs: int
) -> float:
    """Max one-vs-rest chi-squared over the task's classes."""
    df_total = sum(per_class_df.values())
    best = 0.0
    for c, size in class_sizes.items():
        present_c = per_class_df[c]
        table = (
            (present_c, df_total - present_c),
            (size - present_c, (n_docs - size) - (df_total - present_c)),
        )
        best = max(best, chi2_score(table))
    return best


def select_top_k(
    bags: Sequence[Mapping[str, int]], labels: Sequence[str], k: int
) -> Vocabulary:
    """Pick the k terms with the highest chi-squared association.

    Presence/absence per note feeds the contingency tables; multiclass terms
    score as the max over one-vs-rest tables. Order is descending score, ties
    broken lexicographically. k beyond the vocabulary returns every term.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    classes, class_sizes, df = _doc_frequencies(bags, labels)
    n_docs = len(bags)
    scored = [
        (-_term_chi2(per_class, class_sizes, n_docs), term)
        for term, per_class in df.items()
    ]
    scored.sort()
    return Vocabulary(terms=tuple(term for _, term in scored[:k]))


@dataclass(frozen=True)
class ClassReportRow:
    term: str
    profile: str  # "exclusive:<class>" or "shared"
    chi2: float
    doc_freq: tuple[int, ...]  # parallel to the report's class order


@dataclass(frozen=True)
class ClassReport:
    classes: tuple[str, ...]
    rows: tuple[ClassReportRow, ...]

    def exclusive(self, label: str) -> set[str]:
        return {r.term for r in self.rows if r.profile == f"exclusive:{label}"}

    @property
    def shared(self) -> set[str]:
        return {r.term for r in self.rows if r.profile == "shared"}


def ngram_class_report(
    bags: Sequence[Mapping[str, int]], labels: Sequence[str]
) -> ClassReport:
    """Tag every active term as class-exclusive or shared, with chi2 and doc freq.

    Rows are ordered by descending chi-squared, then term. With a single
    class present, every term is exclusive to it and the shared set is empty.
    """
    classes, class_sizes, df = _doc_frequencies(bags, labels)
    n_docs = len(bags)
    rows = []
    for term, per_class in df.items():
        present_in = [c for c in classes if per_class[c] > 0]
        profile = f"exclusive:{present_in[0]}" if len(present_in) == 1 else "shared"
        rows.append(
            ClassReportRow(
                term=term,
                profile=profile,
                chi2=_term_chi2(per_class, class_sizes, n_docs),
                doc_freq=tuple(per_class[c] for c in classes),
            )
        )
    rows.sort(key=lambda r: (-r.chi2, r.term))
    return ClassReport(classes=tuple(classes), rows=tuple(rows))


def vectorize(bag: Mapping[str, int], vocab: Vocabulary) -> FeatureVector:
    """Counts of the vocabulary terms in one note; unknown terms are ignored."""
    if len(vocab) == 0:
        raise ValueError("vocabulary is empty")
    values = np.zeros(len(vocab), dtype=np.float64)
    for term, count in bag.items():
        idx = vocab.index.get(term)
        if idx is not None:
            values[idx] = count
    return FeatureVector(values=values, layout=(("linguistic", len(vocab)),))


def concat_features(linguistic: FeatureVector, topical: FeatureVector) -> FeatureVector:
    """Append the topical block after the linguistic block, recording both lengths."""
    if len(linguistic) == 0 or len(topical) == 0:
        raise ValueError("cannot concatenate an empty feature vector")
    return FeatureVector(
        values=np.concatenate([linguistic.values, topical.values]),
        layout=linguistic.layout + topical.layout,
    )
