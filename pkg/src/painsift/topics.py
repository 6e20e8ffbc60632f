"""LDA topic modeling by collapsed Gibbs sampling, with UMass coherence.

The sampler is a plain sequential chain over token-topic assignments driven
by random.Random, so results are bit-reproducible for a fixed (seed,
iterations, corpus order) across platforms. phi is read off the final counts
with symmetric smoothing: phi[k][w] = (n_kw + beta) / (n_k + V*beta).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DataError
from .features import Vocabulary

__all__ = [
    "TopicModel",
    "train_lda",
    "coherence",
    "CoherenceResult",
    "select_topic_count",
    "topic_top_words",
    "infer_theta",
]

DEFAULT_BETA = 0.01
DEFAULT_ITERATIONS = 1000
DEFAULT_INFER_ITERATIONS = 100
DEFAULT_TOP_M = 8


def default_alpha(k: int) -> float:
    """Symmetric document-topic prior rule of thumb: 50 / K."""
    return 50.0 / k


@dataclass(frozen=True)
class TopicModel:
    k: int
    phi: np.ndarray  # K x V topic-word probabilities, rows sum to 1
    alpha: float
    beta: float
    vocab: Vocabulary
    seed: int
    iterations: int

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=np.float64)
        object.__setattr__(self, "phi", phi)
        if phi.shape != (self.k, len(self.vocab)):
            raise ValueError(f"phi shape {phi.shape} does not match K={self.k}, V={len(self.vocab)}")


def _doc_ids(docs: Sequence[Sequence[str]], vocab: Vocabulary) -> list[list[int]]:
    index = vocab.index
    return [[index[t] for t in doc if t in index] for doc in docs]


def _sample_chain(
    docs_ids: list[list[int]],
    n_words: int,
    k: int,
    alpha: float,
    beta: float,
    iterations: int,
    rng: random.Random,
) -> tuple[list[list[int]], list[int]]:
    """Run the collapsed Gibbs chain; returns final (n_kw, n_k) counts."""
    n_kw = [[0] * n_words for _ in range(k)]
    n_k = [0] * k
    n_dk = [[0] * k for _ in docs_ids]
    assignments: list[list[int]] = []
    for d, ids in enumerate(docs_ids):
        row = n_dk[d]
        z_d = []
        for w in ids:
            t = rng.randrange(k)
            z_d.append(t)
            n_kw[t][w] += 1
            n_k[t] += 1
            row[t] += 1
        assignments.append(z_d)

    v_beta = n_words * beta
    cumulative = [0.0] * k
    for _ in range(iterations):
        for d, ids in enumerate(docs_ids):
            z_d = assignments[d]
            row = n_dk[d]
            for i, w in enumerate(ids):
                t = z_d[i]
                n_kw[t][w] -= 1
                n_k[t] -= 1
                row[t] -= 1
                total = 0.0
                for kk in range(k):
                    total += (n_kw[kk][w] + beta) / (n_k[kk] + v_beta) * (row[kk] + alpha)
                    cumulative[kk] = total
                r = rng.random() * total
                t = 0
                while t < k - 1 and cumulative[t] < r:
                    t += 1
                z_d[i] = t
                n_kw[t][w] += 1
                n_k[t] += 1
                row[t] += 1
    return n_kw, n_k


def train_lda(
    docs: Sequence[Sequence[str]],
    k: int,
    alpha: Optional[float] = None,
    beta: float = DEFAULT_BETA,
    iterations: int = DEFAULT_ITERATIONS,
    seed: int = 0,
) -> TopicModel:
    """Fit a K-topic model on tokenized documents (unigrams only)."""
    if k < 1:
        raise ValueError(f"K must be >= 1, got {k}")
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    if alpha is None:
        alpha = default_alpha(k)
    terms = sorted({t for doc in docs for t in doc})
    if not terms:
        raise DataError("cannot train LDA: empty vocabulary (no tokens in any document)")
    vocab = Vocabulary(terms=tuple(terms))
    docs_ids = _doc_ids(docs, vocab)

    rng = random.Random(seed)
    n_kw, n_k = _sample_chain(docs_ids, len(vocab), k, alpha, beta, iterations, rng)

    counts = np.array(n_kw, dtype=np.float64)
    totals = np.array(n_k, dtype=np.float64)
    phi = (counts + beta) / (totals + len(vocab) * beta)[:, None]
    return TopicModel(
        k=k, phi=phi, alpha=alpha, beta=beta, vocab=vocab, seed=seed, iterations=iterations
    )


def topic_top_words(model: TopicModel, topic: int, m: int = DEFAULT_TOP_M) -> list[str]:
    """The m highest-probability words of a topic, ties lexicographic."""
    if not 0 <= topic < model.k:
        raise ValueError(f"topic index {topic} out of range 0..{model.k - 1}")
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    order = sorted(
        range(len(model.vocab)), key=lambda w: (-model.phi[topic, w], model.vocab.terms[w])
    )
    return [model.vocab.terms[w] for w in order[:m]]


@dataclass(frozen=True)
class CoherenceResult:
    per_topic: tuple[float, ...]
    mean: float


def coherence(
    model: TopicModel, docs: Sequence[Sequence[str]], top_m: int = DEFAULT_TOP_M
) -> CoherenceResult:
    """UMass coherence over the given corpus.

    For each topic's top words w_1..w_m (descending phi), sums
    log((D(w_i, w_j) + 1) / D(w_j)) over pairs i < j, where D counts the
    documents containing a word (or both words). Depends only on document
    co-occurrence, so it is invariant to document order.
    """
    if top_m < 1:
        raise ValueError(f"top_m must be >= 1, got {top_m}")
    doc_sets = [set(doc) for doc in docs]
    scores = []
    for topic in range(model.k):
        words = topic_top_words(model, topic, top_m)
        score = 0.0
        for j in range(1, len(words)):
            d_j = sum(1 for s in doc_sets if words[j] in s)
            if d_j == 0:
                raise DataError(
                    f"top word {words[j]!r} of topic {topic} never occurs in the corpus"
                )
            for i in range(j):
                d_ij = sum(1 for s in doc_sets if words[i] in s and words[j] in s)
                score += math.log((d_ij + 1) / d_j)
        scores.append(score)
    return CoherenceResult(per_topic=tuple(scores), mean=sum(scores) / len(scores))


def select_topic_count(
    docs: Sequence[Sequence[str]],
    k_range: Sequence[int],
    alpha: Optional[float] = None,
    beta: float = DEFAULT_BETA,
    iterations: int = DEFAULT_ITERATIONS,
    seed: int = 0,
    top_m: int = DEFAULT_TOP_M,
) -> tuple[int, list[tuple[int, float]]]:
    """Train one model per candidate K and pick the coherence argmax.

    Ties go to the smaller K. ``alpha=None`` applies the 50/K rule per
    candidate. Returns the winner and the full (K, mean coherence) curve in
    ascending K order for plotting.
    """
    ks = list(k_range)
    if not ks:
        raise ValueError("K range is empty")
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise ValueError("K range must be strictly ascending")
    curve = []
    best_k, best_score = None, -math.inf
    for k in ks:
        model = train_lda(docs, k, alpha=alpha, beta=beta, iterations=iterations, seed=seed)
        score = coherence(model, docs, top_m=top_m).mean
        curve.append((k, score))
        if score > best_score:
            best_k, best_score = k, score
    return best_k, curve


def infer_theta(
    model: TopicModel,
    tokens: Sequence[str],
    iterations: int = DEFAULT_INFER_ITERATIONS,
    seed: int = 0,
) -> np.ndarray:
    """Topic proportions for one document, holding phi fixed.

    Gibbs-samples the document's token assignments against the trained phi,
    then reads theta[k] = (n_k + alpha) / (n + K*alpha). Out-of-vocabulary
    tokens are skipped; an empty or all-OOV document gets the uniform prior.
    """
    ids = [model.vocab.index[t] for t in tokens if t in model.vocab.index]
    k, alpha = model.k, model.alpha
    if not ids:
        return np.full(k, 1.0 / k)
    rng = random.Random(seed)
    phi = model.phi
    counts = [0] * k
    z = []
    for _ in ids:
        t = rng.randrange(k)
        z.append(t)
        counts[t] += 1
    cumulative = [0.0] * k
    for _ in range(iterations):
        for i, w in enumerate(ids):
            t = z[i]
            counts[t] -= 1
            total = 0.0
            for kk in range(k):
                total += phi[kk, w] * (counts[kk] + alpha)
                cumulative[kk] = total
            r = rng.random() * total
            t = 0
            while t < k - 1 and cumulative[t] < r:
                t += 1
            z[i] = t
            counts[t] += 1
    n = len(ids)
    return (np.array(counts, dtype=np.float64) + alpha) / (n + k * alpha)
