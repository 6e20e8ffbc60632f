"""SMOTE oversampling: interpolate minority samples up to the majority count."""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from .errors import DataError

__all__ = ["LabeledMatrix", "smote"]


@dataclass(frozen=True)
class LabeledMatrix:
    """Feature rows with parallel labels, synthetic flags, and parent records.

    ``parents[i]`` holds the two originating row indices of a synthetic row
    (-1, -1 for real rows), which makes the on-segment invariant checkable.
    """

    X: np.ndarray
    y: np.ndarray
    synthetic: np.ndarray
    parents: np.ndarray

    @classmethod
    def from_data(cls, X, y) -> "LabeledMatrix":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        if X.ndim != 2:
            raise ValueError("X must be a 2-D matrix")
        if len(y) != X.shape[0]:
            raise ValueError("labels are not parallel to the rows")
        n = X.shape[0]
        return cls(
            X=X,
            y=y,
            synthetic=np.zeros(n, dtype=bool),
            parents=np.full((n, 2), -1, dtype=np.int64),
        )

    def class_counts(self) -> dict:
        labels, counts = np.unique(self.y, return_counts=True)
        return dict(zip(labels.tolist(), counts.tolist()))


def smote(data: LabeledMatrix, k: int = 5, seed: int = 0) -> LabeledMatrix:
    """Oversample every minority class to the majority count.

    Each synthetic row is x + u * (x' - x) for a random minority row x, one
    of its k nearest same-class neighbors x' (Euclidean; k is clamped to
    class size - 1), and u uniform in [0, 1]. Original rows are kept first,
    in order; synthetic rows are appended. Deterministic per seed.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    counts = data.class_counts()
    majority = max(counts.values())
    labels = sorted(counts)

    rng = np.random.default_rng(seed)
    new_rows, new_labels, new_parents = [], [], []
    for label in labels:
        deficit = majority - counts[label]
        if deficit == 0:
            continue
        if counts[label] < 2:
            raise DataError(
                f"class {label!r} has a single sample; SMOTE needs at least 2 per minority class"
            )
        members = np.flatnonzero(data.y == label)
        rows = data.X[members]
        # pairwise Euclidean distances within the class; stable argsort keeps
        # neighbor choice deterministic under ties
        deltas = rows[:, None, :] - rows[None, :, :]
        dists = np.sqrt((deltas**2).sum(axis=2))
        np.fill_diagonal(dists, np.inf)
        order = np.argsort(dists, axis=1, kind="stable")
        k_eff = min(k, len(members) - 1)
        neighbors = order[:, :k_eff]

        for _ in range(deficit):
            base = int(rng.integers(len(members)))
            pick = neighbors[base][int(rng.integers(k_eff))]
            u = rng.random()
            x, x_prime = rows[base], rows[pick]
            new_rows.append(x + u * (x_prime - x))
            new_labels.append(label)
            new_parents.append((members[base], members[pick]))

    if not new_rows:
        return LabeledMatrix(
            X=data.X.copy(),
            y=data.y.copy(),
            synthetic=data.synthetic.copy(),
            parents=data.parents.copy(),
        )
    return LabeledMatrix(
        X=np.vstack([data.X, np.array(new_rows)]),
        y=np.concatenate([data.y, np.array(new_labels, dtype=data.y.dtype)]),
        synthetic=np.concatenate([data.synthetic, np.ones(len(new_rows), dtype=bool)]),
        parents=np.vstack([data.parents, np.array(new_parents, dtype=np.int64)]),
    )
