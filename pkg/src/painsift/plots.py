"""Figure rendering for the report path.

Each report kind gets a matplotlib companion figure written next to its TSV:
the coherence curve as a line plot, the chi-squared ranking as a bar chart,
and the per-class topics as a grid of word-probability bars.
"""

from __future__ import annotations

from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

__all__ = [
    "save_coherence_figure",
    "save_ngram_figure",
    "save_topics_figure",
]


def save_coherence_figure(
    curve: Sequence[tuple[int, float]], path: str, selected_k: Optional[int] = None
) -> None:
    """Line plot of mean coherence vs topic count, marking the selected K."""
    ks = [k for k, _ in curve]
    scores = [s for _, s in curve]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(ks, scores, marker="o", color="tab:blue")
    if selected_k is not None and selected_k in ks:
        ax.scatter([selected_k], [scores[ks.index(selected_k)]],
                   color="tab:red", zorder=3, label=f"selected K = {selected_k}")
        ax.legend(frameon=False)
    ax.set_xlabel("Number of topics")
    ax.set_ylabel("Coherence score")
    ax.set_xticks(ks)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_ngram_figure(
    rows: Sequence[tuple[str, str, float]], path: str, top: int = 20
) -> None:
    """Horizontal bars of the top terms by chi-squared, colored by profile."""
    rows = list(rows)[:top]
    if not rows:
        return
    terms = [r[0] for r in rows][::-1]
    scores = [r[2] for r in rows][::-1]
    profiles = [r[1] for r in rows][::-1]
    palette = {}
    colors = []
    cycle = ["tab:blue", "tab:orange", "tab:green", "tab:red", "tab:purple", "tab:brown"]
    for prof in profiles:
        if prof not in palette:
            palette[prof] = cycle[len(palette) % len(cycle)]
        colors.append(palette[prof])
    fig, ax = plt.subplots(figsize=(7, max(2.5, 0.3 * len(rows) + 1)))
    ax.barh(range(len(terms)), scores, color=colors)
    ax.set_yticks(range(len(terms)))
    ax.set_yticklabels(terms, fontsize=8)
    ax.set_xlabel("chi-squared")
    handles = [plt.Rectangle((0, 0), 1, 1, color=c) for c in palette.values()]
    ax.legend(handles, palette.keys(), fontsize=7, frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_topics_figure(
    panels: Sequence[tuple[str, int, Sequence[tuple[str, float]]]], path: str
) -> None:
    """Grid of per-(class, topic) bar charts of the top word probabilities."""
    if not panels:
        return
    n = len(panels)
    cols = min(2, n)
    rows = (n + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(5.5 * cols, 2.4 * rows), squeeze=False)
    for idx, (label, topic, words) in enumerate(panels):
        ax = axes[idx // cols][idx % cols]
        names = [w for w, _ in words][::-1]
        probs = [p for _, p in words][::-1]
        ax.barh(range(len(names)), probs, color="tab:blue")
        ax.set_yticks(range(len(names)))
        ax.set_yticklabels(names, fontsize=8)
        ax.set_title(f"{label} / topic {topic}", fontsize=9)
        ax.tick_params(axis="x", labelsize=7)
    for idx in range(n, rows * cols):
        axes[idx // cols][idx % cols].axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
