"""Report figures rendered to PNG files.

Uses the Agg backend so figure rendering works in headless runs.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from graphy.exploration import HistogramResult
from graphy.generation import MindMap


def _shorten(text: str, limit: int = 28) -> str:
    return text if len(text) <= limit else text[: limit - 1] + "…"


def save_category_sizes(mindmap: MindMap, path: str | Path) -> Path:
    """Horizontal bar chart of mind-map category sizes."""
    path = Path(path)
    names = [_shorten(c.name) for c in mindmap.categories]
    sizes = [len(c.members) for c in mindmap.categories]
    fig, ax = plt.subplots(figsize=(7, max(2.0, 0.5 * len(names) + 1)))
    ax.barh(range(len(names)), sizes, color="#4878b0")
    ax.set_yticks(range(len(names)))
    ax.set_yticklabels(names)
    ax.invert_yaxis()
    ax.set_xlabel("works")
    ax.set_title(mindmap.root)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_histogram(result: HistogramResult, path: str | Path) -> Path:
    """Bar chart of one attribute histogram, buckets in report order."""
    path = Path(path)
    keys = [_shorten(b.key, 16) for b in result.buckets]
    counts = [b.count for b in result.buckets]
    fig, ax = plt.subplots(figsize=(max(4.0, 0.6 * len(keys) + 1), 4))
    ax.bar(range(len(keys)), counts, color="#6a9f58")
    ax.set_xticks(range(len(keys)))
    ax.set_xticklabels(keys, rotation=45, ha="right")
    ax.set_ylabel("count")
    ax.set_title(result.attribute)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
