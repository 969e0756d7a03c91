"""Per-type bar chart for a generation report."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import GenerationReport  # noqa: E402

PLOTTED = (("validity", "Validity"), ("novelty", "Novelty"), ("valid_and_novel", "Valid & Novel"))


def plot_report(report: GenerationReport, path: str | Path) -> Path:
    """Grouped bars of the headline rates per circuit type, written as PNG."""
    path = Path(path)
    types = list(report.columns)
    x = np.arange(len(types))
    width = 0.8 / len(PLOTTED)
    fig, ax = plt.subplots(figsize=(max(6.0, 0.6 * len(types) + 2), 3.6))
    for i, (key, label) in enumerate(PLOTTED):
        vals = [report.columns[t].get(key) or 0.0 for t in types]
        ax.bar(x + (i - (len(PLOTTED) - 1) / 2) * width, vals, width, label=label)
    ax.set_xticks(x, types, rotation=45, ha="right", fontsize=8)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("rate")
    ax.legend(fontsize=8, ncol=len(PLOTTED), loc="upper center", bbox_to_anchor=(0.5, 1.15), frameon=False)
    fig.tight_layout()
    # fixed metadata keeps the PNG byte-identical across runs
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return path
