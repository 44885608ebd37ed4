"""Figures written next to the CSV outputs of the CLI.

Only the non-interactive Agg backend is used, so figures can be rendered on
headless machines.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .evaluation import group_triples  # noqa: E402
from .grid import values  # noqa: E402

ROLE_COLOURS = {"A": "#4c72b0", "C": "#55a868", "B": "#c44e52"}


def plot_maps(panels, path, cmap="gray"):
    """Side-by-side panels, e.g. input, intensity and structural confidence.

    ``panels`` is a sequence of ``(title, grid)`` pairs.  Confidence-like
    panels share the ``[0, 1]`` colour range.
    """
    n = len(panels)
    fig, axes = plt.subplots(1, n, figsize=(3.2 * n, 3.4), squeeze=False)
    for ax, (title, grid) in zip(axes[0], panels):
        im = ax.imshow(values(grid), cmap=cmap, vmin=0.0, vmax=1.0, interpolation="nearest")
        ax.set_title(title, fontsize=10)
        ax.set_xticks([])
        ax.set_yticks([])
    fig.colorbar(im, ax=axes[0].tolist(), fraction=0.025, pad=0.02)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def plot_patch_boxes(intensity, structural, patches, path):
    """Box plots of patch samples, grouped by map and artifact kind, ordered A, C, B."""
    triples = group_triples(patches)
    kinds = sorted({t["A"].kind for t in triples})
    order = ("A", "C", "B")
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6), sharey=True)
    for ax, (name, grid) in zip(axes, (("intensity", intensity), ("structural", structural))):
        data, labels, colours = [], [], []
        for kind in kinds:
            for role in order:
                samples = [t[role].samples(grid).ravel() for t in triples if t["A"].kind == kind]
                data.append(np.concatenate(samples))
                labels.append(f"{kind[:6]}\n{role}")
                colours.append(ROLE_COLOURS[role])
        box = ax.boxplot(data, patch_artist=True, widths=0.6)
        ax.set_xticks(range(1, len(labels) + 1), labels, fontsize=8)
        for patch, colour in zip(box["boxes"], colours):
            patch.set_facecolor(colour)
            patch.set_alpha(0.6)
        ax.set_title(f"{name} confidence", fontsize=10)
        ax.set_ylim(0.0, 1.02)
        ax.grid(axis="y", alpha=0.3)
    axes[0].set_ylabel("confidence")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)

