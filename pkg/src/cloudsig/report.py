"""Comparison report figure: signatures side by side, entropy
distributions, and the metric values, rendered to a PNG next to the
JSON report."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_comparison_figure(result, path) -> None:
    """One-page summary of a ComparisonResult."""
    rp, rq = result.p, result.q
    report = result.report

    fig, axes = plt.subplots(2, 2, figsize=(10, 9))
    fig.suptitle(
        f"{rp.cloud.name}  vs  {rq.cloud.name}", fontsize=13, fontweight="bold"
    )

    for ax, res in zip(axes[0], (rp, rq)):
        img = res.sig_gm.image
        shown = np.where(res.sig_gm.mask, img.astype(np.float64), np.nan)
        ax.imshow(shown, cmap="inferno", origin="upper", interpolation="nearest")
        ax.set_title(f"S_Gm {res.cloud.name}", fontsize=10)
        ax.set_xticks([])
        ax.set_yticks([])

    ax = axes[1][0]
    centers = result.hist_p.centers()
    width = float(np.diff(result.hist_p.bin_edges).mean())
    ax.bar(centers, result.hist_p.masses, width=width, alpha=0.55, label=rp.cloud.name)
    ax.bar(centers, result.hist_q.masses, width=width, alpha=0.55, label=rq.cloud.name)
    ax.set_xlabel("E_geom (nats)")
    ax.set_ylabel("fraction")
    ax.set_title("entropy distributions", fontsize=10)
    ax.legend(fontsize=8)

    ax = axes[1][1]
    ax.axis("off")
    lines = []
    for name, label in report._LABELS:
        v = getattr(report, name)
        lines.append(f"{label:<22} {'n/a' if v is None else format(v, '.6f')}")
    ax.text(
        0.02, 0.95, "\n".join(lines), family="monospace", fontsize=10,
        va="top", transform=ax.transAxes,
    )

    fig.tight_layout(rect=(0, 0, 1, 0.96))
    tmp = str(path) + ".tmp"
    # strip the Software chunk so identical runs are byte-identical
    fig.savefig(tmp, dpi=110, format="png", metadata={"Software": None})
    plt.close(fig)
    os.replace(tmp, path)
