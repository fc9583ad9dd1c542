"""Report figures rendered to SVG files with matplotlib, byte-identical across runs.

Determinism knobs: the Agg backend, a fixed svg.hashsalt, and no Date
metadata in the output. The heatmap uses a fixed palette with intensity
linear in hours/24; cells whose modality is missing entirely (None) are
hatched, which keeps them visually distinct from zero-hour cells.
"""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

from .errors import InvalidRange  # noqa: E402
from .reporting import CompletionReport, ContiguityMatrix  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "cohortkit"

HEATMAP_CMAP = "Blues"


def _fig_to_svg(fig) -> bytes:
    buf = io.BytesIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def render_heatmap(matrix: ContiguityMatrix) -> bytes:
    """Day x modality grid, color intensity = hours present / 24."""
    if not matrix.dates or not matrix.modalities:
        raise InvalidRange("empty contiguity matrix")
    n_days = len(matrix.dates)
    n_mods = len(matrix.modalities)
    grid = np.zeros((n_mods, n_days))
    missing = []
    for d in range(n_days):
        for m in range(n_mods):
            value = matrix.hours[d][m]
            if value is None:
                missing.append((d, m))
                grid[m, d] = 0.0
            else:
                grid[m, d] = value
    fig, ax = plt.subplots(
        figsize=(max(4.0, 0.28 * n_days + 2.2), max(2.5, 0.3 * n_mods + 1.6))
    )
    ax.imshow(grid, cmap=HEATMAP_CMAP, vmin=0.0, vmax=24.0, aspect="auto", interpolation="nearest")
    for d, m in missing:
        ax.add_patch(
            Rectangle(
                (d - 0.5, m - 0.5), 1.0, 1.0, fill=False, hatch="///", edgecolor="0.6", linewidth=0.0
            )
        )
    ax.set_xticks(range(n_days))
    ax.set_xticklabels([d.isoformat() for d in matrix.dates], rotation=90, fontsize=6)
    ax.set_yticks(range(n_mods))
    ax.set_yticklabels(matrix.modalities, fontsize=7)
    ax.set_xlabel("local date")
    ax.set_title(f"hours with data per day: {matrix.user_id}")
    fig.tight_layout()
    return _fig_to_svg(fig)


def render_completion_chart(report: CompletionReport) -> bytes:
    """Completion-rate bar per participant; the dashed line is the project mean."""
    users = [row.user_id for row in report.rows]
    rates = [row.rate if row.rate is not None else 0.0 for row in report.rows]
    has_rate = [row.rate is not None for row in report.rows]
    fig, ax = plt.subplots(figsize=(max(4.0, 0.6 * len(users) + 2.0), 3.2))
    colors = ["#4878a8" if ok else "#cccccc" for ok in has_rate]
    ax.bar(range(len(users)), rates, color=colors)
    if report.project_mean is not None:
        ax.axhline(report.project_mean, color="#b04030", linestyle="--", linewidth=1.0)
    ax.set_xticks(range(len(users)))
    ax.set_xticklabels(users, rotation=45, fontsize=7)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("completion rate")
    ax.set_title(f"questionnaire completion: {report.project_id}")
    fig.tight_layout()
    return _fig_to_svg(fig)
