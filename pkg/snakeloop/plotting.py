"""SVG bifurcation diagrams of computed branches over their predictions."""

from collections.abc import Sequence
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "snakeloop"


def bifurcation_diagram(
    computed: pd.DataFrame | None,
    predictions: Sequence[pd.DataFrame],
    path: Path,
    title: str = "",
    L_column: str = "L",
) -> Path:
    """Plot μ against L: computed points solid, predictions dashed.

    ``predictions`` are frames with ``L`` (already in the computed units) and
    ``mu`` columns, one per predicted branch.
    """
    if computed is None and not predictions:
        raise ValueError("nothing to plot")
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for i, frame in enumerate(predictions):
        ax.plot(
            frame["mu"],
            frame[L_column],
            "--",
            color="0.45",
            linewidth=1.0,
            label="prediction" if i == 0 else None,
        )
    if computed is not None and len(computed):
        ax.plot(
            computed["mu"], computed["L"], "-", color="tab:blue", linewidth=1.4, label="computed"
        )
    ax.set_xlabel("μ")
    ax.set_ylabel("L")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", frameon=False)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)
    return path


def phase_loop_diagram(frame: pd.DataFrame, path: Path, title: str = "") -> Path:
    """ψ and μ along a front loop against s."""
    fig, (top, bottom) = plt.subplots(2, 1, sharex=True, figsize=(7, 5))
    top.plot(frame["s"], frame["psi"], ".-", color="tab:purple", markersize=3)
    top.set_ylabel("ψ")
    bottom.plot(frame["s"], frame["mu"], ".-", color="tab:green", markersize=3)
    bottom.set_ylabel("μ")
    bottom.set_xlabel("s")
    for ax in (top, bottom):
        ax.grid(True, alpha=0.3)
    if title:
        top.set_title(title)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)
    return path
