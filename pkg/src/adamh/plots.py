"""Figure rendering for the benchmark report path.

Writes one trace and one histogram PNG per parameter next to the delimited
output.  Kept separate from the CLI so library users can render from a
ChainHistory directly.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_TRACE_POINTS = 2000
_HIST_BINS = 50


def render_figures(out_dir, names, draws) -> list:
    """Render trace_<param>.png and hist_<param>.png; returns written paths."""
    out_dir = Path(out_dir)
    written = []
    n = draws.shape[0]
    stride = max(1, n // _TRACE_POINTS)
    for j, name in enumerate(names):
        col = draws[:, j]

        fig, ax = plt.subplots(figsize=(6, 2.4))
        ax.plot(range(0, n, stride), col[::stride], lw=0.5, color="tab:blue")
        ax.set_xlabel("iteration")
        ax.set_ylabel(name)
        fig.tight_layout()
        path = out_dir / f"trace_{name}.png"
        fig.savefig(path, dpi=110)
        plt.close(fig)
        written.append(path)

        fig, ax = plt.subplots(figsize=(4, 3))
        ax.hist(col, bins=_HIST_BINS, density=True, color="tab:gray",
                edgecolor="white", linewidth=0.3)
        ax.set_xlabel(name)
        ax.set_ylabel("density")
        fig.tight_layout()
        path = out_dir / f"hist_{name}.png"
        fig.savefig(path, dpi=110)
        plt.close(fig)
        written.append(path)
    return written
