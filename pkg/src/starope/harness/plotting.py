"""SVG figures for sweep reports (heatmaps and estimator comparisons)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .report import heatmap_table, select  # noqa: E402

RC = {
    "svg.hashsalt": "starope",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": (4.5, 3.2),
}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)


def plot_heatmap(rows, n: int, path) -> bool:
    ks, cs, vals = heatmap_table(rows, n)
    if not ks:
        return False
    grid = np.full((len(ks), len(cs)), np.nan)
    for i, k in enumerate(ks):
        for j, c in enumerate(cs):
            v = vals.get((k, c), math.nan)
            grid[i, j] = v if math.isfinite(v) else np.nan
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        im = ax.imshow(grid, origin="lower", aspect="auto", cmap="viridis")
        ax.set_xticks(range(len(cs)), ["inf" if c is None else str(c) for c in cs])
        ax.set_yticks(range(len(ks)), [str(k) for k in ks])
        ax.set_xlabel("clip c")
        ax.set_ylabel("|Z|")
        ax.set_title(f"log10 MSE, n={n}")
        fig.colorbar(im, ax=ax)
        _save(fig, path)
    return True


def plot_comparison(rows, n: int, path) -> bool:
    """Stacked bias^2 / variance bars with stderr whiskers, log scale."""
    picks = select(rows, n)
    bars = [(f"STAR {lab}\n|Z|={s.num_abstract},c={'inf' if s.clip_c is None else s.clip_c}", s)
            for lab, s in picks.items()]
    base = {}
    for s in rows:
        if s.estimator == "star" or s.n != n:
            continue
        if s.estimator not in base or s.mse < base[s.estimator].mse:
            base[s.estimator] = s
    bars += [(est if s.num_abstract is None else f"{est}\n|Z|={s.num_abstract}", s)
             for est, s in sorted(base.items())]
    if not bars:
        return False
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(max(4.5, 0.8 * len(bars)), 3.2))
        x = np.arange(len(bars))
        b2 = np.array([s.bias ** 2 for _, s in bars])
        var = np.array([s.variance for _, s in bars])
        ax.bar(x, b2, color="tab:red", label="bias$^2$")
        ax.bar(x, var, bottom=b2, color="tab:blue", label="variance")
        ax.errorbar(x, [s.mse for _, s in bars], yerr=[s.stderr for _, s in bars],
                    fmt="none", ecolor="black", capsize=2, lw=0.8)
        if np.all(b2 + var > 0):
            ax.set_yscale("log")
        ax.set_xticks(x, [lab for lab, _ in bars], rotation=45, ha="right")
        ax.set_ylabel("MSE")
        ax.set_title(f"n={n}")
        ax.legend(frameon=False)
        _save(fig, path)
    return True
