"""Figures for the report commands.  Headless (Agg); every function writes one file and returns its path."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 120,
}


def _figure(width: float = 5.0, ratio: float = 0.62):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(width, width * ratio))
    return fig, ax


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(STYLE):
        fig.tight_layout()
        fig.savefig(path)
    plt.close(fig)
    return path


def plot_convergence(medians_by_gamma: dict, path) -> Path:
    """Median KL (bits) against the number of training sequences, one line per gamma."""
    fig, ax = _figure()
    for gamma, pts in sorted(medians_by_gamma.items()):
        pts = [(m, kl) for m, kl in pts if m > 0 and kl > 0]
        if pts:
            ms, kls = zip(*pts)
            ax.loglog(ms, kls, marker="o", label=f"gamma={gamma:g}")
    ax.set_xlabel("training sequences m")
    ax.set_ylabel("KL divergence (bits)")
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_filter_mse(rows: Sequence[dict], path) -> Path:
    """MSE against delay/look-ahead index (negative = delay), universal filter vs oracle.

    ``rows`` carry ``index``, ``mse`` and optionally ``oracle_mse`` and ``label``.
    """
    fig, ax = _figure()
    by_label: dict = {}
    for r in rows:
        by_label.setdefault(r.get("label", "universal"), []).append(r)
    for label, rs in by_label.items():
        rs = sorted(rs, key=lambda r: r["index"])
        ax.plot([r["index"] for r in rs], [r["mse"] for r in rs], marker="o", label=label)
    oracle = sorted({(r["index"], r["oracle_mse"]) for r in rows if r.get("oracle_mse") is not None})
    if oracle:
        xs, ys = zip(*oracle)
        ax.plot(xs, ys, color="black", lw=1.5, label="Bayes optimum")
    ax.set_xlabel("delay (<0) / look-ahead (>0)")
    ax.set_ylabel("MSE")
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_scaling(sizes: Sequence[int], seconds: Sequence[float], nodes: Sequence[int], path) -> Path:
    """Training time and node count against corpus size on log-log axes."""
    fig, ax = _figure()
    ax.loglog(sizes, seconds, marker="o", label="train time (s)")
    ax.set_xlabel("symbols n")
    ax.set_ylabel("seconds")
    ax2 = ax.twinx()
    ax2.loglog(sizes, nodes, marker="s", color="tab:orange", label="nodes")
    ax2.set_ylabel("tree nodes")
    lines = ax.get_lines() + ax2.get_lines()
    ax.legend(lines, [ln.get_label() for ln in lines], frameon=False, loc="upper left")
    return _save(fig, path)


def plot_histograms(hist_a, hist_b, path, labels=("reference", "generated")) -> Path:
    fig, ax = _figure()
    xs = range(len(hist_a))
    total_a, total_b = sum(hist_a) or 1, sum(hist_b) or 1
    ax.step(xs, [h / total_a for h in hist_a], where="mid", label=labels[0])
    ax.step(xs, [h / total_b for h in hist_b], where="mid", label=labels[1])
    ax.set_xlabel("symbol")
    ax.set_ylabel("frequency")
    ax.legend(frameon=False)
    return _save(fig, path)
