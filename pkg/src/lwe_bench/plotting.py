"""Matplotlib figures for reports. Everything renders to files with the Agg backend."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = [
    "plot_column_profile",
    "plot_costs",
    "plot_irwin_hall",
    "plot_slope",
    "plot_success_rates",
]

# fixed metadata keeps PNG bytes stable across runs
_META = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_META)
    plt.close(fig)
    return path


def plot_column_profile(column_std, q: int, path, threshold: float | None = None):
    """Per-column std of reduced ``A`` with the uniform level and the cruel threshold."""
    column_std = np.asarray(column_std, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(np.arange(column_std.size), column_std, lw=1, label="reduced")
    ax.axhline(q / np.sqrt(12), color="gray", ls="--", lw=1, label="uniform")
    if threshold is not None:
        ax.axhline(threshold, color="red", ls=":", lw=1, label="cruel threshold")
    ax.set_xlabel("column")
    ax.set_ylabel("std")
    ax.legend(loc="lower right", fontsize=8)
    return _save(fig, path)


def plot_success_rates(board: dict, path):
    """Success rate per h for every (setting, attack) row of a leaderboard."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for row in board["rows"]:
        hs = sorted(int(h) for h in row["rates"])
        rates = []
        for h in hs:
            ok, att = row["rates"][str(h)].split("/")
            rates.append(int(ok) / int(att))
        ax.plot(hs, rates, marker="o", label=f"{row['attack']} {row['setting']}")
    ax.set_xlabel("h")
    ax.set_ylabel("recovered / attempted")
    ax.set_ylim(-0.05, 1.05)
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_irwin_hall(check: dict, path):
    """Empirical histogram against the analytic density from ``irwin_hall_check``."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    edges = check["edges"]
    ax.stairs(check["hist"], edges, label="empirical")
    ax.plot(check["centers"], check["pdf"], color="black", lw=1, label="Irwin-Hall")
    q = check["q"]
    for j in range(1, check["n_terms"]):
        ax.axvline(j * q, color="gray", ls=":", lw=1)
    ax.set_xlabel("sum before reduction")
    ax.set_ylabel("density")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_costs(reports, path):
    """log2 cycles against beta, one line per cost model and n."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    series = {}
    for r in reports:
        series.setdefault((r.model, r.n), []).append((r.beta, r.log2_cycles))
    for (model, n), pts in sorted(series.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker=".", label=f"{model} n={n}")
    ax.set_xlabel("beta")
    ax.set_ylabel("log2 cycles")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_slope(x, y, path, slope: int | None = None):
    """Oracle output against one input coordinate."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.scatter(x, y, s=4)
    if slope is not None:
        ax.set_title(f"slope {slope}")
    ax.set_xlabel("a_i")
    ax.set_ylabel("f(a)")
    return _save(fig, path)
