"""Benchmark figures rendered next to the CSV table.

Two plots: a histogram of pipeline and baseline ratios against the exact
optimum, and a value scatter of pipeline results over optima.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def render_bench_figures(rows, csv_path: str) -> list:
    """Write PNG figures alongside the bench CSV; returns the file paths."""
    stem, _ = os.path.splitext(csv_path)
    written = []
    if not rows:
        return written
    pipeline_ratios = [r["pipeline_ratio"] for r in rows if r["opt"] > 0]
    greedy_ratios = [r["greedy_ratio"] for r in rows if r["opt"] > 0]
    opts = [r["opt"] for r in rows]
    values = [r["pipeline_value"] for r in rows]

    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    bins = [x / 20 for x in range(0, 22)]
    ax.hist(pipeline_ratios, bins=bins, alpha=0.65, label="pipeline / OPT")
    ax.hist(greedy_ratios, bins=bins, alpha=0.65, label="greedy / OPT")
    ax.set_xlabel("value ratio to exact optimum")
    ax.set_ylabel("runs")
    ax.legend(loc="upper left")
    ax.set_title("solution quality on the benchmark corpus")
    fig.tight_layout()
    path = f"{stem}_ratios.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(5.2, 5.0))
    top = max(opts + values + [1.0])
    ax.plot([0, top], [0, top], color="grey", linewidth=1, linestyle="--",
            label="parity")
    ax.scatter(opts, values, s=18, alpha=0.7)
    ax.set_xlabel("exact optimum")
    ax.set_ylabel("pipeline value")
    ax.legend(loc="upper left")
    ax.set_title("pipeline value vs optimum")
    fig.tight_layout()
    path = f"{stem}_values.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)
    return written
