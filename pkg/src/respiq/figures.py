"""Figure rendering for evaluation reports.

Kept separate from the evaluation harness itself: the harness produces
data (CSV/JSON), the CLI report path calls into here to render PNGs next
to them. All figures are derived purely from an :class:`EvalReport`, so
identical reports render identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import EvalReport

_METHOD_COLORS = {
    "oracle": "black",
    "quality": "tab:blue",
    "snr": "tab:orange",
    "cfar": "tab:green",
    "variance": "tab:red",
}


def _color(method: str) -> str:
    return _METHOD_COLORS.get(method.replace("_noinv", ""), "tab:gray")


def render_cdf(report: EvalReport, path) -> None:
    """Empirical CDF of correlation-with-truth per method."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for method in report.methods:
        points = report.per_method[method]["cdf"]
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        style = "--" if method.endswith("_noinv") else "-"
        ax.step(xs, ys, where="post", label=method, color=_color(method), linestyle=style)
    ax.set_xlabel("correlation with ground truth")
    ax.set_ylabel("cumulative fraction of scenes")
    ax.set_xlim(-1, 1)
    ax.set_ylim(0, 1)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_score_scatter(report: EvalReport, path) -> None:
    """Quality score vs true correlation for every scored candidate."""
    fig, ax = plt.subplots(figsize=(5, 5))
    xs = [row["r_with_truth"] for row in report.scored_rows]
    ys = [row["score"] for row in report.scored_rows]
    ax.scatter(xs, ys, s=4, alpha=0.3, color="tab:blue", edgecolors="none")
    ax.plot([-1, 1], [-1, 1], color="gray", linewidth=0.8, linestyle=":")
    ax.set_xlabel("correlation with ground truth")
    ax.set_ylabel("quality score")
    ax.set_xlim(-1, 1)
    ax.set_ylim(-1, 1)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_mean_bars(report: EvalReport, path) -> None:
    """Mean correlation per method, ablation variants alongside."""
    fig, ax = plt.subplots(figsize=(6, 4))
    methods = report.methods
    means = [report.per_method[m]["mean_r"] for m in methods]
    colors = [_color(m) for m in methods]
    ax.bar(range(len(methods)), means, color=colors, alpha=0.85)
    ax.set_xticks(range(len(methods)))
    ax.set_xticklabels(methods, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("mean correlation with ground truth")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_report_figures(report: EvalReport, out_dir) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "cdf": out_dir / "cdf.png",
        "score_scatter": out_dir / "score_vs_truth.png",
        "mean_bars": out_dir / "mean_r.png",
    }
    render_cdf(report, paths["cdf"])
    render_score_scatter(report, paths["score_scatter"])
    render_mean_bars(report, paths["mean_bars"])
    return paths
