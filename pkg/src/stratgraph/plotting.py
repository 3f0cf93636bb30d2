"""Figures for sweep summaries. Rendering uses the non-interactive Agg backend."""

from __future__ import annotations

from pathlib import Path

ARM_STYLE = {
    "benchmark": {"color": "0.45", "linestyle": "--", "label": "non-strategic benchmark"},
    "naive": {"color": "tab:blue", "linestyle": "-", "label": "naive"},
    "robust": {"color": "tab:orange", "linestyle": "-", "label": "robust"},
    "optimum": {"color": "tab:green", "linestyle": ":", "label": "strategic optimum"},
}

AXIS_LABEL = {
    "alpha": r"graph weight $\alpha$",
    "d": "max moving distance $d$",
    "T": "response layers $T$",
    "K": "propagation steps $K$",
    "q": "disconnected nodes (top q%)",
}


def plot_summary(summary: list[dict], arms, path, title=None):
    """Accuracy (mean with standard-error bars) per arm against the sweep value."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    xs = [float(s["value"]) for s in summary]
    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    for arm in arms:
        style = ARM_STYLE.get(arm, {"label": arm})
        ys = [s[f"{arm}_accuracy_mean"] for s in summary]
        es = [s[f"{arm}_accuracy_se"] for s in summary]
        ax.errorbar(xs, ys, yerr=es, marker="o", markersize=3, capsize=2, **style)
    axis = summary[0]["axis"] if summary else ""
    ax.set_xlabel(AXIS_LABEL.get(axis, axis))
    ax.set_ylabel("test accuracy")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    path = Path(path)
    # fixed metadata keeps the PNG bytes stable across runs
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path
