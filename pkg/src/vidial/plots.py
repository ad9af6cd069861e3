"""Figure rendering for training curves and metric reports.

Figures are written next to their delimited counterparts (loss sidecar,
report file) so a run directory is self-describing.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .metrics import MetricsReport  # noqa: E402


def save_loss_curve(losses: list[float], path, title: str = "training loss") -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(range(1, len(losses) + 1), losses, lw=1.0)
    ax.set_xlabel("step")
    ax.set_ylabel("mean NLL")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_metrics_chart(report: MetricsReport, path) -> None:
    rows = [(name, value) for name, value in report.as_rows() if not name.startswith("n_")]
    names = [name for name, _ in rows]
    values = [value for _, value in rows]
    fig, ax = plt.subplots(figsize=(max(6, 0.7 * len(rows)), 4))
    ax.bar(range(len(rows)), values, color="#4477aa")
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(names, rotation=45, ha="right")
    if any(v > 0 for v in values):
        ax.set_yscale("log")
        ax.set_ylabel("value (log scale)")
    else:
        ax.set_ylabel("value")
    ax.set_title("automatic metrics")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
