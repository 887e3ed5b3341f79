"""Report figures rendered to files with the Agg backend.

matplotlib is imported lazily so library users who never plot pay no
import cost and need no display stack.
"""

from __future__ import annotations

from .metrics import EvalReport, TuneResult


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def save_report_figure(report: EvalReport, path: str) -> None:
    """Per-item CER distribution plus timing histogram when available."""
    plt = _pyplot()
    rates = [
        100.0 * it.char_distance / it.ref_chars
        for it in report.items
        if it.ref_chars > 0
    ]
    secs = report.seconds
    panels = 2 if secs else 1
    fig, axes = plt.subplots(1, panels, figsize=(5.0 * panels, 3.6))
    if panels == 1:
        axes = [axes]
    axes[0].hist(rates, bins=min(30, max(5, len(rates) // 10 or 5)), color="#4878d0")
    axes[0].set_xlabel("per-item CER (%)")
    axes[0].set_ylabel("items")
    axes[0].set_title(
        f"corpus CER {100.0 * report.cer:.2f}%  WER {100.0 * report.wer:.2f}%"
    )
    if secs:
        axes[1].hist(secs, bins=min(30, max(5, len(secs) // 10 or 5)), color="#ee854a")
        axes[1].set_xlabel("seconds per item")
        axes[1].set_ylabel("items")
        axes[1].set_title(f"mean {sum(secs) / len(secs):.3f} s")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_tune_figure(result: TuneResult, path: str) -> None:
    """Objective versus LM weight, one line per order, best point marked."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    orders = sorted({p.order for p in result.points})
    for order in orders:
        pts = [
            p
            for p in result.points
            if p.order == order and p.objective_value is not None
        ]
        pts.sort(key=lambda p: p.lm_weight)
        ax.plot(
            [p.lm_weight for p in pts],
            [100.0 * p.objective_value for p in pts],
            marker="o",
            markersize=3,
            label=f"order {order}",
        )
    best = [
        p
        for p in result.points
        if p.order == result.best_order
        and p.lm_weight == result.best_weight
        and p.objective_value is not None
    ]
    if best:
        ax.scatter(
            [best[0].lm_weight],
            [100.0 * best[0].objective_value],
            marker="*",
            s=160,
            color="black",
            zorder=5,
            label="best",
        )
    ax.set_xlabel("LM weight")
    ax.set_ylabel(f"{result.objective.upper()} (%)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
