"""Figure rendering for the report path.

Every report run saves PNG figures next to the delimited output. Rendering
is deterministic: the Agg backend plus stripped PNG metadata make reruns
byte-identical.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .classifier import ScoredSequence, TemporalInterval  # noqa: E402
from .metrics import KRatioResult  # noqa: E402
from .store import LabelManifest  # noqa: E402

_SAVE_KWARGS = {"dpi": 120, "metadata": {"Software": None}}


def save_score_figure(
    scored: ScoredSequence,
    threshold: float,
    path: str | Path,
    manifest: LabelManifest | None = None,
    interval: TemporalInterval | None = None,
) -> None:
    """Per-frame score curve with threshold line and interval shading."""
    fig, ax = plt.subplots(figsize=(8, 3.2))
    ax.plot(scored.scores, color="tab:blue", lw=1.2, label="anomaly score")
    ax.axhline(threshold, color="tab:red", ls="--", lw=1.0, label=f"threshold {threshold:g}")
    gt = manifest.enclosing_interval() if manifest is not None else None
    if gt is not None:
        ax.axvspan(gt[0], gt[1], color="tab:green", alpha=0.15, label="labeled span")
    if interval is not None and interval.present:
        ax.axvspan(interval.start_frame, interval.end_frame, color="tab:orange",
                   alpha=0.25, label="predicted span")
    ax.set_xlabel("frame")
    ax.set_ylabel("score")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title(scored.video_id)
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def save_ablation_figure(rows: list[KRatioResult], n_patches: int, path: str | Path) -> None:
    """Keep-ratio sweep: token budget bars plus IoU/AUC curves."""
    ks = [r.k for r in rows]
    fig, (ax_budget, ax_metric) = plt.subplots(1, 2, figsize=(9, 3.4))
    ax_budget.bar([f"{k:g}" for k in ks], [r.selected_per_frame for r in rows], color="tab:blue")
    ax_budget.axhline(n_patches, color="gray", ls=":", lw=1.0, label=f"all {n_patches} patches")
    ax_budget.set_xlabel("keep ratio K")
    ax_budget.set_ylabel("tokens kept per frame")
    ax_budget.legend(fontsize=8)
    ax_metric.plot(ks, [r.auc for r in rows], marker="o", color="tab:blue", label="frame AUC")
    ax_metric.plot(ks, [r.iou for r in rows], marker="s", color="tab:orange", label="temporal IoU")
    ax_metric.set_xlabel("keep ratio K")
    ax_metric.set_ylabel("metric")
    ax_metric.set_ylim(-0.02, 1.02)
    ax_metric.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)
