"""Evaluation harness: frame-level AUC, temporal IoU, token budgets, ablation.

Frame AUC and temporal IoU are the desk-scale projections of downstream QA
quality; token budgets are exact. Reports are schema-stable JSON with a
deterministic key order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .classifier import AnomalyModel, ScoredSequence, extract_interval, score_sequence
from .select import SelectionStats, process_sequence, token_budget
from .store import FrameSequence, LabelManifest

REPORT_NOTE = (
    "frame_auc and temporal_iou are desk-scale proxies for downstream QA "
    "accuracy, which requires a language model; token budgets are exact."
)


class UndefinedMetricError(ValueError):
    """Metric is undefined for the given inputs (e.g. single-class labels)."""


class BudgetLawError(ValueError):
    """A selection run violated the max(1, round_half_up(K*N)) budget."""


def _tied_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(values.shape[0], dtype=np.float64)
    i = 0
    while i < order.size:
        j = i
        while j + 1 < order.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def frame_auc(scores: ScoredSequence | np.ndarray, labels: LabelManifest | Sequence[int]) -> float:
    """ROC area of per-frame anomaly scores against 0/1 labels.

    Rank-based: ties contribute half credit. Raises UndefinedMetricError
    when only one class is present.
    """
    s = scores.scores if isinstance(scores, ScoredSequence) else np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels.frame_labels if isinstance(labels, LabelManifest) else labels)
    if s.shape != y.shape:
        raise ValueError(f"scores ({s.shape}) and labels ({y.shape}) must align")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("frame_auc needs both classes present")
    ranks = _tied_ranks(s)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def _span(interval) -> tuple[int, int] | None:
    """Normalize interval-ish inputs to an inclusive (start, end) or None."""
    if interval is None:
        return None
    if hasattr(interval, "present"):
        return interval.as_tuple()
    start, end = int(interval[0]), int(interval[1])
    if start > end:
        raise ValueError(f"invalid interval [{start}, {end}]")
    return (start, end)


def temporal_iou(pred, gt) -> float:
    """Intersection over union of two inclusive frame spans.

    Either side may be absent (None / present=False): one absent span gives
    0.0 against a present one, and two absent spans agree perfectly (1.0).
    """
    p, g = _span(pred), _span(gt)
    if p is None and g is None:
        return 1.0
    if p is None or g is None:
        return 0.0
    inter = min(p[1], g[1]) - max(p[0], g[0]) + 1
    if inter <= 0:
        return 0.0
    union = (p[1] - p[0] + 1) + (g[1] - g[0] + 1) - inter
    return inter / union


def token_stats(selection: SelectionStats | Sequence[int], n_patches: int | None = None) -> dict:
    """Mean per-frame kept-token count and the resulting compression ratio."""
    if isinstance(selection, SelectionStats):
        counts, n = selection.selected_counts, selection.n_patches
    else:
        counts, n = list(selection), n_patches
        if n is None:
            raise ValueError("n_patches is required when passing raw counts")
    if not counts:
        raise ValueError("token_stats needs at least one frame")
    mean_selected = float(np.mean(counts))
    return {"mean_selected": mean_selected, "compression_ratio": 1.0 - mean_selected / n}


@dataclass
class KRatioResult:
    k: float
    selected_per_frame: float
    iou: float
    auc: float

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "selected_per_frame": self.selected_per_frame,
            "iou": self.iou,
            "auc": self.auc,
        }


def ablate_k(
    seq: FrameSequence,
    manifest: LabelManifest,
    model: AnomalyModel,
    k_list: Sequence[float],
    threshold: float = 0.5,
) -> list[KRatioResult]:
    """Sweep the keep-ratio grid, recording budget, IoU, and AUC per K.

    Scoring consumes class embeddings only, so the IoU/AUC columns are
    K-invariant here; the budget column is checked against the count law and
    any violation raises BudgetLawError.
    """
    if not k_list:
        raise ValueError("k_list must not be empty")
    if any(not (0.0 < k <= 1.0) for k in k_list):
        raise ValueError("every k must lie in (0, 1]")
    scored = score_sequence(model, seq)
    auc = frame_auc(scored, manifest)
    iou = temporal_iou(extract_interval(scored, threshold), manifest.enclosing_interval())
    results = []
    for k in sorted(k_list):
        _, stats = process_sequence(seq, k)
        expected = token_budget(k, seq.num_patches)
        if any(c != expected for c in stats.selected_counts):
            raise BudgetLawError(
                f"K={k}: selected counts {sorted(set(stats.selected_counts))} != budget {expected}"
            )
        results.append(KRatioResult(k=float(k), selected_per_frame=stats.mean_selected, iou=iou, auc=auc))
    return results


@dataclass
class EvalReport:
    frame_auc: float
    temporal_iou: float
    compression_ratio: float
    per_k_results: list[KRatioResult] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    note: str = REPORT_NOTE

    def to_dict(self) -> dict:
        return {
            "note": self.note,
            "config": self.config,
            "frame_auc": self.frame_auc,
            "temporal_iou": self.temporal_iou,
            "compression_ratio": self.compression_ratio,
            "per_k_results": [r.to_dict() for r in self.per_k_results],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(
            frame_auc=float(d["frame_auc"]),
            temporal_iou=float(d["temporal_iou"]),
            compression_ratio=float(d["compression_ratio"]),
            per_k_results=[
                KRatioResult(float(r["k"]), float(r["selected_per_frame"]), float(r["iou"]), float(r["auc"]))
                for r in d["per_k_results"]
            ],
            config=dict(d.get("config", {})),
            note=str(d.get("note", REPORT_NOTE)),
        )

    def validate(self) -> None:
        for name in ("frame_auc", "temporal_iou", "compression_ratio"):
            val = getattr(self, name)
            if not (0.0 <= val <= 1.0):
                raise ValueError(f"{name}={val} outside [0, 1]")
        ks = [r.k for r in self.per_k_results]
        if ks != sorted(ks):
            raise ValueError("per_k_results must be sorted ascending by k")


def write_report(report: EvalReport, path: str | Path) -> None:
    """Schema-stable JSON with deterministic key order."""
    report.validate()
    Path(path).write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")


def read_report(path: str | Path) -> EvalReport:
    return EvalReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
