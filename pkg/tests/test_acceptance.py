"""Acceptance suite: one test per release criterion, at stated tolerances.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS/FAIL line
per criterion. The end-to-end criteria train on the even-index frames of the
generated sequence and measure AUC on the held-out odd-index frames;
training-set AUC would be inflated by memorization and would not reflect
whether a signal exists.
"""
from __future__ import annotations

import math
import time

import numpy as np

from efftok.classifier import (
    AnomalyModel,
    bce_loss,
    extract_interval,
    gradient,
    render_prompt,
    score_sequence,
    train,
)
from efftok.classifier import TemporalInterval
from efftok.cli import main as cli_main
from efftok.metrics import frame_auc, temporal_iou
from efftok.select import selection_mask, token_budget
from efftok.store import SyntheticSpec, generate_synthetic

from test_classifier import fd_gradient, flatten_params, random_model
from test_select import brute_force_mask


def check(name: str, ok: bool, detail: str = "") -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


def test_topk_oracle_equivalence():
    rng = np.random.default_rng(2024)
    start = time.monotonic()
    mismatches = 0
    for _ in range(1000):
        n = int(rng.integers(1, 65))
        k = float(rng.uniform(0.001, 1.0))
        # mixed continuous and quantized maps so ties occur often
        values = rng.uniform(0, 4, size=n)
        if rng.random() < 0.5:
            values = np.round(values)
        mask = selection_mask(values, k)
        if not np.array_equal(mask.bits, brute_force_mask(values, k)):
            mismatches += 1
    elapsed = time.monotonic() - start
    check(
        "top-K oracle equivalence (1000 random maps, ties included)",
        mismatches == 0 and elapsed < 5.0,
        f"{mismatches} mismatches, {elapsed:.2f}s",
    )


def test_budget_law():
    grid = [0.1, 0.3, 0.5, 0.7, 0.9]
    expected = [58, 173, 288, 403, 518]
    rng = np.random.default_rng(7)
    counts = [selection_mask(rng.uniform(size=576), k).selected_count for k in grid]
    budgets = [token_budget(k, 576) for k in grid]
    half = selection_mask(rng.uniform(size=576), 0.5)
    compression = 1.0 - half.selected_count / 576
    check(
        "budget law on the 576-patch grid",
        counts == expected and budgets == expected and compression == 0.5,
        f"counts={counts}, compression@0.5={compression}",
    )


def test_gradient_check():
    rng = np.random.default_rng(99)
    start = time.monotonic()
    worst = 0.0
    for _ in range(100):
        model = random_model(rng)
        normals = rng.standard_normal((int(rng.integers(1, 5)), model.num_channels))
        anomalies = rng.standard_normal((int(rng.integers(1, 5)), model.num_channels))
        g = gradient(model, normals, anomalies)
        analytic = np.concatenate([g.w1.ravel(), g.b1, g.w2, [g.b2]])
        numeric = fd_gradient(model, normals, anomalies, h_step=1e-4)
        rel = np.abs(analytic - numeric) / np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))
        worst = max(worst, float(rel.max()))
    elapsed = time.monotonic() - start
    check(
        "analytic vs central-difference gradients (100 draws, h=1e-4)",
        worst <= 1e-4 and elapsed < 30.0,
        f"max relative error {worst:.2e}, {elapsed:.1f}s",
    )


def _end_to_end(mean_shift: float):
    spec = SyntheticSpec(
        num_frames=200, num_patches=8, num_channels=16,
        anomaly_start=80, anomaly_end=119, anomaly_region=(0, 1),
        mean_shift=mean_shift, noise_scale=1.0, seed=7,
    )
    seq, manifest = generate_synthetic(spec)
    labels = np.asarray(manifest.frame_labels, dtype=bool)
    even = np.arange(seq.num_frames) % 2 == 0
    model, log = train(seq.class_embeddings[even & ~labels], seq.class_embeddings[even & labels])
    scored = score_sequence(model, seq)
    auc = frame_auc(scored.scores[~even], labels[~even].astype(int))
    iou = temporal_iou(extract_interval(scored, 0.5), manifest.enclosing_interval())
    return auc, iou, log


def test_synthetic_end_to_end():
    start = time.monotonic()
    auc, iou, log = _end_to_end(mean_shift=2.0)
    elapsed = time.monotonic() - start
    trend_ok = log.epoch_losses[-1] < log.epoch_losses[0]
    check(
        "synthetic end-to-end: learnable signal recovered",
        auc >= 0.99 and iou >= 0.90 and trend_ok and elapsed < 60.0,
        f"held-out AUC={auc:.4f}, IoU={iou:.4f}, loss {log.epoch_losses[0]:.3f}->{log.final_loss:.4f}, {elapsed:.1f}s",
    )


def test_zero_signal_control():
    auc, _, _ = _end_to_end(mean_shift=0.0)
    check(
        "zero-signal control stays at chance level",
        0.4 <= auc <= 0.6,
        f"held-out AUC={auc:.4f}",
    )


def test_template_byte_exactness():
    golden = (
        "Known common crime types are: 'Shooting','Arson','Arrest'. "
        "There is one of the crime types occurring from frame 2 to frame 4."
    )
    prompt = render_prompt(
        TemporalInterval(2, 4, 0.5, True),
        categories=["Shooting", "Arson", "Arrest"],
        timestamp_format="frames",
    )
    check("prompt template byte-exactness", prompt.text == golden, repr(prompt.text[:60]))


def test_cli_determinism(tmp_path, monkeypatch):
    steps = [
        ("gen", "--frames", "60", "--patches", "16", "--channels", "8",
         "--anomaly", "20:39", "--seed", "7", "--out", "v1"),
        ("select", "--input", "v1.vaeb", "--k", "0.5", "--out", "sel.json",
         "--tokens-out", "sel.bin"),
        ("train", "--input", "v1.vaeb", "--labels", "v1.labels.json",
         "--seed", "42", "--out", "model.json"),
        ("score", "--model", "model.json", "--input", "v1.vaeb", "--out", "s.json"),
        ("tet", "--scores", "s.json", "--threshold", "0.5", "--out", "p.txt"),
        ("eval", "--scores", "s.json", "--labels", "v1.labels.json",
         "--selection", "sel.json", "--out", "report.json"),
        ("ablate", "--input", "v1.vaeb", "--labels", "v1.labels.json",
         "--model", "model.json", "--out", "ab.json"),
    ]
    outputs = [
        "v1.vaeb", "v1.labels.json", "sel.json", "sel.bin", "model.json",
        "s.json", "p.txt", "report.json", "report.csv", "report.png",
        "ab.json", "ab.csv", "ab.png",
    ]
    snapshots = []
    for run in ("first", "second"):
        workdir = tmp_path / run
        workdir.mkdir()
        monkeypatch.chdir(workdir)
        for step in steps:
            assert cli_main(list(step)) == 0, step
        snapshots.append({name: (workdir / name).read_bytes() for name in outputs})
    diffs = [name for name in outputs if snapshots[0][name] != snapshots[1][name]]
    check(
        "subcommand reruns are byte-identical",
        not diffs,
        f"{len(outputs)} files compared" + (f", diffs: {diffs}" if diffs else ""),
    )


def test_loss_anchors():
    zero = AnomalyModel(np.zeros((4, 3)), np.zeros(4), np.zeros(4), 0.0)
    rng = np.random.default_rng(5)
    anchor = bce_loss(zero, rng.standard_normal((6, 3)), rng.standard_normal((3, 3)))
    anchor_ok = abs(anchor - 2 * math.log(2)) <= 1e-12

    negatives = 0
    for _ in range(10_000):
        model = AnomalyModel(
            w1=rng.standard_normal((4, 3)),
            b1=rng.standard_normal(4),
            w2=rng.standard_normal(4),
            b2=float(rng.standard_normal()),
        )
        loss = bce_loss(model, rng.standard_normal((2, 3)), rng.standard_normal((2, 3)))
        if loss < 0.0:
            negatives += 1
    check(
        "loss anchors: 2 ln 2 at zero logits, non-negative everywhere",
        anchor_ok and negatives == 0,
        f"|loss - 2ln2| = {abs(anchor - 2 * math.log(2)):.1e}, {negatives} negatives in 10000 batches",
    )
