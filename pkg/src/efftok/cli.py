"""Command-line pipeline: gen, select, train, score, tet, eval, ablate.

Every subcommand is deterministic given its inputs and seed; reruns produce
byte-identical files. Exit codes: 0 success, 1 validation error, 2 IO error.
The report subcommands (eval, ablate) write a CSV table and PNG figures next
to the JSON report.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import classifier, metrics, plots, select, store

DEFAULT_K = 0.5
DEFAULT_THRESHOLD = 0.5
DEFAULT_SEED = 42


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 1 (not 2) on usage errors."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _parse_span(text: str, what: str) -> tuple[int, int]:
    try:
        lo, hi = text.split(":")
        return int(lo), int(hi)
    except ValueError:
        raise ValueError(f"{what} must look like START:END, got {text!r}") from None


def _parse_k_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ValueError(f"--k-list must be comma-separated reals, got {text!r}") from None


def _json_dump(doc: dict, path: Path) -> None:
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _echo(args: argparse.Namespace, keys: list[str]) -> dict:
    return {"subcommand": args.command, **{k: getattr(args, k) for k in keys}}


def cmd_gen(args) -> int:
    anomaly = _parse_span(args.anomaly, "--anomaly") if args.anomaly else (None, None)
    if args.region:
        lo, hi = _parse_span(args.region, "--region")
        region = tuple(range(lo, hi + 1))
    elif anomaly[0] is not None:
        region = tuple(range(max(1, args.patches // 4)))
    else:
        region = ()
    spec = store.SyntheticSpec(
        num_frames=args.frames,
        num_patches=args.patches,
        num_channels=args.channels,
        anomaly_start=anomaly[0],
        anomaly_end=anomaly[1],
        anomaly_region=region,
        mean_shift=args.mean_shift,
        noise_scale=args.noise_scale,
        seed=args.seed,
        fps=args.fps,
    )
    seq, manifest = store.generate_synthetic(spec)
    vaeb = Path(f"{args.out}.vaeb")
    labels = Path(f"{args.out}.labels.json")
    store.write_sequence(seq, vaeb)
    manifest.save(labels)
    config = _echo(args, ["frames", "patches", "channels", "anomaly", "region",
                          "mean_shift", "noise_scale", "fps", "seed"])
    print(f"wrote {vaeb} and {labels}")
    print(f"config: {json.dumps(config, sort_keys=True)}")
    return 0


def cmd_select(args) -> int:
    seq = store.read_sequence(args.input)
    results, stats = select.process_sequence(seq, args.k)
    doc = {
        "video_id": seq.video_id,
        "n_patches": seq.num_patches,
        "k_ratio": args.k,
        "mean_selected": stats.mean_selected,
        "compression_ratio": stats.compression_ratio,
        "frames": [
            {
                "frame": t,
                "selected_count": r.mask.selected_count,
                "indices": [int(i) for i in r.token_set.indices],
            }
            for t, r in enumerate(results)
        ],
        "config": _echo(args, ["input", "k", "out", "tokens_out"]),
    }
    _json_dump(doc, Path(args.out))
    if args.tokens_out:
        payload = b"".join(r.token_set.vectors.astype("<f4").tobytes() for r in results)
        Path(args.tokens_out).write_bytes(payload)
    print(f"selected {stats.mean_selected:g} of {seq.num_patches} patches/frame "
          f"(compression {stats.compression_ratio:.3f}) -> {args.out}")
    return 0


def _split_by_labels(seq: store.FrameSequence, manifest: store.LabelManifest):
    if seq.num_frames != manifest.num_frames:
        raise ValueError(f"sequence has {seq.num_frames} frames, manifest {manifest.num_frames}")
    labels = np.asarray(manifest.frame_labels, dtype=bool)
    return seq.class_embeddings[~labels], seq.class_embeddings[labels]


def cmd_train(args) -> int:
    seq = store.read_sequence(args.input)
    manifest = store.LabelManifest.load(args.labels)
    normals, anomalies = _split_by_labels(seq, manifest)
    config = classifier.TrainConfig(
        learning_rate=args.lr, epochs=args.epochs, batch_size=args.batch, seed=args.seed
    )
    model, log = classifier.train(normals, anomalies, config, hidden=args.hidden)
    model.save(args.out)
    print(f"trained on {len(normals)} normal / {len(anomalies)} anomalous frames; "
          f"loss {log.epoch_losses[0]:.4f} -> {log.final_loss:.4f}; wrote {args.out}")
    return 0


def cmd_score(args) -> int:
    model = classifier.AnomalyModel.load(args.model)
    seq = store.read_sequence(args.input)
    scored = classifier.score_sequence(model, seq)
    classifier.save_scores(scored, args.threshold, Path(args.out))
    print(f"scored {scored.num_frames} frames -> {args.out}")
    return 0


def _load_categories(args) -> list[str] | None:
    if args.categories_file:
        cats = [line.strip() for line in Path(args.categories_file).read_text(encoding="utf-8").splitlines()]
        return [c for c in cats if c]
    if args.categories:
        return [c.strip() for c in args.categories.split(",") if c.strip()]
    return None


def cmd_tet(args) -> int:
    scored, file_threshold = classifier.load_scores(args.scores)
    threshold = args.threshold if args.threshold is not None else file_threshold
    scored = classifier.smooth_scores(scored, args.smooth_window)
    interval = classifier.extract_interval(scored, threshold)
    if not interval.present:
        print(f"no frame scored >= {threshold:g}; no prompt emitted")
        return 0
    prompt = classifier.render_prompt(
        interval, fps=scored.fps, categories=_load_categories(args), timestamp_format=args.format
    )
    classifier.save_prompt(prompt, Path(args.out))
    print(f"interval [{interval.start_frame}, {interval.end_frame}] -> {args.out}")
    return 0


def _report_sidecars(out: Path) -> tuple[Path, Path]:
    return out.with_suffix(".csv"), out.with_suffix(".png")


def cmd_eval(args) -> int:
    scored, file_threshold = classifier.load_scores(args.scores)
    threshold = args.threshold if args.threshold is not None else file_threshold
    manifest = store.LabelManifest.load(args.labels)
    if scored.num_frames != manifest.num_frames:
        raise ValueError(f"scores cover {scored.num_frames} frames, manifest {manifest.num_frames}")
    selection = json.loads(Path(args.selection).read_text(encoding="utf-8"))
    interval = classifier.extract_interval(scored, threshold)
    report = metrics.EvalReport(
        frame_auc=metrics.frame_auc(scored, manifest),
        temporal_iou=metrics.temporal_iou(interval, manifest.enclosing_interval()),
        compression_ratio=float(selection["compression_ratio"]),
        per_k_results=[],
        config=_echo(args, ["scores", "labels", "selection", "out"]) | {"threshold": threshold},
    )
    out = Path(args.out)
    metrics.write_report(report, out)
    csv_path, png_path = _report_sidecars(out)
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "label", "score"])
        for t, (label, s) in enumerate(zip(manifest.frame_labels, scored.scores)):
            writer.writerow([t, label, f"{s:.10g}"])
        writer.writerow([])
        writer.writerow(["frame_auc", "temporal_iou", "compression_ratio"])
        writer.writerow([f"{report.frame_auc:.10g}", f"{report.temporal_iou:.10g}",
                         f"{report.compression_ratio:.10g}"])
    plots.save_score_figure(scored, threshold, png_path, manifest=manifest, interval=interval)
    print(f"frame_auc={report.frame_auc:.4f} temporal_iou={report.temporal_iou:.4f} "
          f"compression={report.compression_ratio:.4f}")
    print(f"wrote {out}, {csv_path}, {png_path}")
    return 0


def cmd_ablate(args) -> int:
    seq = store.read_sequence(args.input)
    manifest = store.LabelManifest.load(args.labels)
    model = classifier.AnomalyModel.load(args.model)
    k_list = _parse_k_list(args.k_list)
    rows = metrics.ablate_k(seq, manifest, model, k_list, threshold=args.threshold)
    scored = classifier.score_sequence(model, seq)
    interval = classifier.extract_interval(scored, args.threshold)
    _, stats = select.process_sequence(seq, args.k)
    report = metrics.EvalReport(
        frame_auc=metrics.frame_auc(scored, manifest),
        temporal_iou=metrics.temporal_iou(interval, manifest.enclosing_interval()),
        compression_ratio=stats.compression_ratio,
        per_k_results=rows,
        config=_echo(args, ["input", "labels", "model", "k_list", "k", "threshold", "out"]),
    )
    out = Path(args.out)
    metrics.write_report(report, out)
    csv_path, png_path = _report_sidecars(out)
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "selected_per_frame", "iou", "auc"])
        for r in rows:
            writer.writerow([f"{r.k:g}", f"{r.selected_per_frame:.10g}",
                             f"{r.iou:.10g}", f"{r.auc:.10g}"])
    plots.save_ablation_figure(rows, seq.num_patches, png_path)
    print(f"ablated K in {{{args.k_list}}}: budgets "
          f"{[int(r.selected_per_frame) for r in rows]}")
    print(f"wrote {out}, {csv_path}, {png_path}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="efftok", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a labeled synthetic embedding sequence")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--patches", type=int, required=True)
    p.add_argument("--channels", type=int, required=True)
    p.add_argument("--anomaly", help="planted anomalous span, START:END inclusive")
    p.add_argument("--region", help="patch span carrying the anomaly, START:END inclusive "
                                    "(default: first quarter of patches)")
    p.add_argument("--mean-shift", type=float, default=2.0)
    p.add_argument("--noise-scale", type=float, default=1.0)
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True, help="output prefix for .vaeb and .labels.json")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("select", help="keep the top-K-ratio changed patches per frame")
    p.add_argument("--input", required=True, help="VAEB embedding file")
    p.add_argument("--k", type=float, default=DEFAULT_K)
    p.add_argument("--tokens-out", help="optional sidecar with the kept token values (f32 LE)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("train", help="train the frame-level anomaly classifier")
    p.add_argument("--input", required=True, help="VAEB embedding file")
    p.add_argument("--labels", required=True, help="label manifest JSON")
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True, help="model JSON path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="per-frame anomaly confidences for a sequence")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="VAEB embedding file")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("tet", help="render the temporal-interval prompt from scores")
    p.add_argument("--scores", required=True)
    p.add_argument("--threshold", type=float, default=None,
                   help="qualifying-score threshold (default: value stored in the scores file)")
    p.add_argument("--format", choices=("frames", "seconds"), default="frames")
    p.add_argument("--categories", help="comma-separated category names")
    p.add_argument("--categories-file", help="newline-separated category names")
    p.add_argument("--smooth-window", type=int, default=0,
                   help="optional moving-average window over scores (default off)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tet)

    p = sub.add_parser("eval", help="metrics report for one scored sequence")
    p.add_argument("--scores", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--selection", required=True, help="selection JSON from `select`")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--out", required=True, help="report JSON (CSV and PNG written alongside)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="sweep keep ratios and report budgets/metrics")
    p.add_argument("--input", required=True, help="VAEB embedding file")
    p.add_argument("--labels", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--k-list", default="0.1,0.3,0.5,0.7,0.9")
    p.add_argument("--k", type=float, default=DEFAULT_K,
                   help="ratio used for the report's headline compression")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--out", required=True, help="report JSON (CSV and PNG written alongside)")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"efftok: io error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"efftok: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())
