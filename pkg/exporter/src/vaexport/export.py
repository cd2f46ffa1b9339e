"""Video decoding, frame sampling, and the export job itself."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .format import write_manifest, write_vaeb


class DecodeError(ValueError):
    """Input video cannot be opened or yields no frames."""


class GridMismatchError(ValueError):
    """Encoder produced a patch count different from its declared grid."""


@dataclass
class ExportJob:
    video_path: str
    out_prefix: str
    fps_sample: float = 1.0
    encoder_name: str = "gridpool"
    grid: int = 14
    channels: int = 16
    weights: str | None = None
    seed: int = 0
    annotations: str | None = None
    second_encoder: str | None = None
    extra: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.fps_sample <= 0:
            raise ValueError("fps-sample must be > 0")
        if not Path(self.video_path).exists():
            raise FileNotFoundError(self.video_path)


def sample_frame_indices(total_frames: int, src_fps: float, fps_sample: float) -> list[int]:
    """Indices kept when resampling src_fps down to fps_sample."""
    if total_frames < 1:
        return []
    step = max(src_fps, 1e-9) / fps_sample
    indices = []
    k = 0
    while True:
        idx = int(round(k * step))
        if idx >= total_frames:
            break
        indices.append(idx)
        k += 1
    return indices or [0]


def decode_frames(path: str, fps_sample: float) -> tuple[list[np.ndarray], float]:
    """Decode the sampled RGB frames of a video."""
    cap = cv2.VideoCapture(path)
    if not cap.isOpened():
        raise DecodeError(f"cannot open video {path!r}")
    src_fps = cap.get(cv2.CAP_PROP_FPS) or 0.0
    if src_fps <= 0:
        src_fps = fps_sample  # containers without fps metadata: keep all frames
    wanted: list[int] | None = None
    total = int(cap.get(cv2.CAP_PROP_FRAME_COUNT))
    if total > 0:
        wanted = sample_frame_indices(total, src_fps, fps_sample)
    frames: list[np.ndarray] = []
    idx = 0
    step = max(src_fps, 1e-9) / fps_sample
    next_keep = 0.0
    while True:
        ok, bgr = cap.read()
        if not ok:
            break
        keep = (idx in wanted) if wanted is not None else (idx >= round(next_keep))
        if keep:
            frames.append(cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB))
            if wanted is None:
                next_keep += step
        idx += 1
    cap.release()
    if not frames:
        raise DecodeError(f"no frames decoded from {path!r}")
    return frames, fps_sample


def _load_annotations(path: str | None) -> tuple[list[dict], list[str]]:
    if not path:
        return [], []
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return list(doc.get("intervals", [])), list(doc.get("categories", []))


def export(job: ExportJob) -> dict:
    """Run one export job; returns a summary of what was written."""
    from .encoders import build_encoder

    job.validate()
    encoder = build_encoder(job.encoder_name, grid=job.grid, channels=job.channels,
                            weights=job.weights, seed=job.seed)
    frames, fps = decode_frames(job.video_path, job.fps_sample)
    written = _encode_and_write(encoder, frames, fps, f"{job.out_prefix}.vaeb")

    if job.second_encoder:
        alt = build_encoder(job.second_encoder, grid=job.grid, channels=job.channels,
                            weights=job.weights, seed=job.seed)
        _encode_and_write(alt, frames, fps, f"{job.out_prefix}.alt.vaeb")
        written["alt_vaeb"] = f"{job.out_prefix}.alt.vaeb"

    intervals, categories = _load_annotations(job.annotations)
    manifest_path = f"{job.out_prefix}.labels.json"
    write_manifest(manifest_path, Path(job.video_path).stem, len(frames), intervals, categories)
    written["manifest"] = manifest_path
    return written


def _encode_and_write(encoder, frames: list[np.ndarray], fps: float, out_path: str) -> dict:
    patch_list, class_list = [], []
    for frame in frames:
        patches, cls = encoder.encode(frame)
        if patches.shape[0] != encoder.num_patches:
            raise GridMismatchError(
                f"{encoder.name} declared {encoder.num_patches} patches, produced {patches.shape[0]}"
            )
        patch_list.append(patches)
        class_list.append(cls)
    write_vaeb(out_path, np.stack(patch_list), np.stack(class_list), fps)
    return {
        "vaeb": out_path,
        "frames": len(frames),
        "patches": encoder.num_patches,
        "channels": int(patch_list[0].shape[1]),
        "fps": fps,
    }
