"""Writers for the VAEB v1 embedding format and its label manifest.

Targets the published format directly so this package stays decoupled from
the consumer library: 24-byte header (magic "VAEB", u32 version=1, u32 T,
u32 N, u32 C, f32 fps), then per frame C float32 class values followed by
N*C float32 patch values, all little-endian.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"VAEB"
VERSION = 1


def write_vaeb(path: str | Path, patches: np.ndarray, class_embeddings: np.ndarray, fps: float) -> None:
    """Write (T, N, C) patches and (T, C) class embeddings as VAEB v1."""
    patches = np.asarray(patches, dtype=np.float64)
    class_embeddings = np.asarray(class_embeddings, dtype=np.float64)
    if patches.ndim != 3 or class_embeddings.ndim != 2:
        raise ValueError(f"expected (T, N, C) and (T, C), got {patches.shape} / {class_embeddings.shape}")
    t, n, c = patches.shape
    if class_embeddings.shape != (t, c):
        raise ValueError(f"class embeddings {class_embeddings.shape} do not match patches {patches.shape}")
    if t < 1 or fps <= 0:
        raise ValueError("need at least one frame and a positive fps")
    if not (np.isfinite(patches).all() and np.isfinite(class_embeddings).all()):
        raise ValueError("embeddings contain NaN/Inf")
    header = struct.pack("<4sIIIIf", MAGIC, VERSION, t, n, c, float(fps))
    flat = np.concatenate([class_embeddings, patches.reshape(t, n * c)], axis=1).astype("<f4")
    Path(path).write_bytes(header + flat.tobytes())


def write_manifest(
    path: str | Path,
    video_id: str,
    num_frames: int,
    intervals: list[dict] | None = None,
    categories: list[str] | None = None,
) -> None:
    """Write the label manifest; frame labels derive from the intervals."""
    intervals = intervals or []
    labels = [0] * num_frames
    for iv in intervals:
        start, end = int(iv["start_frame"]), int(iv["end_frame"])
        if not (0 <= start <= end < num_frames):
            raise ValueError(f"interval [{start}, {end}] out of range for {num_frames} frames")
        for t in range(start, end + 1):
            labels[t] = 1
    doc = {
        "video_id": video_id,
        "num_frames": num_frames,
        "frame_labels": labels,
        "intervals": [
            {
                "start_frame": int(iv["start_frame"]),
                "end_frame": int(iv["end_frame"]),
                "category": str(iv.get("category", "Unknown")),
            }
            for iv in intervals
        ],
        "categories": list(categories or sorted({str(iv.get("category", "Unknown")) for iv in intervals})),
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
