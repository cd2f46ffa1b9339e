"""Embedding file format, label manifests, and synthetic sequence generation.

A video is represented as a stream of per-frame embeddings: an N x C patch
matrix plus a C-dim class vector per frame. Sequences are persisted in the
VAEB v1 binary format (bit-exact, little-endian float32 payload) so the
numeric pipeline can run offline against precomputed or synthetic data.

VAEB v1 layout:
    bytes 0-3   ASCII magic "VAEB"
    u32 LE      version (= 1)
    u32 LE      T  (frame count)
    u32 LE      N  (patch count)
    u32 LE      C  (channel count)
    f32 LE      fps
    then per frame t = 0..T-1:
        C   x f32 LE  class embedding
        N*C x f32 LE  patch embeddings, patch-major / channel-minor
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

MAGIC = b"VAEB"
VERSION = 1
HEADER_SIZE = 24
_HEADER_FMT = "<4sIIIIf"


class VaebError(ValueError):
    """Base error for malformed or inconsistent VAEB files."""


class BadMagicError(VaebError):
    """File does not start with the VAEB magic bytes."""


class UnsupportedVersionError(VaebError):
    """File declares a format version this reader does not understand."""


class TruncatedPayloadError(VaebError):
    """File is shorter than the header-declared payload."""


class NonFiniteDataError(VaebError):
    """Payload contains NaN or Inf values."""


@dataclass
class FrameEmbedding:
    """Per-frame embeddings: N x C patch matrix and a C-dim class vector."""

    patch_embeddings: np.ndarray
    class_embedding: np.ndarray

    def validate(self) -> None:
        p, z = np.asarray(self.patch_embeddings), np.asarray(self.class_embedding)
        if p.ndim != 2 or z.ndim != 1:
            raise ValueError(f"expected (N, C) patches and (C,) class vector, got {p.shape} / {z.shape}")
        if p.shape[1] != z.shape[0]:
            raise ValueError(f"channel mismatch: patches C={p.shape[1]}, class C={z.shape[0]}")
        if not (np.isfinite(p).all() and np.isfinite(z).all()):
            raise ValueError("frame embeddings contain NaN/Inf")


@dataclass
class FrameSequence:
    """Ordered per-frame embedding stream for one video.

    Internally stacked as float64 arrays: ``patches`` is (T, N, C) and
    ``class_embeddings`` is (T, C). Every frame shares the same patch grid.
    """

    video_id: str
    fps: float
    patches: np.ndarray
    class_embeddings: np.ndarray

    @property
    def num_frames(self) -> int:
        return int(self.patches.shape[0])

    @property
    def num_patches(self) -> int:
        return int(self.patches.shape[1])

    @property
    def num_channels(self) -> int:
        return int(self.patches.shape[2])

    def frame(self, t: int) -> FrameEmbedding:
        return FrameEmbedding(self.patches[t], self.class_embeddings[t])

    @property
    def frames(self) -> list[FrameEmbedding]:
        return [self.frame(t) for t in range(self.num_frames)]

    @classmethod
    def from_frames(cls, video_id: str, fps: float, frames: Sequence[FrameEmbedding]) -> "FrameSequence":
        if not frames:
            raise ValueError("a sequence needs at least one frame")
        patches = np.stack([np.asarray(f.patch_embeddings, dtype=np.float64) for f in frames])
        cls_emb = np.stack([np.asarray(f.class_embedding, dtype=np.float64) for f in frames])
        seq = cls(video_id, float(fps), patches, cls_emb)
        seq.validate()
        return seq

    def validate(self) -> None:
        if self.fps <= 0 or not np.isfinite(self.fps):
            raise ValueError(f"fps must be a positive real, got {self.fps}")
        p, z = np.asarray(self.patches), np.asarray(self.class_embeddings)
        if p.ndim != 3 or z.ndim != 2:
            raise ValueError(f"expected (T, N, C) patches and (T, C) class embeddings, got {p.shape} / {z.shape}")
        if p.shape[0] < 1:
            raise ValueError("a sequence needs at least one frame")
        if p.shape[0] != z.shape[0] or p.shape[2] != z.shape[1]:
            raise ValueError(f"patch/class shape mismatch: {p.shape} vs {z.shape}")
        if not (np.isfinite(p).all() and np.isfinite(z).all()):
            raise ValueError("sequence contains NaN/Inf")


@dataclass
class LabeledInterval:
    """Inclusive [start_frame, end_frame] span tagged with a category name."""

    start_frame: int
    end_frame: int
    category: str


@dataclass
class LabelManifest:
    """Per-frame 0/1 anomaly labels plus the intervals they derive from."""

    video_id: str
    num_frames: int
    frame_labels: list[int]
    intervals: list[LabeledInterval] = field(default_factory=list)
    categories: list[str] = field(default_factory=list)

    @staticmethod
    def labels_from_intervals(num_frames: int, intervals: Sequence[LabeledInterval]) -> list[int]:
        labels = [0] * num_frames
        for iv in intervals:
            for t in range(iv.start_frame, iv.end_frame + 1):
                labels[t] = 1
        return labels

    def validate(self) -> None:
        if self.num_frames < 1:
            raise ValueError("num_frames must be >= 1")
        if len(self.frame_labels) != self.num_frames:
            raise ValueError(f"frame_labels has {len(self.frame_labels)} entries for num_frames={self.num_frames}")
        if any(l not in (0, 1) for l in self.frame_labels):
            raise ValueError("frame_labels must be 0 or 1")
        for iv in self.intervals:
            if not (0 <= iv.start_frame <= iv.end_frame < self.num_frames):
                raise ValueError(f"interval [{iv.start_frame}, {iv.end_frame}] out of range for T={self.num_frames}")
        if self.frame_labels != self.labels_from_intervals(self.num_frames, self.intervals):
            raise ValueError("frame_labels inconsistent with intervals")

    def enclosing_interval(self) -> tuple[int, int] | None:
        """Smallest single span covering all labeled intervals, or None."""
        if not self.intervals:
            return None
        return (min(iv.start_frame for iv in self.intervals),
                max(iv.end_frame for iv in self.intervals))

    def to_dict(self) -> dict:
        return {
            "video_id": self.video_id,
            "num_frames": self.num_frames,
            "frame_labels": list(self.frame_labels),
            "intervals": [
                {"start_frame": iv.start_frame, "end_frame": iv.end_frame, "category": iv.category}
                for iv in self.intervals
            ],
            "categories": list(self.categories),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LabelManifest":
        manifest = cls(
            video_id=str(d["video_id"]),
            num_frames=int(d["num_frames"]),
            frame_labels=[int(x) for x in d["frame_labels"]],
            intervals=[
                LabeledInterval(int(iv["start_frame"]), int(iv["end_frame"]), str(iv["category"]))
                for iv in d["intervals"]
            ],
            categories=[str(c) for c in d["categories"]],
        )
        manifest.validate()
        return manifest

    def save(self, path: str | Path) -> None:
        self.validate()
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "LabelManifest":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def write_sequence(seq: FrameSequence, path: str | Path) -> None:
    """Serialize a sequence to a VAEB v1 file, byte-deterministically.

    Values are stored as little-endian float32; a sequence whose values are
    float32-representable round-trips exactly. Invariants are checked before
    any bytes hit the disk.
    """
    seq.validate()
    t, n, c = seq.num_frames, seq.num_patches, seq.num_channels
    header = struct.pack(_HEADER_FMT, MAGIC, VERSION, t, n, c, float(seq.fps))
    flat = np.concatenate(
        [seq.class_embeddings, seq.patches.reshape(t, n * c)], axis=1
    ).astype("<f4")
    Path(path).write_bytes(header + flat.tobytes())


def read_sequence(path: str | Path) -> FrameSequence:
    """Parse a VAEB v1 file back into a FrameSequence (float64 internally)."""
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise TruncatedPayloadError(f"header: expected {HEADER_SIZE} bytes, got {len(raw)}")
    if raw[:4] != MAGIC:
        raise BadMagicError(f"bad magic {raw[:4]!r}, expected {MAGIC!r}")
    if len(raw) < HEADER_SIZE:
        raise TruncatedPayloadError(f"header: expected {HEADER_SIZE} bytes, got {len(raw)}")
    _, version, t, n, c, fps = struct.unpack(_HEADER_FMT, raw[:HEADER_SIZE])
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported version {version}, expected {VERSION}")
    if t < 1 or n < 1 or c < 1:
        raise VaebError(f"invalid header dimensions T={t}, N={n}, C={c}")
    if not (fps > 0 and np.isfinite(fps)):
        raise VaebError(f"invalid fps {fps}")
    expected = t * (c + n * c) * 4
    actual = len(raw) - HEADER_SIZE
    if actual != expected:
        raise TruncatedPayloadError(f"payload: expected {expected} bytes, got {actual}")
    flat = np.frombuffer(raw, dtype="<f4", offset=HEADER_SIZE).reshape(t, c + n * c)
    if not np.isfinite(flat).all():
        raise NonFiniteDataError("payload contains NaN/Inf values")
    cls_emb = flat[:, :c].astype(np.float64)
    patches = flat[:, c:].reshape(t, n, c).astype(np.float64)
    return FrameSequence(Path(path).stem, float(fps), patches, cls_emb)


@dataclass
class SyntheticSpec:
    """Recipe for a labeled synthetic sequence with a planted anomaly.

    Normal frames are noise around a fixed per-video base pattern; frames in
    [anomaly_start, anomaly_end] get ``mean_shift`` added to the class vector
    and to the patch rows listed in ``anomaly_region``.
    """

    num_frames: int
    num_patches: int
    num_channels: int
    anomaly_start: int | None = None
    anomaly_end: int | None = None
    anomaly_region: tuple[int, ...] = ()
    mean_shift: float = 2.0
    noise_scale: float = 1.0
    seed: int = 42
    fps: float = 30.0

    def validate(self) -> None:
        if min(self.num_frames, self.num_patches, self.num_channels) < 1:
            raise ValueError("T, N, C must all be positive")
        if (self.anomaly_start is None) != (self.anomaly_end is None):
            raise ValueError("anomaly_start and anomaly_end must be given together")
        if self.anomaly_start is not None:
            if not (0 <= self.anomaly_start <= self.anomaly_end < self.num_frames):
                raise ValueError(
                    f"anomaly span [{self.anomaly_start}, {self.anomaly_end}] out of range for T={self.num_frames}"
                )
        if any(not (0 <= i < self.num_patches) for i in self.anomaly_region):
            raise ValueError("anomaly_region indices must lie in [0, N)")
        if self.mean_shift < 0:
            raise ValueError("mean_shift must be >= 0")
        if self.noise_scale <= 0:
            raise ValueError("noise_scale must be > 0")
        if self.fps <= 0:
            raise ValueError("fps must be > 0")


def generate_synthetic(spec: SyntheticSpec) -> tuple[FrameSequence, LabelManifest]:
    """Build a deterministic labeled sequence from a SyntheticSpec.

    All values are rounded through float32 so that generate -> write -> read
    is an exact identity.
    """
    spec.validate()
    t, n, c = spec.num_frames, spec.num_patches, spec.num_channels
    rng = np.random.default_rng(spec.seed)

    base_patch = rng.standard_normal((n, c))
    base_class = rng.standard_normal(c)
    patches = base_patch[None, :, :] + spec.noise_scale * rng.standard_normal((t, n, c))
    cls_emb = base_class[None, :] + spec.noise_scale * rng.standard_normal((t, c))

    intervals: list[LabeledInterval] = []
    if spec.anomaly_start is not None:
        a, b = spec.anomaly_start, spec.anomaly_end
        region = sorted(set(spec.anomaly_region))
        cls_emb[a : b + 1, :] += spec.mean_shift
        if region:
            patches[a : b + 1][:, region, :] += spec.mean_shift
        intervals.append(LabeledInterval(a, b, "Synthetic"))

    patches = patches.astype(np.float32).astype(np.float64)
    cls_emb = cls_emb.astype(np.float32).astype(np.float64)

    video_id = f"synthetic-{spec.seed}"
    seq = FrameSequence(video_id, spec.fps, patches, cls_emb)
    manifest = LabelManifest(
        video_id=video_id,
        num_frames=t,
        frame_labels=LabelManifest.labels_from_intervals(t, intervals),
        intervals=intervals,
        categories=["Synthetic"] if intervals else [],
    )
    manifest.validate()
    return seq, manifest
