"""Frame-level anomaly classifier, interval extraction, and prompt rendering.

A one-hidden-layer MLP maps a frame's class embedding to a logit trained so
that normal frames score high and anomalous frames score low. The exposed
anomaly confidence is the complement, 1 - sigmoid(logit), so higher means
more anomalous. Qualifying frames (score >= threshold) bound a temporal
interval that is rendered into a fixed natural-language prompt.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .store import FrameSequence

MODEL_VERSION = 1

DEFAULT_CATEGORIES = [
    "Abuse", "Arrest", "Arson", "Assault", "Burglary", "Explosion",
    "Fighting", "RoadAccidents", "Robbery", "Shooting", "Shoplifting",
    "Stealing", "Vandalism",
]

PROMPT_HEAD = "Known common crime types are: "
PROMPT_BODY = ". There is one of the crime types occurring from "


class TrainingDivergedError(RuntimeError):
    """Raised when the training loss stops being finite."""

    def __init__(self, epoch: int, loss: float, model: "AnomalyModel"):
        super().__init__(f"non-finite loss {loss} at epoch {epoch}")
        self.epoch = epoch
        self.loss = loss
        self.model = model


def _sigmoid(x: np.ndarray | float) -> np.ndarray | float:
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def _softplus(x: np.ndarray) -> np.ndarray:
    # log(1 + exp(x)) without overflow for large |x|
    return np.logaddexp(0.0, x)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 200
    batch_size: int = 64
    seed: int = 42

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(
            learning_rate=float(d["learning_rate"]),
            epochs=int(d["epochs"]),
            batch_size=int(d["batch_size"]),
            seed=int(d["seed"]),
        )


@dataclass
class AnomalyModel:
    """One-hidden-layer rectifier MLP producing a single logit.

    logit = w2 . max(0, W1 z + b1) + b2, with W1 (H, C), b1 (H,),
    w2 (H,), scalar b2.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float
    train_config: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 42

    @property
    def num_channels(self) -> int:
        return int(self.w1.shape[1])

    @property
    def hidden_width(self) -> int:
        return int(self.w1.shape[0])

    @property
    def layer_dims(self) -> list[int]:
        return [self.num_channels, self.hidden_width, 1]

    def validate(self) -> None:
        h, c = self.w1.shape
        if self.b1.shape != (h,) or self.w2.shape != (h,):
            raise ValueError(f"inconsistent parameter shapes for layer_dims {self.layer_dims}")
        for arr in (self.w1, self.b1, self.w2):
            if not np.isfinite(arr).all():
                raise ValueError("model parameters contain NaN/Inf")
        if not np.isfinite(self.b2):
            raise ValueError("model parameters contain NaN/Inf")

    def to_dict(self) -> dict:
        return {
            "version": MODEL_VERSION,
            "layer_dims": self.layer_dims,
            "weights": [self.w1.tolist(), [self.w2.tolist()]],
            "biases": [self.b1.tolist(), [self.b2]],
            "activation": "relu",
            "train_config": self.train_config.to_dict(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnomalyModel":
        if d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {d.get('version')}")
        if d.get("activation") != "relu":
            raise ValueError(f"unsupported activation {d.get('activation')!r}")
        w1 = np.asarray(d["weights"][0], dtype=np.float64)
        w2 = np.asarray(d["weights"][1], dtype=np.float64).reshape(-1)
        b1 = np.asarray(d["biases"][0], dtype=np.float64)
        b2 = float(np.asarray(d["biases"][1], dtype=np.float64).reshape(-1)[0])
        model = cls(
            w1=w1, b1=b1, w2=w2, b2=b2,
            train_config=TrainConfig.from_dict(d["train_config"]),
            seed=int(d["seed"]),
        )
        model.validate()
        if model.layer_dims != [int(x) for x in d["layer_dims"]]:
            raise ValueError(f"layer_dims {d['layer_dims']} do not match weight shapes {model.layer_dims}")
        return model

    def save(self, path: str | Path) -> None:
        self.validate()
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "AnomalyModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _init_params(n_channels: int, hidden: int, rng: np.random.Generator) -> tuple:
    w1 = rng.standard_normal((hidden, n_channels)) * np.sqrt(2.0 / n_channels)
    b1 = np.zeros(hidden)
    w2 = rng.standard_normal(hidden) * np.sqrt(2.0 / hidden)
    b2 = 0.0
    return w1, b1, w2, b2


def init_model(n_channels: int, hidden: int = 128, seed: int = 42,
               train_config: TrainConfig | None = None) -> AnomalyModel:
    """Fresh model with scaled Gaussian weights and zero biases."""
    rng = np.random.default_rng(seed)
    w1, b1, w2, b2 = _init_params(n_channels, hidden, rng)
    return AnomalyModel(w1, b1, w2, b2, train_config or TrainConfig(seed=seed), seed=seed)


def _forward_batch(model: AnomalyModel, z: np.ndarray) -> np.ndarray:
    pre = z @ model.w1.T + model.b1
    hidden = np.maximum(0.0, pre)
    return hidden @ model.w2 + model.b2


def forward(model: AnomalyModel, z: np.ndarray) -> float:
    """Logit for a single class embedding."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (model.num_channels,):
        raise ValueError(f"expected a ({model.num_channels},) vector, got {z.shape}")
    if not np.isfinite(z).all():
        raise ValueError("input contains NaN/Inf")
    return float(_forward_batch(model, z[None, :])[0])


def _as_batch(x, n_channels: int, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.size == 0:
        return np.zeros((0, n_channels))
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != n_channels:
        raise ValueError(f"{name}: expected (*, {n_channels}) vectors, got {arr.shape}")
    return arr


def bce_loss(model: AnomalyModel, normals, anomalies) -> float:
    """Binary classification loss pushing normal logits up, anomalous down.

    mean over normals of -log sigmoid(logit) plus mean over anomalies of
    -log(1 - sigmoid(logit)), stabilized via log-sum-exp; an empty class
    contributes zero.
    """
    zn = _as_batch(normals, model.num_channels, "normals")
    za = _as_batch(anomalies, model.num_channels, "anomalies")
    if zn.shape[0] == 0 and za.shape[0] == 0:
        raise ValueError("bce_loss needs at least one sample")
    loss = 0.0
    if zn.shape[0]:
        loss += float(_softplus(-_forward_batch(model, zn)).mean())
    if za.shape[0]:
        loss += float(_softplus(_forward_batch(model, za)).mean())
    return loss


@dataclass
class Gradients:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float


def gradient(model: AnomalyModel, normals, anomalies) -> Gradients:
    """Exact analytic gradients of bce_loss for every parameter."""
    zn = _as_batch(normals, model.num_channels, "normals")
    za = _as_batch(anomalies, model.num_channels, "anomalies")
    if zn.shape[0] == 0 and za.shape[0] == 0:
        raise ValueError("gradient needs at least one sample")
    z = np.concatenate([zn, za], axis=0)
    pre = z @ model.w1.T + model.b1
    hidden = np.maximum(0.0, pre)
    logits = hidden @ model.w2 + model.b2
    sig = _sigmoid(logits)
    # d(loss)/d(logit): (sigma - 1)/n_n on normals, sigma/n_a on anomalies
    g = np.empty_like(logits)
    nn, na = zn.shape[0], za.shape[0]
    if nn:
        g[:nn] = (sig[:nn] - 1.0) / nn
    if na:
        g[nn:] = sig[nn:] / na
    d_hidden = g[:, None] * model.w2[None, :]
    d_pre = d_hidden * (pre > 0)
    return Gradients(
        w1=d_pre.T @ z,
        b1=d_pre.sum(axis=0),
        w2=g @ hidden,
        b2=float(g.sum()),
    )


@dataclass
class TrainingLog:
    epoch_losses: list[float] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.epoch_losses[-1] if self.epoch_losses else float("nan")


def train(normals, anomalies, config: TrainConfig | None = None,
          hidden: int = 128) -> tuple[AnomalyModel, TrainingLog]:
    """Mini-batch Adam on the binary classification loss.

    Deterministic for a given config: initialization and per-epoch shuffling
    both derive from config.seed. The log records the full-data loss after
    each epoch; a non-finite loss aborts with the offending state attached.
    """
    config = config or TrainConfig()
    zn = np.asarray(normals, dtype=np.float64)
    za = np.asarray(anomalies, dtype=np.float64)
    if zn.ndim != 2 or za.ndim != 2 or zn.shape[0] == 0 or za.shape[0] == 0:
        raise ValueError("train needs non-empty (n, C) batches for both classes")
    if zn.shape[1] != za.shape[1]:
        raise ValueError(f"channel mismatch: {zn.shape[1]} vs {za.shape[1]}")

    rng = np.random.default_rng(config.seed)
    w1, b1, w2, b2 = _init_params(zn.shape[1], hidden, rng)
    model = AnomalyModel(w1, b1, w2, b2, config, seed=config.seed)

    x = np.concatenate([zn, za], axis=0)
    is_anom = np.concatenate([np.zeros(zn.shape[0], dtype=bool), np.ones(za.shape[0], dtype=bool)])
    n_total = x.shape[0]

    beta1, beta2, eps = 0.9, 0.999, 1e-8
    m = {k: np.zeros_like(v) for k, v in (("w1", w1), ("b1", b1), ("w2", w2))}
    v = {k: np.zeros_like(val) for k, val in (("w1", w1), ("b1", b1), ("w2", w2))}
    m["b2"] = 0.0
    v["b2"] = 0.0
    step = 0

    log = TrainingLog()
    for epoch in range(config.epochs):
        perm = rng.permutation(n_total)
        for lo in range(0, n_total, config.batch_size):
            sel = perm[lo : lo + config.batch_size]
            xb, ab = x[sel], is_anom[sel]
            grads = gradient(model, xb[~ab], xb[ab])
            step += 1
            corr1 = 1.0 - beta1**step
            corr2 = 1.0 - beta2**step
            for key, param, grad in (
                ("w1", model.w1, grads.w1),
                ("b1", model.b1, grads.b1),
                ("w2", model.w2, grads.w2),
            ):
                m[key] = beta1 * m[key] + (1 - beta1) * grad
                v[key] = beta2 * v[key] + (1 - beta2) * grad**2
                param -= config.learning_rate * (m[key] / corr1) / (np.sqrt(v[key] / corr2) + eps)
            m["b2"] = beta1 * m["b2"] + (1 - beta1) * grads.b2
            v["b2"] = beta2 * v["b2"] + (1 - beta2) * grads.b2**2
            model.b2 -= config.learning_rate * (m["b2"] / corr1) / (np.sqrt(v["b2"] / corr2) + eps)
        # diverged parameters make this loss NaN/Inf; silence the transient
        # numpy warnings and report through the dedicated error instead
        with np.errstate(invalid="ignore", over="ignore"):
            loss = bce_loss(model, zn, za)
        log.epoch_losses.append(loss)
        if not np.isfinite(loss):
            raise TrainingDivergedError(epoch, loss, model)
    return model, log


@dataclass
class ScoredSequence:
    """Per-frame anomaly confidences in [0, 1] for one video."""

    video_id: str
    scores: np.ndarray
    fps: float

    @property
    def num_frames(self) -> int:
        return int(self.scores.shape[0])


def score_sequence(model: AnomalyModel, seq: FrameSequence) -> ScoredSequence:
    """Anomaly confidence per frame: 1 - sigmoid(logit of the class vector).

    The classifier is trained with normal as the positive direction, so the
    anomaly confidence is the complement of the sigmoid.
    """
    if seq.num_channels != model.num_channels:
        raise ValueError(f"sequence C={seq.num_channels} does not match model C={model.num_channels}")
    logits = _forward_batch(model, seq.class_embeddings)
    return ScoredSequence(seq.video_id, 1.0 - _sigmoid(logits), seq.fps)


def save_scores(scored: ScoredSequence, threshold: float, path: str | Path) -> None:
    doc = {
        "video_id": scored.video_id,
        "fps": scored.fps,
        "threshold": threshold,
        "scores": [float(s) for s in scored.scores],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_scores(path: str | Path) -> tuple[ScoredSequence, float]:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    scores = np.asarray(d["scores"], dtype=np.float64)
    if scores.ndim != 1 or scores.size == 0:
        raise ValueError("scores file must hold a non-empty score list")
    if ((scores < 0) | (scores > 1)).any():
        raise ValueError("scores must lie in [0, 1]")
    return ScoredSequence(str(d["video_id"]), scores, float(d["fps"])), float(d["threshold"])


def smooth_scores(scored: ScoredSequence, window: int) -> ScoredSequence:
    """Centered moving average; window <= 1 is a no-op. Off by default."""
    if window <= 1:
        return scored
    kernel = np.ones(window) / window
    pad = window // 2
    padded = np.pad(scored.scores, pad, mode="edge")
    smoothed = np.convolve(padded, kernel, mode="valid")[: scored.num_frames]
    return ScoredSequence(scored.video_id, smoothed, scored.fps)


@dataclass
class TemporalInterval:
    """Inclusive frame span bounded by the first/last qualifying frames."""

    start_frame: int | None
    end_frame: int | None
    threshold: float
    present: bool

    @classmethod
    def absent(cls, threshold: float) -> "TemporalInterval":
        return cls(None, None, threshold, False)

    def as_tuple(self) -> tuple[int, int] | None:
        return (self.start_frame, self.end_frame) if self.present else None


def extract_interval(scored: ScoredSequence, threshold: float) -> TemporalInterval:
    """Span from the first to the last frame whose score meets the threshold."""
    if not (0.0 < threshold < 1.0):
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    qualifying = np.flatnonzero(scored.scores >= threshold)
    if qualifying.size == 0:
        return TemporalInterval.absent(threshold)
    return TemporalInterval(int(qualifying[0]), int(qualifying[-1]), threshold, True)


def extract_islands(scored: ScoredSequence, threshold: float) -> list[tuple[int, int]]:
    """Runs of consecutive qualifying frames. Extension beyond the single
    enclosing-span rule; not used by the default pipeline."""
    if not (0.0 < threshold < 1.0):
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    qualifying = np.flatnonzero(scored.scores >= threshold)
    if qualifying.size == 0:
        return []
    splits = np.flatnonzero(np.diff(qualifying) > 1) + 1
    return [(int(run[0]), int(run[-1])) for run in np.split(qualifying, splits)]


@dataclass
class IntervalPrompt:
    """Rendered natural-language prior for the located interval."""

    text: str
    category_list: list[str]
    timestamp_format: str


def _render_timestamp(frame: int, fps: float, timestamp_format: str) -> str:
    if timestamp_format == "frames":
        return f"frame {frame}"
    if timestamp_format == "seconds":
        total = int(frame / fps)
        return f"{total // 60:02d}:{total % 60:02d}"
    raise ValueError(f"timestamp_format must be 'frames' or 'seconds', got {timestamp_format!r}")


def render_prompt(
    interval: TemporalInterval,
    fps: float = 30.0,
    categories: list[str] | None = None,
    timestamp_format: str = "frames",
) -> IntervalPrompt:
    """Byte-deterministic prompt naming the category list and the span."""
    if not interval.present:
        raise ValueError("cannot render a prompt for an absent interval")
    cats = list(DEFAULT_CATEGORIES if categories is None else categories)
    if not cats:
        raise ValueError("category list must not be empty")
    start = _render_timestamp(interval.start_frame, fps, timestamp_format)
    end = _render_timestamp(interval.end_frame, fps, timestamp_format)
    text = (
        PROMPT_HEAD
        + ",".join(f"'{c}'" for c in cats)
        + PROMPT_BODY
        + f"{start} to {end}."
    )
    return IntervalPrompt(text=text, category_list=cats, timestamp_format=timestamp_format)


def save_prompt(prompt: IntervalPrompt, path: str | Path) -> None:
    Path(path).write_text(prompt.text + "\n", encoding="utf-8")
