"""Patch encoders turning RGB frames into (N, C) patch + (C,) class embeddings.

Two families:

- "gridpool": deterministic pixel statistics per patch cell projected with a
  seeded Gaussian matrix. No learned weights, fully reproducible, the
  default for offline use.
- "vit-b16": torchvision ViT-B/16 patch tokens. Pretrained checkpoints must
  be supplied via a local weights file; without one the encoder falls back
  to a seeded random initialization, which is frozen and therefore still
  deterministic. Needs the optional torch/torchvision extra.
"""
from __future__ import annotations

import numpy as np

GRIDPOOL_RAW_DIMS = 8  # mean/std per RGB channel + mean |dx|, |dy|


class GridPoolEncoder:
    """Pixel-statistics encoder over a fixed square patch grid."""

    name = "gridpool"

    def __init__(self, grid: int = 14, channels: int = 16, image_size: int | None = None, seed: int = 0):
        if grid < 1 or channels < 1:
            raise ValueError("grid and channels must be positive")
        if image_size is None:
            # nearest multiple of the grid to the usual 224px working size
            image_size = grid * max(1, round(224 / grid))
        if image_size % grid != 0:
            raise ValueError(f"image_size {image_size} not divisible by grid {grid}")
        self.grid = grid
        self.image_size = image_size
        self.channels = channels
        rng = np.random.default_rng(seed)
        self.projection = rng.standard_normal((GRIDPOOL_RAW_DIMS, channels)) / np.sqrt(GRIDPOOL_RAW_DIMS)

    @property
    def num_patches(self) -> int:
        return self.grid * self.grid

    def _stats(self, rgb: np.ndarray) -> np.ndarray:
        gray = rgb.mean(axis=2)
        dx = np.abs(np.diff(gray, axis=1)).mean() if gray.shape[1] > 1 else 0.0
        dy = np.abs(np.diff(gray, axis=0)).mean() if gray.shape[0] > 1 else 0.0
        flat = rgb.reshape(-1, 3)
        return np.concatenate([flat.mean(axis=0), flat.std(axis=0), [dx, dy]])

    def encode(self, frame_rgb: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        import cv2

        resized = cv2.resize(frame_rgb, (self.image_size, self.image_size),
                             interpolation=cv2.INTER_AREA).astype(np.float64) / 255.0
        cell = self.image_size // self.grid
        raw = np.empty((self.num_patches, GRIDPOOL_RAW_DIMS))
        for row in range(self.grid):
            for col in range(self.grid):
                block = resized[row * cell : (row + 1) * cell, col * cell : (col + 1) * cell]
                raw[row * self.grid + col] = self._stats(block)
        patches = raw @ self.projection
        class_embedding = self._stats(resized) @ self.projection
        return patches, class_embedding


class VitEncoder:
    """Frozen torchvision ViT-B/16; patch tokens plus the class token."""

    name = "vit-b16"

    def __init__(self, weights_path: str | None = None, seed: int = 0):
        import torch
        from torchvision.models import vit_b_16

        torch.manual_seed(seed)
        self._torch = torch
        self.model = vit_b_16(weights=None)
        if weights_path:
            state = torch.load(weights_path, map_location="cpu", weights_only=True)
            self.model.load_state_dict(state)
        self.model.eval()
        self.grid = 224 // 16
        self.image_size = 224
        self.channels = self.model.hidden_dim

    @property
    def num_patches(self) -> int:
        return self.grid * self.grid

    def encode(self, frame_rgb: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        import cv2

        torch = self._torch
        resized = cv2.resize(frame_rgb, (self.image_size, self.image_size),
                             interpolation=cv2.INTER_AREA).astype(np.float32) / 255.0
        x = torch.from_numpy(resized).permute(2, 0, 1)[None]
        with torch.no_grad():
            tokens = self.model._process_input(x)
            cls = self.model.class_token.expand(1, -1, -1)
            tokens = torch.cat([cls, tokens], dim=1)
            tokens = self.model.encoder(tokens)[0]
        out = tokens.double().numpy()
        return out[1:], out[0]


def build_encoder(name: str, *, grid: int = 14, channels: int = 16,
                  weights: str | None = None, seed: int = 0):
    if name == "gridpool":
        return GridPoolEncoder(grid=grid, channels=channels, seed=seed)
    if name == "vit-b16":
        try:
            return VitEncoder(weights_path=weights, seed=seed)
        except ImportError as exc:
            raise ValueError(
                "encoder 'vit-b16' needs torch and torchvision (pip install 'vaexport[vit]')"
            ) from exc
    raise ValueError(f"unknown encoder {name!r}; choices: gridpool, vit-b16")
