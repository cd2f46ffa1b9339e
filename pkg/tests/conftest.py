"""Shared fixtures. All sequences are synthetic; no encoders involved."""
from __future__ import annotations

import numpy as np
import pytest

from efftok.store import FrameSequence


@pytest.fixture
def make_rng():
    def _make(seed: int = 0) -> np.random.Generator:
        return np.random.default_rng(seed)
    return _make


@pytest.fixture
def make_sequence():
    """Random float32-representable sequence, exact under VAEB round trips."""
    def _make(t: int = 4, n: int = 6, c: int = 3, seed: int = 0, fps: float = 30.0) -> FrameSequence:
        rng = np.random.default_rng(seed)
        patches = rng.standard_normal((t, n, c)).astype(np.float32).astype(np.float64)
        cls_emb = rng.standard_normal((t, c)).astype(np.float32).astype(np.float64)
        return FrameSequence(f"seq-{seed}", fps, patches, cls_emb)
    return _make
