"""Fixtures: a tiny synthetic clip written with OpenCV."""
from __future__ import annotations

import numpy as np
import cv2
import pytest


@pytest.fixture(scope="session")
def tiny_clip(tmp_path_factory):
    """8-frame 64x64 MJPG clip with a moving red square on a gray field."""
    path = tmp_path_factory.mktemp("clips") / "tiny.avi"
    writer = cv2.VideoWriter(str(path), cv2.VideoWriter_fourcc(*"MJPG"), 8.0, (64, 64))
    assert writer.isOpened(), "OpenCV cannot write MJPG AVI in this environment"
    for i in range(8):
        frame = np.full((64, 64, 3), 40, np.uint8)
        offset = 6 + 4 * i
        frame[offset : offset + 16, 12:28] = (0, 0, 220)  # BGR red block
        writer.write(frame)
    writer.release()
    return path
