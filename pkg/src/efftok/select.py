"""Salient-token selection over patch-embedding streams.

Per frame, a difference map against the previous frame (per-patch Manhattan
distance) ranks patches by how much they changed; the top K ratio of patches
is kept, and the surviving tokens are pooled into a content token plus an
attention-weighted context token.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .store import FrameSequence


def round_half_up(x: float) -> int:
    """Round with ties going up (2.5 -> 3), unlike banker's rounding."""
    return int(math.floor(x + 0.5))


def token_budget(k_ratio: float, n_patches: int) -> int:
    """Number of patches kept for a given ratio: max(1, round_half_up(K*N))."""
    return max(1, round_half_up(k_ratio * n_patches))


@dataclass
class DifferenceMap:
    """Length-N vector of non-negative per-patch distances."""

    values: np.ndarray

    def __len__(self) -> int:
        return int(self.values.shape[0])


@dataclass
class SelectionMask:
    """Binary keep/drop vector with exactly the top-K-ratio bits set."""

    bits: np.ndarray
    k_ratio: float
    selected_count: int

    @property
    def selected_indices(self) -> np.ndarray:
        return np.flatnonzero(self.bits)


@dataclass
class EffectiveTokenSet:
    """Selected patch tokens of one frame, ascending by patch index."""

    indices: np.ndarray
    vectors: np.ndarray

    @property
    def tokens(self) -> list[tuple[int, np.ndarray]]:
        return [(int(i), v) for i, v in zip(self.indices, self.vectors)]

    def __len__(self) -> int:
        return int(self.indices.shape[0])


@dataclass
class FrameTokens:
    """Pooled outputs per frame: mean content token and attention context token."""

    content_token: np.ndarray
    context_token: np.ndarray


@dataclass
class FrameSelection:
    """Everything the selector produces for a single frame."""

    mask: SelectionMask
    token_set: EffectiveTokenSet
    pooled: FrameTokens


@dataclass
class SelectionStats:
    """Per-sequence token budget summary."""

    selected_counts: list[int]
    n_patches: int

    @property
    def mean_selected(self) -> float:
        return float(np.mean(self.selected_counts))

    @property
    def compression_ratio(self) -> float:
        return 1.0 - self.mean_selected / self.n_patches


def difference_map(current: np.ndarray, previous: np.ndarray) -> DifferenceMap:
    """Per-patch Manhattan distance between two (N, C) frames."""
    cur = np.asarray(current, dtype=np.float64)
    prev = np.asarray(previous, dtype=np.float64)
    if cur.ndim != 2 or cur.shape != prev.shape:
        raise ValueError(f"shape mismatch: {cur.shape} vs {prev.shape}")
    if not (np.isfinite(cur).all() and np.isfinite(prev).all()):
        raise ValueError("difference_map requires finite inputs")
    return DifferenceMap(np.abs(cur - prev).sum(axis=1))


def selection_mask(d: DifferenceMap | np.ndarray, k_ratio: float) -> SelectionMask:
    """Mask the top K ratio of patches by distance, ties to the lower index.

    Exactly max(1, round_half_up(k_ratio * N)) bits are set. Deterministic:
    equal distances are broken in favor of the smaller patch index.
    """
    values = d.values if isinstance(d, DifferenceMap) else np.asarray(d, dtype=np.float64)
    n = int(values.shape[0])
    if n < 1:
        raise ValueError("difference map must have at least one entry")
    if not (0.0 < k_ratio <= 1.0):
        raise ValueError(f"k_ratio must lie in (0, 1], got {k_ratio}")
    count = token_budget(k_ratio, n)
    # stable sort on negated values keeps the original (ascending-index)
    # order inside tied groups
    order = np.argsort(-values, kind="stable")
    bits = np.zeros(n, dtype=np.uint8)
    bits[order[:count]] = 1
    return SelectionMask(bits=bits, k_ratio=float(k_ratio), selected_count=count)


def select_tokens(frame: np.ndarray, mask: SelectionMask) -> EffectiveTokenSet:
    """Extract the masked patch rows, verbatim, in ascending patch order."""
    f = np.asarray(frame, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] != mask.bits.shape[0]:
        raise ValueError(f"mask length {mask.bits.shape[0]} does not match frame with {f.shape[0]} patches")
    idx = mask.selected_indices
    return EffectiveTokenSet(indices=idx.astype(np.int64), vectors=f[idx].copy())


def content_token(token_set: EffectiveTokenSet) -> np.ndarray:
    """Coordinate-wise mean of the selected tokens."""
    if len(token_set) == 0:
        raise ValueError("content_token needs a non-empty token set")
    return token_set.vectors.mean(axis=0)


def context_token(token_set: EffectiveTokenSet, text_query: np.ndarray) -> np.ndarray:
    """Scaled dot-product attention of one query over the selected tokens.

    Weights are softmax((query . token_i) / sqrt(C)); they are non-negative
    and sum to 1, so the output lies in the convex hull of the tokens.
    """
    if len(token_set) == 0:
        raise ValueError("context_token needs a non-empty token set")
    q = np.asarray(text_query, dtype=np.float64)
    if not np.isfinite(q).all():
        raise ValueError("text query must be finite")
    vecs = token_set.vectors
    if q.shape != (vecs.shape[1],):
        raise ValueError(f"query dim {q.shape} does not match token dim {vecs.shape[1]}")
    logits = vecs @ q / math.sqrt(vecs.shape[1])
    logits -= logits.max()
    w = np.exp(logits)
    w /= w.sum()
    return w @ vecs


def sequence_difference_maps(seq: FrameSequence) -> np.ndarray:
    """(T, N) stack of difference maps; frame 0 is compared against itself."""
    p = seq.patches
    maps = np.zeros((seq.num_frames, seq.num_patches))
    if seq.num_frames > 1:
        maps[1:] = np.abs(p[1:] - p[:-1]).sum(axis=2)
    return maps


def process_sequence(
    seq: FrameSequence,
    k_ratio: float,
    text_query: np.ndarray | None = None,
) -> tuple[list[FrameSelection], SelectionStats]:
    """Run selection over a whole sequence, frame t referenced against t-1.

    Frame 0 has no predecessor and is compared against itself: its map is
    all-zero and the tie rule yields the deterministic low-index mask. When
    no text query is given, attention weights are uniform and the context
    token equals the content token.
    """
    seq.validate()
    maps = sequence_difference_maps(seq)
    query = np.zeros(seq.num_channels) if text_query is None else text_query
    results: list[FrameSelection] = []
    counts: list[int] = []
    for t in range(seq.num_frames):
        mask = selection_mask(maps[t], k_ratio)
        token_set = select_tokens(seq.patches[t], mask)
        pooled = FrameTokens(
            content_token=content_token(token_set),
            context_token=context_token(token_set, query),
        )
        results.append(FrameSelection(mask=mask, token_set=token_set, pooled=pooled))
        counts.append(mask.selected_count)
    return results, SelectionStats(selected_counts=counts, n_patches=seq.num_patches)
