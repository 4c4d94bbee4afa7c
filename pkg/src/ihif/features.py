"""Block-wise high-intensity feature localization and vector assembly.

Every magnitude response is cut into complete ``W x W`` blocks (row-major
block order, partial border blocks dropped).  Inside a block, values above
the response mean are kept, then filtered to those lying within
``threshold`` of their own mean, and sorted in descending order.  A fixed
number of top values per block, the retained length ``L``, is concatenated
into the feature vector in (scale, orientation, block, rank) order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError
from .gabor import ResponseStack


@dataclass(frozen=True)
class ExtractionParams:
    block_size: int = 4
    threshold: float = 3.0

    def __post_init__(self):
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")


@dataclass(frozen=True, eq=False)
class RaggedFeature:
    """Per-response, per-block retained values of one image.

    ``values[r, k, :counts[r, k]]`` is the descending list kept for block
    ``k`` of response ``r``; entries past the count are NaN.
    """

    means: np.ndarray
    values: np.ndarray
    counts: np.ndarray
    grid: tuple[int, int]
    block_size: int

    @property
    def n_responses(self) -> int:
        return self.values.shape[0]

    @property
    def n_blocks(self) -> int:
        return self.values.shape[1]

    def block(self, r: int, k: int) -> list[float]:
        return self.values[r, k, : self.counts[r, k]].tolist()

    def blocks(self, r: int) -> list[list[float]]:
        return [self.block(r, k) for k in range(self.n_blocks)]


@dataclass(frozen=True, eq=False)
class GlobalLengths:
    """Retained length per response, plus the block geometry it applies to."""

    lengths: np.ndarray
    n_blocks: int

    def __post_init__(self):
        lengths = np.asarray(self.lengths, dtype=np.int64)
        if lengths.ndim != 1 or lengths.size == 0 or lengths.min() < 1:
            raise DataError("retained lengths must be a non-empty vector of positive integers")
        lengths.setflags(write=False)
        object.__setattr__(self, "lengths", lengths)

    @property
    def vector_length(self) -> int:
        return int(self.lengths.sum()) * self.n_blocks

    def __eq__(self, other):
        if not isinstance(other, GlobalLengths):
            return NotImplemented
        return self.n_blocks == other.n_blocks and np.array_equal(self.lengths, other.lengths)

    __hash__ = None


def _as_magnitudes(stack) -> np.ndarray:
    mags = stack.magnitudes if isinstance(stack, ResponseStack) else np.asarray(stack, dtype=np.float64)
    if mags.ndim == 2:
        mags = mags[None]
    return mags


def localize(stack, p: ExtractionParams) -> RaggedFeature:
    """Locate the high-intensity values of every response in ``stack``.

    ``stack`` may be a :class:`ResponseStack`, a ``(n, H, W)`` array or a
    single ``(H, W)`` response.
    """
    mags = _as_magnitudes(stack)
    n, height, width = mags.shape
    w = p.block_size
    nbr, nbc = height // w, width // w
    if nbr == 0 or nbc == 0:
        raise DataError(f"response {height}x{width} is smaller than one {w}x{w} block")

    means = mags.mean(axis=(1, 2))
    blocks = (
        mags[:, : nbr * w, : nbc * w]
        .reshape(n, nbr, w, nbc, w)
        .transpose(0, 1, 3, 2, 4)
        .reshape(n, nbr * nbc, w * w)
    )

    above = blocks > means[:, None, None]
    n_above = above.sum(axis=-1)
    sums = np.where(above, blocks, 0.0).sum(axis=-1)
    # blocks with nothing above the response mean collapse to that mean
    block_mean = np.where(n_above > 0, sums / np.maximum(n_above, 1), means[:, None])

    keep = above & (np.abs(blocks - block_mean[..., None]) < p.threshold)
    counts = keep.sum(axis=-1)

    # stable sort of negated values: descending, ties in block scan order
    order = np.argsort(np.where(keep, -blocks, np.inf), axis=-1, kind="stable")
    values = np.take_along_axis(np.where(keep, blocks, np.nan), order, axis=-1)

    empty = counts == 0
    values[empty, 0] = block_mean[empty]
    counts = np.where(empty, 1, counts)

    return RaggedFeature(means, values, counts, (nbr, nbc), w)


def per_image_L(rf: RaggedFeature) -> GlobalLengths:
    return GlobalLengths(rf.counts.min(axis=1), rf.n_blocks)


def fit_global_lengths(rfs: Sequence[RaggedFeature]) -> GlobalLengths:
    """Element-wise minimum of the per-image retained lengths."""
    if not rfs:
        raise DataError("fit_global_lengths needs at least one image")
    first = rfs[0]
    for rf in rfs[1:]:
        if rf.values.shape[:2] != first.values.shape[:2] or rf.grid != first.grid:
            raise DataError("all images must share the same block geometry")
    lengths = np.min(np.stack([rf.counts.min(axis=1) for rf in rfs]), axis=0)
    return GlobalLengths(lengths, first.n_blocks)


def build_vector(rf: RaggedFeature, gl: GlobalLengths) -> np.ndarray:
    """Concatenate the top ``L`` values of every block.

    Blocks holding fewer than ``L`` values are padded with their last
    retained value.
    """
    if rf.n_responses != gl.lengths.size or rf.n_blocks != gl.n_blocks:
        raise DataError(
            f"feature geometry ({rf.n_responses} responses x {rf.n_blocks} blocks) does not "
            f"match retained lengths ({gl.lengths.size} x {gl.n_blocks})"
        )
    parts = []
    for r, length in enumerate(gl.lengths):
        idx = np.minimum(np.arange(length)[None, :], rf.counts[r][:, None] - 1)
        parts.append(np.take_along_axis(rf.values[r], idx, axis=1).ravel())
    return np.concatenate(parts)


def vector_layout(gl: GlobalLengths) -> np.ndarray:
    """``(response, block, rank)`` triple for every entry of a built vector."""
    rows = []
    for r, length in enumerate(gl.lengths):
        blk, rank = np.meshgrid(np.arange(gl.n_blocks), np.arange(length), indexing="ij")
        rows.append(np.stack([np.full(blk.size, r), blk.ravel(), rank.ravel()], axis=1))
    return np.concatenate(rows)
