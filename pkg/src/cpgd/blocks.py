"""Block partitions of flat coordinate vectors.

A partition splits the coordinates ``{0..n-1}`` into N ordered, disjoint,
nonempty blocks. Blocks are numbered 1..N, matching the cyclic sweep order
of the solver; coordinates themselves are 0-based. Points are plain 1-D
numpy arrays of length n.
"""

from __future__ import annotations

import numpy as np


class BlockPartition:
    """Ordered disjoint index blocks covering {0..n-1}.

    Construct with explicit per-block index lists, or via
    :func:`make_partition` for the common contiguous case. Indices within
    each block are kept in ascending order so gather/scatter round-trips
    are deterministic. Instances are immutable and safe to share.
    """

    def __init__(self, n: int, index_lists):
        n = int(n)
        if n < 1:
            raise ValueError(f"total dimension must be >= 1, got {n}")
        if not index_lists:
            raise ValueError("partition needs at least one block")
        blocks = []
        seen = np.zeros(n, dtype=bool)
        for b, idx in enumerate(index_lists):
            arr = np.asarray(idx, dtype=np.intp).ravel()
            if arr.size == 0:
                raise ValueError(f"block {b + 1} is empty")
            if arr.min() < 0 or arr.max() >= n:
                raise ValueError(
                    f"block {b + 1} has indices outside 0..{n - 1}")
            arr = np.sort(arr)
            if np.any(np.diff(arr) == 0):
                raise ValueError(f"block {b + 1} repeats an index")
            if seen[arr].any():
                raise ValueError(f"block {b + 1} overlaps an earlier block")
            seen[arr] = True
            arr.setflags(write=False)
            blocks.append(arr)
        if not seen.all():
            missing = int(np.flatnonzero(~seen)[0])
            raise ValueError(
                f"blocks do not cover all coordinates (index {missing} "
                f"unassigned); sizes must sum to {n}")
        self.n = n
        self.blocks = tuple(blocks)
        self.sizes = tuple(int(b.size) for b in blocks)

    @property
    def N(self) -> int:
        return len(self.blocks)

    def indices(self, i: int) -> np.ndarray:
        """Index array of block ``i`` (1-based)."""
        if not 1 <= i <= self.N:
            raise IndexError(f"block index {i} out of range 1..{self.N}")
        return self.blocks[i - 1]

    def __repr__(self):
        return f"BlockPartition(n={self.n}, sizes={list(self.sizes)})"


def make_partition(n: int, sizes) -> BlockPartition:
    """Contiguous partition of {0..n-1} into blocks of the given sizes."""
    sizes = [int(s) for s in sizes]
    if any(s < 1 for s in sizes):
        raise ValueError(f"all block sizes must be >= 1, got {sizes}")
    if sum(sizes) != n:
        raise ValueError(
            f"block sizes {sizes} sum to {sum(sizes)}, expected n={n}")
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    return BlockPartition(
        n, [np.arange(offsets[b], offsets[b + 1]) for b in range(len(sizes))])


def extract_block(x: np.ndarray, i: int, partition: BlockPartition) -> np.ndarray:
    """Copy of the block-``i`` coordinates of ``x`` (1-based ``i``)."""
    x = np.asarray(x)
    if x.shape != (partition.n,):
        raise ValueError(f"point has shape {x.shape}, expected ({partition.n},)")
    return x[partition.indices(i)].copy()


def scatter_block(x: np.ndarray, i: int, v, partition: BlockPartition) -> np.ndarray:
    """New point equal to ``x`` with block ``i`` replaced by ``v``."""
    x = np.asarray(x)
    if x.shape != (partition.n,):
        raise ValueError(f"point has shape {x.shape}, expected ({partition.n},)")
    idx = partition.indices(i)
    v = np.asarray(v, dtype=x.dtype).ravel()
    if v.size != idx.size:
        raise ValueError(
            f"block {i} has size {idx.size}, got vector of length {v.size}")
    out = x.copy()
    out[idx] = v
    return out
