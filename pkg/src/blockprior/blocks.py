"""Block partitions of the coordinate range 1..j_max."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["BlockScheme", "build_scheme", "block_of"]


@dataclass(frozen=True, eq=False)
class BlockScheme:
    """Blocks ``B_k = {l_k, ..., l_{k+1} - 1}`` (1-based), k = 0..K-1.

    ``boundaries`` holds the K start indices; the end of the last block is
    ``j_max``.
    """

    kind: str
    boundaries: np.ndarray
    j_max: int
    m: int | None = None

    @property
    def n_blocks(self) -> int:
        return len(self.boundaries)

    @property
    def edges(self) -> np.ndarray:
        """Start indices followed by ``j_max + 1``."""
        return np.append(self.boundaries, self.j_max + 1)

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.edges)

    def slices(self) -> list[slice]:
        """0-based array slices, one per block."""
        e = self.edges
        return [slice(int(e[k]) - 1, int(e[k + 1]) - 1) for k in range(self.n_blocks)]

    def __repr__(self):
        return f"BlockScheme(kind={self.kind!r}, j_max={self.j_max}, sizes={self.sizes.tolist()})"


def _exponential_starts(j_max):
    starts = []
    k = 0
    while True:
        l_k = math.floor(math.exp(k))
        if l_k > j_max:
            break
        if not starts or l_k > starts[-1]:
            starts.append(l_k)
        k += 1
    return starts


def build_scheme(kind: str, j_max: int, m: int | None = None) -> BlockScheme:
    """Partition ``1..j_max`` into blocks.

    ``kind`` is ``"exponential"`` (l_k = floor(e^k)), ``"dyadic"``
    (l_k = 2^k) or ``"constant"`` (blocks of size ``m``). A string such as
    ``"constant16"`` is accepted as shorthand for ``kind="constant", m=16``.
    The last block is cut at ``j_max``.
    """
    if j_max < 1:
        raise ValueError("j_max must be >= 1")
    if kind.startswith("constant") and kind != "constant":
        m = int(kind[len("constant"):])
        kind = "constant"
    if kind == "exponential":
        starts = _exponential_starts(j_max)
    elif kind == "dyadic":
        starts = [2**k for k in range(int(math.log2(j_max)) + 1) if 2**k <= j_max]
    elif kind == "constant":
        if m is None or m <= 0:
            raise ValueError(f"constant blocks need a positive size m, got {m}")
        starts = list(range(1, j_max + 1, m))
    else:
        raise ValueError(f"unknown block scheme kind {kind!r}")
    b = np.asarray(starts, dtype=np.int64)
    b.setflags(write=False)
    return BlockScheme(kind=kind, boundaries=b, j_max=int(j_max), m=m if kind == "constant" else None)


def block_of(scheme: BlockScheme, j: int) -> int:
    """Index k of the block containing coordinate ``j`` (1-based)."""
    if not 1 <= j <= scheme.j_max:
        raise IndexError(f"coordinate {j} outside 1..{scheme.j_max}")
    return int(np.searchsorted(scheme.boundaries, j, side="right")) - 1
