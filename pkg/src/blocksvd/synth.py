"""Synthetic low-rank matrix generation.

Test matrices are products of two seeded Gaussian factors, written to
disk block-by-block so the full matrix never has to fit in memory; the
result has exact rank k with probability 1.
"""

from dataclasses import dataclass

import numpy as np

from .kernels import gaussian_matrix
from .store import MatrixStore

__all__ = ["SyntheticSpec", "gen_lowrank", "shape_from_ratio"]

# RNG stream indices for the two factors; distinct from the sketch stream.
_LEFT_STREAM = 101
_RIGHT_STREAM = 102


@dataclass
class SyntheticSpec:
    """Shape, rank, precision, and seed of a generated matrix."""

    m: int
    n: int
    k: int
    dtype: object = np.float64
    seed: int = 0

    def validate(self):
        if min(self.m, self.n, self.k) < 1:
            raise ValueError("m, n, k must be positive")
        if self.k > min(self.m, self.n):
            raise ValueError(f"rank {self.k} exceeds min(m, n)")


def shape_from_ratio(ratio, size_bytes, element_size):
    """(m, n, k) matching an m:n:k ratio at roughly size_bytes total.

    The scale factor is rounded down so the result never exceeds the
    requested size.
    """
    rm, rn, rk = ratio
    t = int(np.floor(np.sqrt(size_bytes / (element_size * rm * rn))))
    t = max(t, 1)
    return rm * t, rn * t, max(rk * t, 1)


def gen_lowrank(spec, out_path, block_width=None, overwrite=False):
    """Write the rank-k product of two Gaussian factors as a store.

    Only the m-by-k and k-by-n factors plus one column block are ever
    resident; each block A[:, J] = left @ right[:, J] is written once.
    """
    spec.validate()
    dtype = np.dtype(spec.dtype)
    left = gaussian_matrix(spec.m, spec.k, spec.seed, stream_index=_LEFT_STREAM,
                           dtype=dtype)
    right = gaussian_matrix(spec.k, spec.n, spec.seed,
                            stream_index=_RIGHT_STREAM, dtype=dtype)
    store = MatrixStore.create(out_path, spec.m, spec.n, dtype,
                               overwrite=overwrite)
    if block_width is None:
        block_width = max(1, min(spec.n, (64 << 20) // (spec.m * dtype.itemsize)))
    for j0 in range(0, spec.n, block_width):
        j1 = min(j0 + block_width, spec.n)
        store.write_block(j0, j1, left @ right[:, j0:j1])
    store.reset_stats()
    return store
