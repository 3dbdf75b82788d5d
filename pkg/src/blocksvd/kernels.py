"""Dense linear-algebra building blocks.

Everything else in the package is assembled from the four primitives here:
a general matrix-matrix product, a seeded counter-based Gaussian generator,
a tall-skinny QR organized as a row-block reduction tree, and an SVD for
short-fat matrices.  All routines are deterministic: identical inputs
(including seeds) give bit-identical outputs at a fixed BLAS thread count.
"""

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ShapeError",
    "RankDeficiencyWarning",
    "SvdFactors",
    "gemm",
    "gaussian_matrix",
    "tsqr",
    "tsqr_factor",
    "small_svd",
]


class ShapeError(ValueError):
    """Operand dimensions do not conform."""


class RankDeficiencyWarning(UserWarning):
    """Input to a factorization is numerically rank deficient.

    The detected numerical rank is available as ``detected_rank``.
    """

    def __init__(self, message, detected_rank):
        super().__init__(message)
        self.detected_rank = detected_rank


@dataclass
class SvdFactors:
    """Approximate SVD triple U * diag(sigma) * Vt.

    U is m-by-l with orthonormal columns, sigma a non-increasing
    non-negative vector of length l, Vt l-by-n with orthonormal rows.
    ``effective_l`` = target_rank + oversampling actually computed.
    """

    U: np.ndarray
    sigma: np.ndarray
    Vt: np.ndarray
    target_rank: int
    effective_l: int

    def truncate(self, rank=None):
        """View of the factors cut down to ``rank`` (default target_rank)."""
        r = self.target_rank if rank is None else rank
        if r > self.effective_l:
            raise ValueError(f"rank {r} exceeds computed width {self.effective_l}")
        return SvdFactors(self.U[:, :r], self.sigma[:r], self.Vt[:r, :], r, r)

    def compose(self):
        """Materialize U * diag(sigma) * Vt (dense; test/demo use)."""
        return (self.U * self.sigma) @ self.Vt


def gemm(alpha, a, b, beta=0.0, c=None, transpose_a=False, transpose_b=False):
    """alpha * op(a) @ op(b) + beta * c, with optional transposes.

    ``a`` and ``b`` are never modified; the result is a fresh array.
    """
    opa = a.T if transpose_a else a
    opb = b.T if transpose_b else b
    if opa.shape[1] != opb.shape[0]:
        raise ShapeError(
            f"inner dimensions disagree: op(a) is {opa.shape}, op(b) is {opb.shape}"
        )
    out = alpha * (opa @ opb)
    if beta != 0.0:
        if c is None:
            raise ShapeError("beta != 0 requires an accumulator c")
        if c.shape != out.shape:
            raise ShapeError(f"c has shape {c.shape}, product has {out.shape}")
        out += beta * c
    return out


def _philox_generator(master_seed, stream_index, row):
    key = np.array([master_seed, stream_index], dtype=np.uint64)
    # Row index lives in the high word of the 256-bit counter, so each row
    # owns a disjoint 2^192-draw subsequence of the stream.
    bg = np.random.Philox(key=key, counter=int(row) << 192)
    return np.random.Generator(bg)


def gaussian_matrix(rows, cols, master_seed, stream_index=0, row_offset=0,
                    dtype=np.float64):
    """Seeded i.i.d. standard-normal matrix from a counter-based generator.

    Entries are a pure function of (master_seed, stream_index,
    row_offset + row, column).  Distinct stream indices give independent
    streams (distinct Philox keys).  Because each row is keyed by its
    global row index, a block of rows generated with the matching
    ``row_offset`` is bit-identical to the corresponding slice of the
    full matrix -- the property the block sketching algorithm relies on.

    Normal variates come from numpy's ziggurat transform over the Philox
    counter stream; correctness is statistical, not a fixed bit pattern.
    """
    if rows < 1 or cols < 1:
        raise ShapeError(f"gaussian_matrix needs positive shape, got {rows}x{cols}")
    out = np.empty((rows, cols), dtype=dtype, order="F")
    for r in range(rows):
        g = _philox_generator(master_seed, stream_index, row_offset + r)
        out[r, :] = g.standard_normal(cols, dtype=dtype)
    return out


def _blocked_qr(y, block_rows):
    """Recursive row-block QR reduction; returns (Q, R).

    Each row block of ``y`` is factored exactly once (the pass-efficient
    access pattern); partial R factors are combined pairwise up the tree.
    """
    m, l = y.shape
    if m <= block_rows:
        return np.linalg.qr(y, mode="reduced")
    nblocks = -(-m // block_rows)
    h = (nblocks // 2) * block_rows
    q1, r1 = _blocked_qr(y[:h], block_rows)
    q2, r2 = _blocked_qr(y[h:], block_rows)
    qc, r = np.linalg.qr(np.vstack([r1, r2]), mode="reduced")
    q = np.vstack([q1 @ qc[:l], q2 @ qc[l:]])
    return q, r


def tsqr_factor(y, block_rows=None):
    """Tall-skinny QR via a row-block reduction tree; returns (Q, R).

    Rank deficiency is tolerated: columns of Q remain orthonormal, but a
    RankDeficiencyWarning reports the detected numerical rank when the
    diagonal of R falls below l * eps * ||y||_F.
    """
    if y.ndim != 2:
        raise ShapeError("tsqr expects a 2-D array")
    m, l = y.shape
    if m < l:
        raise ShapeError(f"tsqr requires rows >= cols, got {m}x{l}")
    if block_rows is None:
        block_rows = 64 * l
    block_rows = max(block_rows, 2 * l)
    q, r = _blocked_qr(y, block_rows)
    eps = np.finfo(y.dtype).eps
    tol = l * eps * np.linalg.norm(y)
    rank = int(np.count_nonzero(np.abs(np.diag(r)) > tol))
    if rank < l:
        warnings.warn(
            RankDeficiencyWarning(
                f"input has numerical rank {rank} < {l}", rank
            )
        )
    return q, r


def tsqr(y, block_rows=None):
    """Orthonormal basis of range(y); see tsqr_factor."""
    q, _ = tsqr_factor(y, block_rows)
    return q


def small_svd(b):
    """SVD of a short-fat l-by-n matrix (l <= n).

    Route: QR-factor b.T (tall) with the row-block QR, then a dense
    LAPACK SVD of the small l-by-l triangular factor, and back-compose:
    b = R.T @ Qb.T,  R.T = W s Zt  =>  b = W s (Zt @ Qb.T).
    """
    if b.ndim != 2:
        raise ShapeError("small_svd expects a 2-D array")
    l, n = b.shape
    if l > n:
        raise ShapeError(f"small_svd requires rows <= cols, got {l}x{n}")
    qb, r = tsqr_factor(np.ascontiguousarray(b.T))
    w, sigma, zt = np.linalg.svd(r.T, full_matrices=False)
    vt = zt @ qb.T
    return SvdFactors(U=w, sigma=sigma, Vt=vt, target_rank=l, effective_l=l)
