"""Disk-backed column-major matrix store with instrumented block access.

The store plays the role of slow memory (host RAM / disk) on the far side
of a fast-memory budget; every element that crosses the boundary is
counted, so pass-efficiency claims can be asserted exactly rather than
argued.  File format ``.oocm``:

    magic "OOCM" (4 bytes) | version u16 | element code u16 | m u64 | n u64

all little-endian, followed by the column-major payload.  Element codes:
1 = binary64, 2 = binary32.
"""

import json
import os
import struct
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .kernels import ShapeError

__all__ = [
    "MatrixStore",
    "BlockPlan",
    "PassStats",
    "BudgetError",
    "plan_blocks",
    "HEADER_SIZE",
]

MAGIC = b"OOCM"
VERSION = 1
HEADER_SIZE = 24
_HEADER = struct.Struct("<4sHHQQ")

_CODE_TO_DTYPE = {1: np.dtype("<f8"), 2: np.dtype("<f4")}
_DTYPE_TO_CODE = {np.dtype(np.float64): 1, np.dtype(np.float32): 2}


class BudgetError(ValueError):
    """Fast-memory budget cannot hold even a single-column working set."""

    def __init__(self, message, minimum_feasible):
        super().__init__(message)
        self.minimum_feasible = minimum_feasible


@dataclass
class PassStats:
    """Words moved across the store boundary, in matrix elements.

    ``full_passes`` is exact rational arithmetic: words_read / (m*n).
    """

    matrix_elements: int
    words_read: int = 0
    words_written: int = 0
    block_reads: int = 0
    flop_estimate: int = 0
    stage_log: list = field(default_factory=list)

    @property
    def full_passes(self):
        return Fraction(self.words_read, self.matrix_elements)

    def log_stage(self, stage, words_read, words_written, seconds):
        self.stage_log.append(
            {
                "stage": stage,
                "words_read": int(words_read),
                "words_written": int(words_written),
                "seconds": float(seconds),
            }
        )

    def to_json_lines(self):
        return "\n".join(json.dumps(entry) for entry in self.stage_log)


@dataclass
class BlockPlan:
    """Column partition J_0 .. J_{s-1}; contiguous, disjoint, covering.

    All blocks have width n_prime except possibly a ragged final block.
    """

    s: int
    n_prime: int
    blocks: list

    def __iter__(self):
        return iter(self.blocks)


class MatrixStore:
    """Dense column-major matrix in an ``.oocm`` file with counted access."""

    def __init__(self, path, mode="r+b"):
        self.path = os.fspath(path)
        self._f = open(self.path, mode)
        header = self._f.read(HEADER_SIZE)
        magic, version, code, m, n = _HEADER.unpack(header)
        if magic != MAGIC:
            raise ValueError(f"{self.path}: not an oocm file (magic {magic!r})")
        if version != VERSION:
            raise ValueError(f"{self.path}: unsupported format version {version}")
        if code not in _CODE_TO_DTYPE:
            raise ValueError(f"{self.path}: unknown element code {code}")
        self.m = m
        self.n = n
        self.dtype = _CODE_TO_DTYPE[code]
        expected = HEADER_SIZE + m * n * self.dtype.itemsize
        actual = os.fstat(self._f.fileno()).st_size
        if actual != expected:
            raise ValueError(
                f"{self.path}: file size {actual} != header-implied {expected}"
            )
        self.stats = PassStats(matrix_elements=m * n)

    @classmethod
    def create(cls, path, m, n, dtype=np.float64, overwrite=False):
        """New store with a zeroed payload."""
        if m < 1 or n < 1:
            raise ShapeError(f"store shape must be positive, got {m}x{n}")
        dtype = np.dtype(dtype)
        if dtype.newbyteorder("<") not in _CODE_TO_DTYPE.values():
            raise ValueError(f"unsupported element type {dtype}")
        path = os.fspath(path)
        if os.path.exists(path) and not overwrite:
            raise FileExistsError(f"{path} exists; pass overwrite=True")
        code = _DTYPE_TO_CODE[np.dtype(dtype.str.replace("<", "="))]
        with open(path, "wb") as f:
            f.write(_HEADER.pack(MAGIC, VERSION, code, m, n))
            f.truncate(HEADER_SIZE + m * n * dtype.itemsize)
        return cls(path)

    @classmethod
    def from_array(cls, path, a, overwrite=False):
        """Write an in-memory matrix out as a store (test/demo helper)."""
        a = np.asarray(a)
        st = cls.create(path, a.shape[0], a.shape[1], a.dtype, overwrite=overwrite)
        st.write_block(0, a.shape[1], a)
        st.reset_stats()
        return st

    @property
    def element_size(self):
        return self.dtype.itemsize

    @property
    def payload_bytes(self):
        return self.m * self.n * self.element_size

    def reset_stats(self):
        self.stats = PassStats(matrix_elements=self.m * self.n)

    def _check_range(self, j0, j1):
        if not (0 <= j0 < j1 <= self.n):
            raise IndexError(
                f"column range [{j0}, {j1}) outside [0, {self.n})"
            )

    def read_block(self, j0, j1):
        """Dense column block A[:, j0:j1], Fortran-ordered."""
        self._check_range(j0, j1)
        w = j1 - j0
        self._f.seek(HEADER_SIZE + j0 * self.m * self.element_size)
        buf = np.fromfile(self._f, dtype=self.dtype, count=self.m * w)
        if buf.size != self.m * w:
            raise IOError(f"{self.path}: short read of block [{j0}, {j1})")
        self.stats.words_read += self.m * w
        self.stats.block_reads += 1
        return buf.reshape((self.m, w), order="F")

    def read_full(self):
        return self.read_block(0, self.n)

    def write_block(self, j0, j1, block):
        """Replace columns [j0, j1) with ``block`` (m x (j1-j0))."""
        self._check_range(j0, j1)
        w = j1 - j0
        block = np.asarray(block, dtype=self.dtype)
        if block.shape != (self.m, w):
            raise ShapeError(
                f"block shape {block.shape} != expected ({self.m}, {w})"
            )
        self._f.seek(HEADER_SIZE + j0 * self.m * self.element_size)
        np.asfortranarray(block).T.reshape(-1).tofile(self._f)
        self._f.flush()
        self.stats.words_written += self.m * w

    def close(self):
        self._f.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _working_set_elements(m, l, n_prime):
    # Resident matrices of the block sketch: Y (m*l), Q or core staging
    # (m*l), Omega block (n'*l), plus the m*l and n'*l product temporaries.
    return 3 * m * l + 2 * n_prime * l


def _ranges(n, n_prime):
    return [(j0, min(j0 + n_prime, n)) for j0 in range(0, n, n_prime)]


def plan_blocks(n, m, l, element_size, memory_budget_bytes=None, s=None):
    """Column partition fitting a block plus working set in the budget.

    With an explicit ``s`` the budget check is advisory; otherwise n' is
    the largest width with (m*n' + working_set(n')) * element_size within
    budget, and s = ceil(n / n').
    """
    if s is not None:
        if s < 1:
            raise ValueError(f"partition count must be positive, got {s}")
        n_prime = -(-n // s)
        return BlockPlan(s=-(-n // n_prime), n_prime=n_prime,
                         blocks=_ranges(n, n_prime))
    if memory_budget_bytes is None:
        return BlockPlan(s=1, n_prime=n, blocks=[(0, n)])
    budget_elems = memory_budget_bytes // element_size
    # m*n' + 3ml + 2n'l <= budget  =>  n' <= (budget - 3ml) / (m + 2l)
    n_prime = (budget_elems - 3 * m * l) // (m + 2 * l)
    if n_prime < 1:
        minimum = (m + _working_set_elements(m, l, 1)) * element_size
        raise BudgetError(
            f"memory budget {memory_budget_bytes} B infeasible; "
            f"minimum for a one-column block is {minimum} B",
            minimum,
        )
    n_prime = min(int(n_prime), n)
    s = -(-n // n_prime)
    n_prime = -(-n // s)
    return BlockPlan(s=s, n_prime=n_prime, blocks=_ranges(n, n_prime))
