"""Randomized SVD: in-core baseline, two-pass block algorithm, naive
out-of-core baseline, and the accompanying cost model.

The block algorithm streams column blocks of a stored matrix exactly
twice: once to accumulate the power-iterated sample matrix

    Y <- Y + (A_J A_J^T)^q A_J Omega_J     (right-to-left evaluation)

and once to form the core matrix B[:, J] = Q^T A[:, J] after the sample
has been orthonormalized.  The naive baseline computes the same family
of factorizations but re-streams the matrix for every product touching
it, costing 2(q+1) passes.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .kernels import SvdFactors, gaussian_matrix, small_svd, tsqr
from .store import MatrixStore, plan_blocks

__all__ = [
    "SketchConfig",
    "ConfigError",
    "CostReport",
    "rsvd_incore",
    "brsvd_run",
    "block_range_finder",
    "rsvd_naive_ooc",
    "estimate_costs",
    "relative_frobenius_error",
]

Q_MAX_DEFAULT = 10

# Sketch entries beyond this fraction of the float range abort the run:
# unnormalized power iteration overflows long before results degrade
# gracefully, so fail loudly with a diagnostic instead.
_OVERFLOW_FRACTION = 0.01


class ConfigError(ValueError):
    """Sketch parameters inconsistent with the matrix shape."""


@dataclass
class SketchConfig:
    """Randomized range-finder parameters.

    l = target_rank + oversampling columns are sketched; ``partitions``
    is an explicit block count or "auto" to derive one from the memory
    budget.
    """

    target_rank: int
    oversampling: int = 10
    power_exponent: int = 0
    partitions: object = "auto"
    master_seed: int = 0
    q_max: int = Q_MAX_DEFAULT

    @property
    def l(self):
        return self.target_rank + self.oversampling

    def validate(self, m, n):
        if self.target_rank < 1:
            raise ConfigError(f"target rank must be positive, got {self.target_rank}")
        if self.oversampling < 0:
            raise ConfigError("oversampling must be non-negative")
        if self.l > min(m, n):
            raise ConfigError(
                f"k + p = {self.l} exceeds min(m, n) = {min(m, n)}"
            )
        if not (0 <= self.power_exponent <= self.q_max):
            raise ConfigError(
                f"power exponent {self.power_exponent} outside [0, {self.q_max}]"
            )
        if self.partitions != "auto" and int(self.partitions) < 1:
            raise ConfigError(f"partitions must be positive, got {self.partitions}")


def _check_overflow(y):
    limit = _OVERFLOW_FRACTION * np.finfo(y.dtype).max
    peak = np.max(np.abs(y))
    if not np.isfinite(peak) or peak > limit:
        raise FloatingPointError(
            f"sample matrix magnitude {peak:.3e} exceeds the overflow guard "
            f"({limit:.3e}); lower the power exponent or rescale the input"
        )


def _sketch_block(a_block, omega, q):
    """(A_J A_J^T)^q A_J Omega_J, evaluated strictly right to left.

    No temporary exceeds max(m, n') x l.
    """
    y = a_block @ omega
    for _ in range(q):
        y = a_block @ (a_block.T @ y)
    return y


def _fix_signs(u, vt):
    """Make the largest-magnitude entry of each left vector non-negative.

    In-place; gives a canonical sign convention for cross-run comparison.
    """
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    u *= signs
    vt *= signs[:, None]
    return u, vt


def _finish(q_basis, b, cfg):
    f = small_svd(b)
    u = q_basis @ f.U
    u, vt = _fix_signs(u, f.Vt.copy())
    return SvdFactors(U=u, sigma=f.sigma, Vt=vt,
                      target_rank=cfg.target_rank, effective_l=cfg.l)


def rsvd_incore(a, cfg):
    """Randomized SVD of an in-memory matrix.

    Sketch with l Gaussian columns, sharpen with q power iterations,
    orthonormalize, factor the small core matrix, and back-project.
    """
    m, n = a.shape
    cfg.validate(m, n)
    l = cfg.l
    omega = gaussian_matrix(n, l, cfg.master_seed, stream_index=0,
                            dtype=a.dtype)
    y = _sketch_block(a, omega, cfg.power_exponent)
    _check_overflow(y)
    q_basis = tsqr(y)
    b = q_basis.T @ a
    return _finish(q_basis, b, cfg)


def _plan_for(store, cfg, memory_budget_bytes):
    s = None if cfg.partitions == "auto" else int(cfg.partitions)
    return plan_blocks(store.n, store.m, cfg.l, store.element_size,
                       memory_budget_bytes=memory_budget_bytes, s=s)


def block_range_finder(store, cfg, memory_budget_bytes=None, plan=None):
    """Orthonormal range basis from one blocked pass over the store.

    Accumulates the power-iterated sample matrix block by block, then
    orthonormalizes it; this is phase 1 of the two-pass decomposition,
    exposed separately because the basis itself is a useful product.
    Returns (Q, plan).
    """
    m, n = store.m, store.n
    cfg.validate(m, n)
    l = cfg.l
    if plan is None:
        plan = _plan_for(store, cfg, memory_budget_bytes)
    stats = store.stats
    q = cfg.power_exponent

    t0 = time.perf_counter()
    r_start = stats.words_read
    y = None
    for j0, j1 in plan:
        block = store.read_block(j0, j1)
        omega = gaussian_matrix(j1 - j0, l, cfg.master_seed, stream_index=0,
                                row_offset=j0, dtype=store.dtype)
        contrib = _sketch_block(block, omega, q)
        y = contrib if y is None else y + contrib
        stats.flop_estimate += 2 * m * (j1 - j0) * l * (1 + 2 * q)
    _check_overflow(y)
    stats.log_stage("sketch", stats.words_read - r_start, 0,
                    time.perf_counter() - t0)

    t0 = time.perf_counter()
    q_basis = tsqr(y)
    del y
    stats.flop_estimate += 2 * m * l * l
    stats.log_stage("orthonormalize", 0, 0, time.perf_counter() - t0)
    return q_basis, plan


def brsvd_run(store, cfg, memory_budget_bytes=None):
    """Two-pass block randomized SVD of a stored matrix.

    Returns (factors, stats); stats.full_passes is exactly 2 regardless
    of the partition count, the power exponent, or the block layout.
    """
    m, n = store.m, store.n
    cfg.validate(m, n)
    l = cfg.l
    store.reset_stats()
    stats = store.stats
    q_basis, plan = block_range_finder(store, cfg, memory_budget_bytes)
    r0 = stats.words_read

    t0 = time.perf_counter()
    b = np.empty((l, n), dtype=store.dtype, order="F")
    for j0, j1 in plan:
        block = store.read_block(j0, j1)
        b[:, j0:j1] = q_basis.T @ block
        stats.flop_estimate += 2 * m * (j1 - j0) * l
    stats.log_stage("form_core", stats.words_read - r0, 0,
                    time.perf_counter() - t0)

    t0 = time.perf_counter()
    factors = _finish(q_basis, b, cfg)
    stats.flop_estimate += 2 * n * l * l + 2 * m * l * l
    stats.log_stage("svd", 0, 0, time.perf_counter() - t0)
    return factors, stats


def rsvd_naive_ooc(store, cfg, memory_budget_bytes=None):
    """Out-of-core randomized SVD without block reuse.

    Every product touching the stored matrix re-streams it: one pass to
    sketch, two per power iteration, one to form the core matrix, for
    2(q+1) full passes total.  Semantics are the in-core algorithm's
    (global power iteration), so factors match rsvd_incore for the same
    seed at any q.
    """
    m, n = store.m, store.n
    cfg.validate(m, n)
    l = cfg.l
    plan = _plan_for(store, cfg, memory_budget_bytes)
    store.reset_stats()
    stats = store.stats
    q = cfg.power_exponent

    t0 = time.perf_counter()
    y = None
    for j0, j1 in plan:
        block = store.read_block(j0, j1)
        omega = gaussian_matrix(j1 - j0, l, cfg.master_seed, stream_index=0,
                                row_offset=j0, dtype=store.dtype)
        part = block @ omega
        y = part if y is None else y + part
        stats.flop_estimate += 2 * m * (j1 - j0) * l
    r0 = stats.words_read
    stats.log_stage("sketch", r0, 0, time.perf_counter() - t0)

    t0 = time.perf_counter()
    for _ in range(q):
        t = np.empty((n, l), dtype=store.dtype, order="F")
        for j0, j1 in plan:
            block = store.read_block(j0, j1)
            t[j0:j1, :] = block.T @ y
        y_new = None
        for j0, j1 in plan:
            block = store.read_block(j0, j1)
            part = block @ t[j0:j1, :]
            y_new = part if y_new is None else y_new + part
        y = y_new
        stats.flop_estimate += 4 * m * n * l
    _check_overflow(y)
    stats.log_stage("power", stats.words_read - r0, 0,
                    time.perf_counter() - t0)
    r0 = stats.words_read

    t0 = time.perf_counter()
    q_basis = tsqr(y)
    del y
    stats.flop_estimate += 2 * m * l * l
    stats.log_stage("orthonormalize", 0, 0, time.perf_counter() - t0)

    t0 = time.perf_counter()
    b = np.empty((l, n), dtype=store.dtype, order="F")
    for j0, j1 in plan:
        block = store.read_block(j0, j1)
        b[:, j0:j1] = q_basis.T @ block
        stats.flop_estimate += 2 * m * (j1 - j0) * l
    stats.log_stage("form_core", stats.words_read - r0, 0,
                    time.perf_counter() - t0)

    t0 = time.perf_counter()
    factors = _finish(q_basis, b, cfg)
    stats.flop_estimate += 2 * n * l * l + 2 * m * l * l
    stats.log_stage("svd", 0, 0, time.perf_counter() - t0)
    return factors, stats


_STAGES = (
    "random_generation",
    "sampling",
    "power_iterations",
    "orthonormalization",
    "form_core",
    "svd",
    "form_left_vectors",
)


@dataclass
class CostReport:
    """Leading-order per-stage flop and word counts (unit coefficients).

    ``stage_words`` models traffic across the slow/fast boundary for the
    chosen variant; ``transfer_words`` is the pass-model total for the
    input matrix alone: 2(q+1) * m * n for the naive schedule, 2 * m * n
    for the block schedule.
    """

    variant: str
    m: int
    n: int
    l: int
    q: int
    stage_flops: dict = field(default_factory=dict)
    stage_words: dict = field(default_factory=dict)

    @property
    def total_flops(self):
        return sum(self.stage_flops.values())

    @property
    def total_words(self):
        return sum(self.stage_words.values())

    @property
    def flops_leading(self):
        return self.m * self.n * self.l + (self.m + self.n) * self.l ** 2

    @property
    def words_leading(self):
        if self.variant == "naive":
            return self.m * self.n * self.l + (self.m + self.n) * self.l ** 2
        return self.m * (self.n + self.l)

    @property
    def transfer_words(self):
        if self.variant == "naive":
            return 2 * (self.q + 1) * self.m * self.n
        return 2 * self.m * self.n

    def to_dict(self):
        return {
            "variant": self.variant,
            "m": self.m,
            "n": self.n,
            "l": self.l,
            "q": self.q,
            "stage_flops": dict(self.stage_flops),
            "stage_words": dict(self.stage_words),
            "total_flops": self.total_flops,
            "total_words": self.total_words,
            "flops_leading": self.flops_leading,
            "words_leading": self.words_leading,
            "transfer_words": self.transfer_words,
        }


def estimate_costs(m, n, l, q, variant):
    """Per-stage leading-order cost model for one decomposition."""
    if variant not in ("naive", "proposed"):
        raise ValueError(f"variant must be 'naive' or 'proposed', got {variant!r}")
    if min(m, n, l) < 1 or q < 0:
        raise ValueError("dimensions must be positive and q non-negative")
    flops = {
        "random_generation": n * l,
        "sampling": m * n * l,
        "power_iterations": m * n * l * q,
        "orthonormalization": m * l ** 2,
        "form_core": m * n * l,
        "svd": n * l ** 2,
        "form_left_vectors": m * l ** 2,
    }
    if variant == "naive":
        words = {
            "random_generation": n * l,
            "sampling": m * n * l,
            "power_iterations": m * n * l * q,
            "orthonormalization": m * l,
            "form_core": m * n * l,
            "svd": n * l,
            "form_left_vectors": m * l ** 2,
        }
    else:
        words = {
            "random_generation": 0,
            "sampling": m * n,
            "power_iterations": 0,
            "orthonormalization": 0,
            "form_core": m * n,
            "svd": 0,
            "form_left_vectors": m * l,
        }
    return CostReport(variant=variant, m=m, n=n, l=l, q=q,
                      stage_flops=flops, stage_words=words)


def relative_frobenius_error(source, factors, block_width=None):
    """||A - U diag(sigma) Vt||_F / ||A||_F, streamed by column blocks.

    Accepts an in-memory matrix or a store; the streamed path costs one
    extra pass over the store.
    """
    us = factors.U * factors.sigma
    if isinstance(source, MatrixStore):
        m, n = source.m, source.n
        if us.shape[0] != m or factors.Vt.shape[1] != n:
            raise ValueError(
                f"factor shapes {us.shape[0]}x{factors.Vt.shape[1]} do not "
                f"match source {m}x{n}"
            )
        if block_width is None:
            block_width = max(1, min(n, (64 << 20) // (m * source.element_size)))
        num = 0.0
        den = 0.0
        for j0 in range(0, n, block_width):
            j1 = min(j0 + block_width, n)
            block = source.read_block(j0, j1)
            diff = block - us @ factors.Vt[:, j0:j1]
            num += float(np.sum(diff * diff))
            den += float(np.sum(block * block))
    else:
        a = np.asarray(source)
        if us.shape[0] != a.shape[0] or factors.Vt.shape[1] != a.shape[1]:
            raise ValueError(
                f"factor shapes {us.shape[0]}x{factors.Vt.shape[1]} do not "
                f"match source {a.shape[0]}x{a.shape[1]}"
            )
        diff = a - us @ factors.Vt
        num = float(np.sum(diff * diff))
        den = float(np.sum(a * a))
    if den == 0.0:
        return 0.0 if num == 0.0 else float("inf")
    return float(np.sqrt(num) / np.sqrt(den))
