"""Robust PCA via the inexact augmented Lagrange multiplier method.

Splits an observation matrix M into a low-rank part L and a sparse
corruption part S by solving  min ||L||_* + lambda ||S||_1  subject to
M = L + S.  Each iteration takes a randomized SVD of the current iterate
(shrinking its singular values), soft-thresholds the residual entrywise,
and updates the dual variable; the penalty weight mu grows geometrically.

Matrices that exceed the fast-memory budget run the same loop with all
m-by-n iterates held in disk stores and processed by column blocks, with
the block randomized SVD as the inner decomposition.
"""

import os
import tempfile
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .kernels import gaussian_matrix
from .rsvd import SketchConfig, brsvd_run, rsvd_incore
from .store import MatrixStore

__all__ = [
    "RpcaConfig",
    "RpcaResult",
    "shrink",
    "spectral_norm_estimate",
    "ialm_rpca",
]


def shrink(x, epsilon):
    """Soft-thresholding: move toward zero by epsilon, zeroing [-eps, eps].

    Works elementwise on scalars, vectors (e.g. singular values), and
    matrices; shape is preserved.
    """
    if epsilon < 0:
        raise ValueError(f"shrinkage threshold must be non-negative, got {epsilon}")
    x = np.asarray(x)
    out = np.sign(x) * np.maximum(np.abs(x) - epsilon, 0.0)
    return out if out.ndim else float(out)


def _matvec(source, v):
    if isinstance(source, MatrixStore):
        m, n = source.m, source.n
        width = max(1, min(n, (64 << 20) // (m * source.element_size)))
        out = np.zeros(m, dtype=source.dtype)
        for j0 in range(0, n, width):
            j1 = min(j0 + width, n)
            out += source.read_block(j0, j1) @ v[j0:j1]
        return out
    return source @ v


def _rmatvec(source, u):
    if isinstance(source, MatrixStore):
        m, n = source.m, source.n
        width = max(1, min(n, (64 << 20) // (m * source.element_size)))
        out = np.empty(n, dtype=source.dtype)
        for j0 in range(0, n, width):
            j1 = min(j0 + width, n)
            out[j0:j1] = source.read_block(j0, j1).T @ u
        return out
    return source.T @ u


def spectral_norm_estimate(source, seed=0, tol=1e-10, max_iterations=100):
    """Largest singular value by power iteration on M^T M.

    Converges to well within 1% for any spectrum with the default
    stopping rule; a zero matrix returns 0 with a warning.
    """
    if isinstance(source, MatrixStore):
        n = source.n
        dtype = source.dtype
    else:
        source = np.asarray(source)
        n = source.shape[1]
        dtype = source.dtype
    v = gaussian_matrix(n, 1, seed, stream_index=7, dtype=dtype)[:, 0]
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(max_iterations):
        u = _matvec(source, v)
        nu = np.linalg.norm(u)
        if nu == 0.0:
            warnings.warn("spectral_norm_estimate: zero matrix")
            return 0.0
        v = _rmatvec(source, u / nu)
        sigma_new = np.linalg.norm(v)
        v /= sigma_new
        if abs(sigma_new - sigma) <= tol * sigma_new:
            return float(sigma_new)
        sigma = sigma_new
    return float(sigma)


@dataclass
class RpcaConfig:
    """Solver parameters; sketch fields are forwarded to the inner SVD.

    lambda defaults to 1/sqrt(max(m, n)), mu0 to 1.25 / ||M||_2, rho to
    1.5 -- the conventional settings; only lambda > 0, mu0 > 0, rho > 1
    are required.
    """

    target_rank: int
    oversampling: int = 10
    power_exponent: int = 1
    lam: float = None
    mu0: float = None
    rho: float = 1.5
    tol: float = 1e-7
    max_iterations: int = 100
    master_seed: int = 0
    memory_budget_bytes: int = None

    def validate(self):
        if self.lam is not None and self.lam <= 0:
            raise ValueError("lambda must be positive")
        if self.mu0 is not None and self.mu0 <= 0:
            raise ValueError("mu0 must be positive")
        if self.rho <= 1:
            raise ValueError("rho must exceed 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


@dataclass
class RpcaResult:
    """Low-rank / sparse split with the convergence trace."""

    L: object
    S: object
    iterations: int
    residual_history: list
    converged: bool
    history: list = field(default_factory=list)

    def to_json_lines(self):
        import json

        return "\n".join(json.dumps(entry) for entry in self.history)


def ialm_rpca(m_input, cfg):
    """Inexact-ALM robust PCA with a randomized inner SVD.

    Non-convergence at max_iterations returns a result with
    converged=False rather than raising.
    """
    cfg.validate()
    if isinstance(m_input, MatrixStore):
        budget = cfg.memory_budget_bytes
        if budget is not None and m_input.payload_bytes > budget:
            return _ialm_rpca_ooc(m_input, cfg)
        m_input = m_input.read_full()
    return _ialm_rpca_incore(np.asarray(m_input), cfg)


def _ialm_rpca_incore(M, cfg):
    m, n = M.shape
    lam = cfg.lam if cfg.lam is not None else 1.0 / np.sqrt(max(m, n))
    norm2 = spectral_norm_estimate(M, seed=cfg.master_seed)
    if norm2 == 0.0:
        raise ValueError("RPCA input is the zero matrix")
    mu = cfg.mu0 if cfg.mu0 is not None else 1.25 / norm2
    norm_f = np.linalg.norm(M)
    # Algorithm init: dual scaled by the larger of ||M||_2 and ||M||_inf/lam,
    # with ||M||_inf read as the elementwise maximum absolute value.
    Y = M / max(norm2, np.max(np.abs(M)) / lam)
    S = np.zeros_like(M)
    sketch = SketchConfig(target_rank=cfg.target_rank,
                          oversampling=cfg.oversampling,
                          power_exponent=cfg.power_exponent,
                          master_seed=cfg.master_seed)
    residuals = []
    history = []
    converged = False
    i = 0
    for i in range(1, cfg.max_iterations + 1):
        it0 = time.perf_counter()
        W = M - S + Y / mu
        t0 = time.perf_counter()
        f = rsvd_incore(W, sketch)
        svd_seconds = time.perf_counter() - t0
        sig = shrink(f.sigma, 1.0 / mu)
        L = (f.U * sig) @ f.Vt
        S = shrink(M - L + Y / mu, lam / mu)
        Z = M - L - S
        Y = Y + mu * Z
        residual = float(np.linalg.norm(Z) / norm_f)
        residuals.append(residual)
        history.append({
            "i": i,
            "mu": float(mu),
            "residual": residual,
            "svd_seconds": svd_seconds,
            "iter_seconds": time.perf_counter() - it0,
        })
        if residual < cfg.tol:
            converged = True
            break
        mu *= cfg.rho
    return RpcaResult(L=L, S=S, iterations=i, residual_history=residuals,
                      converged=converged, history=history)


class _BlockLoop:
    """Aligned column-block iteration over several same-shape stores."""

    def __init__(self, m, n, element_size, budget):
        # Five m-by-n stores are streamed together; split the budget so a
        # block of each plus slack fits.
        width = max(1, int(budget // (8 * m * element_size)))
        self.ranges = [(j0, min(j0 + width, n)) for j0 in range(0, n, width)]


def _ialm_rpca_ooc(M_store, cfg):
    m, n = M_store.m, M_store.n
    dtype = M_store.dtype
    lam = cfg.lam if cfg.lam is not None else 1.0 / np.sqrt(max(m, n))
    norm2 = spectral_norm_estimate(M_store, seed=cfg.master_seed)
    if norm2 == 0.0:
        raise ValueError("RPCA input is the zero matrix")
    mu = cfg.mu0 if cfg.mu0 is not None else 1.25 / norm2
    budget = cfg.memory_budget_bytes
    loop = _BlockLoop(m, n, dtype.itemsize, budget)

    workdir = tempfile.mkdtemp(prefix="rpca_")

    def tmp_store(name):
        return MatrixStore.create(os.path.join(workdir, name + ".oocm"),
                                  m, n, dtype)

    S = tmp_store("sparse")
    Y = tmp_store("dual")
    W = tmp_store("iterate")
    L = tmp_store("lowrank")

    norm_f_sq = 0.0
    max_abs = 0.0
    for j0, j1 in loop.ranges:
        blk = M_store.read_block(j0, j1)
        norm_f_sq += float(np.sum(blk * blk))
        max_abs = max(max_abs, float(np.max(np.abs(blk))))
    norm_f = np.sqrt(norm_f_sq)
    y_scale = 1.0 / max(norm2, max_abs / lam)
    for j0, j1 in loop.ranges:
        Y.write_block(j0, j1, y_scale * M_store.read_block(j0, j1))

    sketch = SketchConfig(target_rank=cfg.target_rank,
                          oversampling=cfg.oversampling,
                          power_exponent=cfg.power_exponent,
                          master_seed=cfg.master_seed)
    residuals = []
    history = []
    converged = False
    i = 0
    for i in range(1, cfg.max_iterations + 1):
        it0 = time.perf_counter()
        for j0, j1 in loop.ranges:
            blk = (M_store.read_block(j0, j1) - S.read_block(j0, j1)
                   + Y.read_block(j0, j1) / mu)
            W.write_block(j0, j1, blk)
        t0 = time.perf_counter()
        f, _ = brsvd_run(W, sketch, memory_budget_bytes=budget)
        svd_seconds = time.perf_counter() - t0
        sig = shrink(f.sigma, 1.0 / mu)
        us = f.U * sig
        resid_sq = 0.0
        for j0, j1 in loop.ranges:
            l_blk = us @ f.Vt[:, j0:j1]
            m_blk = M_store.read_block(j0, j1)
            y_blk = Y.read_block(j0, j1)
            s_blk = shrink(m_blk - l_blk + y_blk / mu, lam / mu)
            z_blk = m_blk - l_blk - s_blk
            L.write_block(j0, j1, l_blk)
            S.write_block(j0, j1, s_blk)
            Y.write_block(j0, j1, y_blk + mu * z_blk)
            resid_sq += float(np.sum(z_blk * z_blk))
        residual = float(np.sqrt(resid_sq) / norm_f)
        residuals.append(residual)
        history.append({
            "i": i,
            "mu": float(mu),
            "residual": residual,
            "svd_seconds": svd_seconds,
            "iter_seconds": time.perf_counter() - it0,
        })
        if residual < cfg.tol:
            converged = True
            break
        mu *= cfg.rho
    W.close()
    return RpcaResult(L=L, S=S, iterations=i, residual_history=residuals,
                      converged=converged, history=history)
