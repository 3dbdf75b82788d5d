"""Two-pass out-of-core block randomized SVD, with robust PCA on top.

Decomposes matrices larger than a configured fast-memory budget by
streaming column blocks from disk exactly twice, and applies the result
to robust PCA (inexact augmented Lagrange multipliers) for tasks like
background subtraction.  All data movement across the memory boundary
is instrumented, so pass counts are asserted, not assumed.
"""

from .kernels import (RankDeficiencyWarning, ShapeError, SvdFactors, gemm,
                      gaussian_matrix, small_svd, tsqr, tsqr_factor)
from .rpca import (RpcaConfig, RpcaResult, ialm_rpca, shrink,
                   spectral_norm_estimate)
from .rsvd import (ConfigError, CostReport, SketchConfig, block_range_finder, brsvd_run,
                   estimate_costs, relative_frobenius_error, rsvd_incore,
                   rsvd_naive_ooc)
from .store import (BlockPlan, BudgetError, MatrixStore, PassStats,
                    plan_blocks)
from .synth import SyntheticSpec, gen_lowrank, shape_from_ratio
from .frames import (FrameStack, export_frames, ingest_frames, read_pgm,
                     write_pgm)

__version__ = "0.1.0"

__all__ = [
    "BlockPlan", "BudgetError", "ConfigError", "CostReport", "FrameStack",
    "MatrixStore", "PassStats", "RankDeficiencyWarning", "RpcaConfig",
    "RpcaResult", "ShapeError", "SketchConfig", "SvdFactors",
    "SyntheticSpec", "block_range_finder", "brsvd_run", "estimate_costs", "export_frames",
    "gemm", "gaussian_matrix", "gen_lowrank", "ialm_rpca", "ingest_frames",
    "plan_blocks", "read_pgm", "relative_frobenius_error", "rsvd_incore",
    "rsvd_naive_ooc", "shape_from_ratio", "shrink", "small_svd",
    "spectral_norm_estimate", "tsqr", "tsqr_factor", "write_pgm",
]
