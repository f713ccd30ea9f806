"""Tall-and-skinny QR orthogonalization via Cholesky factorization of the
Gramian, over a column-access-only matrix interface.

The algorithms never touch matrix entries directly: everything is expressed
through Gramians, linear combinations, and scaled additions of columns, so
any storage backend implementing the small VectorArray interface can be
orthogonalized.  Robustness on ill-conditioned inputs comes from shifting
the Gramian before factorization; the recomputing scheme re-derives the
shift from the current Gramian whenever the factorization breaks down, the
update scheme extends an existing orthonormal basis by new columns, and the
panel scheme folds the update over column panels to bound the Gramian work.
"""

from .algorithms import (
    AlgoConfig,
    QRResult,
    ShiftAttemptLimitError,
    chol_qr,
    chol_qr2,
    chol_qr_update,
    is_chol_qr,
    mgs,
    panel_widths,
    pn_chol_qr,
    reference_qr,
    rs_chol_qr,
    s_chol_qr3,
)
from .flops import (
    CATEGORIES,
    FlopLedger,
    IterationProfile,
    LedgerComparison,
    cholesky_flops,
    eig_estimate_flops,
    frobenius_flops,
    gemm_flops,
    ledger_report,
    panel_counts,
    panel_flop_ratio,
    panel_flop_ratio_limit,
    predict_panel,
    predict_rscholqr,
    predict_update,
    rscholqr_counts,
    tri_inverse_flops,
    trmm_flops,
    update_counts,
)
from .kernels import (
    UNIT_ROUNDOFF,
    CholeskyBreakdown,
    TriangularSingularError,
    cholesky,
    compute_shift,
    frobenius,
    spectral_norm_estimate,
    tri_inverse,
    tri_multiply,
)
from .matgen import (
    MatrixSpec,
    effective_seed,
    generate,
    random_orthogonal,
    singular_values,
)
from .metrics import (
    QualityReport,
    cholesky_residual,
    loss_of_orthogonality,
    quality_report,
    reconstruction_residual,
)
from .varray import (
    BACKENDS,
    DenseVectorArray,
    ListVectorArray,
    VectorArray,
    VectorSpace,
    backend_class,
    load_matrix_market,
    save_matrix_market,
    to_dense_block,
)

__version__ = "0.1.0"

__all__ = [
    "AlgoConfig",
    "BACKENDS",
    "CATEGORIES",
    "CholeskyBreakdown",
    "DenseVectorArray",
    "FlopLedger",
    "IterationProfile",
    "LedgerComparison",
    "ListVectorArray",
    "MatrixSpec",
    "QRResult",
    "QualityReport",
    "ShiftAttemptLimitError",
    "TriangularSingularError",
    "UNIT_ROUNDOFF",
    "VectorArray",
    "VectorSpace",
    "backend_class",
    "chol_qr",
    "chol_qr2",
    "chol_qr_update",
    "cholesky",
    "cholesky_flops",
    "cholesky_residual",
    "compute_shift",
    "effective_seed",
    "eig_estimate_flops",
    "frobenius",
    "frobenius_flops",
    "gemm_flops",
    "generate",
    "is_chol_qr",
    "ledger_report",
    "load_matrix_market",
    "loss_of_orthogonality",
    "mgs",
    "panel_counts",
    "panel_flop_ratio",
    "panel_flop_ratio_limit",
    "panel_widths",
    "pn_chol_qr",
    "predict_panel",
    "predict_rscholqr",
    "predict_update",
    "quality_report",
    "random_orthogonal",
    "reconstruction_residual",
    "reference_qr",
    "rs_chol_qr",
    "rscholqr_counts",
    "s_chol_qr3",
    "save_matrix_market",
    "singular_values",
    "spectral_norm_estimate",
    "to_dense_block",
    "tri_inverse",
    "tri_inverse_flops",
    "tri_multiply",
    "trmm_flops",
    "update_counts",
    "__version__",
]
