"""Solution-quality measures.

All three measures reduce to small symmetric eigenproblems via Gramians, so
they respect the columns-only interface: the tall factors are never touched
entrywise.  They are deliberately computed with exact dense eigensolves, not
the 1%-accurate estimator the algorithms use internally; the measuring stick
has to be more accurate than what it measures.  Metrics are pure: they never
charge a flop ledger and never mutate their inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_NORMS = ("spectral", "frobenius")


def _check_norm(norm):
    if norm not in _NORMS:
        raise ValueError(f"norm must be one of {_NORMS}, got {norm!r}")


def _sym_spectral_norm(x):
    """Spectral norm of a symmetric matrix: largest eigenvalue magnitude."""
    if x.shape[0] == 0:
        return 0.0
    w = np.linalg.eigvalsh((x + x.T) / 2.0)
    return float(np.max(np.abs(w)))


def _psd_extent(g, norm):
    """Norm of a tall matrix from its Gramian g: spectral uses the largest
    eigenvalue, Frobenius the trace."""
    if norm == "spectral":
        return math.sqrt(max(float(np.max(np.linalg.eigvalsh((g + g.T) / 2.0))), 0.0))
    return math.sqrt(max(float(np.trace(g)), 0.0))


def loss_of_orthogonality(q, norm="spectral"):
    """Distance of the columns from orthonormality: ||I - Q^T Q||."""
    _check_norm(norm)
    if q.ncols < 1:
        raise ValueError("need at least one column")
    e = np.eye(q.ncols) - q.gramian()
    if norm == "spectral":
        return _sym_spectral_norm(e)
    return float(np.linalg.norm(e))


def reconstruction_residual(a, q, r, norm="spectral"):
    """Relative factorization defect: ||A - QR|| / ||A||.

    Both norms are taken through n x n Gramians, so the tall difference is
    formed but never inspected entrywise.
    """
    _check_norm(norm)
    r = np.asarray(r, dtype=float)
    if r.shape != (q.ncols, a.ncols):
        raise ValueError(
            f"factor shape {r.shape} does not bridge q ({q.ncols} columns) "
            f"to a ({a.ncols} columns)"
        )
    diff = a.copy()
    diff.axpy(-1.0, q.lincomb(r))
    denom = _psd_extent(a.gramian(), norm)
    if denom == 0.0:
        raise ValueError("reconstruction residual undefined for a zero matrix")
    return _psd_extent(diff.gramian(), norm) / denom


def cholesky_residual(a, r, norm="spectral"):
    """Relative Gramian defect of the triangular factor:
    ||A^T A - R^T R|| / ||A||^2."""
    _check_norm(norm)
    r = np.asarray(r, dtype=float)
    if r.ndim != 2 or r.shape[1] != a.ncols:
        raise ValueError(
            f"factor shape {r.shape} does not match column count {a.ncols}"
        )
    g = a.gramian()
    e = g - r.T @ r
    denom = _psd_extent(g, norm) ** 2
    if denom == 0.0:
        raise ValueError("cholesky residual undefined for a zero matrix")
    if norm == "spectral":
        return _sym_spectral_norm(e) / denom
    return float(np.linalg.norm(e)) / denom


@dataclass(frozen=True)
class QualityReport:
    """The three measures in one labeled record."""

    loo: float
    rrr: float
    rcr: float
    norm_used: str = "spectral"


def quality_report(a, q, r, norm="spectral"):
    return QualityReport(
        loo=loss_of_orthogonality(q, norm),
        rrr=reconstruction_residual(a, q, r, norm),
        rcr=cholesky_residual(a, r, norm),
        norm_used=norm,
    )
