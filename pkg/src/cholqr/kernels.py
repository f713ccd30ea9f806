"""Small dense kernels: factorization with breakdown detection, triangular
inverse/multiply, Frobenius norm, largest-eigenvalue estimation, and the
diagonal-shift formula.

Everything here works on n x n ndarrays (n is the skinny dimension, so these
are cheap next to the tall-side products).  Each kernel optionally charges a
flop ledger; the charge happens unconditionally at entry so that a run which
fails is charged the same as one that completes.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.linalg import lapack

from . import flops as _flops

#: Unit roundoff of 64-bit floats (half the machine epsilon).
UNIT_ROUNDOFF = 1.11e-16


class CholeskyBreakdown(Exception):
    """Factorization hit a pivot that is not strictly positive.

    A pivot of exactly zero counts as a breakdown too: it signals exact rank
    deficiency and must route the caller into its shift path rather than
    produce a singular factor.
    """

    def __init__(self, pivot_index, pivot_value):
        super().__init__(
            f"cholesky breakdown at pivot {pivot_index}: "
            f"schur diagonal {pivot_value:.6e} <= 0"
        )
        self.pivot_index = pivot_index
        self.pivot_value = pivot_value


class TriangularSingularError(Exception):
    """Triangular matrix cannot be inverted because a diagonal entry is zero."""

    def __init__(self, index):
        super().__init__(f"triangular matrix is singular: zero diagonal at index {index}")
        self.index = index


def _require_square(x, who):
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError(f"{who} needs a square matrix, got shape {x.shape}")


def _require_upper_triangular(r, who):
    _require_square(r, who)
    if r.shape[0] and np.any(np.tril(r, -1) != 0.0):
        raise ValueError(f"{who} needs an upper-triangular matrix")


def cholesky(x, ledger=None):
    """Upper Cholesky factor of a symmetric matrix.

    Raises CholeskyBreakdown at the first Schur-complement diagonal <= 0
    (or NaN), reporting its index and value.  The ledger is charged the full
    factorization cost up front regardless of the outcome.
    """
    x = np.asarray(x, dtype=float)
    _require_square(x, "cholesky")
    n = x.shape[0]
    if ledger is not None:
        ledger.add("potrf", _flops.cholesky_flops(n))
    r = np.zeros_like(x)
    for j in range(n):
        s = x[j, j] - r[:j, j] @ r[:j, j]
        if not s > 0.0:
            raise CholeskyBreakdown(j, float(s))
        rjj = math.sqrt(s)
        r[j, j] = rjj
        if j + 1 < n:
            r[j, j + 1:] = (x[j, j + 1:] - r[:j, j] @ r[:j, j + 1:]) / rjj
    return r


def tri_inverse(r, ledger=None):
    """Inverse of an upper-triangular matrix, itself upper triangular."""
    r = np.asarray(r, dtype=float)
    _require_upper_triangular(r, "tri_inverse")
    n = r.shape[0]
    if ledger is not None:
        ledger.add("trtri", _flops.tri_inverse_flops(n))
    if n == 0:
        return r.copy()
    zero_diag = np.flatnonzero(np.diag(r) == 0.0)
    if zero_diag.size:
        raise TriangularSingularError(int(zero_diag[0]))
    inv, info = lapack.dtrtri(r, lower=0, unitdiag=0)
    if info != 0:
        raise TriangularSingularError(int(info - 1))
    return np.triu(inv)


def tri_multiply(a, b, ledger=None):
    """Product of two upper-triangular matrices, with the exact-zero lower
    part enforced on the result."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _require_upper_triangular(a, "tri_multiply")
    _require_upper_triangular(b, "tri_multiply")
    if a.shape != b.shape:
        raise ValueError(f"size mismatch: {a.shape} vs {b.shape}")
    if ledger is not None:
        ledger.add("trmm", _flops.trmm_flops(a.shape[0]))
    return np.triu(a @ b)


def frobenius(x, ledger=None):
    """Frobenius norm.  Ledger charges assume a square matrix (2n^2 + n)."""
    x = np.asarray(x, dtype=float)
    if ledger is not None:
        _require_square(x, "frobenius (with ledger)")
        ledger.add("fro_norm", _flops.frobenius_flops(x.shape[0]))
    return float(np.linalg.norm(x))


def spectral_norm_estimate(x, ledger=None, tol=1e-2, max_iter=100):
    """Estimate of the largest eigenvalue magnitude of a symmetric matrix.

    Power iteration started from the all-ones vector, stopping when the
    Rayleigh quotient's relative change falls below tol.  When the iteration
    does not settle (or stalls on a zero iterate), the Frobenius norm is
    returned instead: it never underestimates the spectral norm, which is
    the safe direction for the shift formula this estimate feeds.

    The ledger is charged the flat budget of ``eig_estimate_flops``
    regardless of which route produced the value.
    """
    x = np.asarray(x, dtype=float)
    _require_square(x, "spectral_norm_estimate")
    n = x.shape[0]
    if ledger is not None:
        ledger.add("eig_est", _flops.eig_estimate_flops(n))
    if n == 0:
        return 0.0
    fro = float(np.linalg.norm(x))
    if fro == 0.0:
        return 0.0
    asym = np.linalg.norm(x - x.T)
    if asym > 1e-8 * fro:
        raise ValueError(
            f"spectral_norm_estimate needs a symmetric matrix "
            f"(asymmetry {asym:.3e} vs norm {fro:.3e})"
        )
    v = np.full(n, 1.0 / math.sqrt(n))
    lam = None
    for _ in range(max_iter):
        w = x @ v
        norm_w = float(np.linalg.norm(w))
        if norm_w == 0.0:
            # The iterate landed in the nullspace; the Frobenius bound is all
            # we can say without restarting.
            warnings.warn(
                "power iteration stalled on a nullspace vector; "
                "falling back to the Frobenius upper bound",
                stacklevel=2,
            )
            return fro
        lam_new = float(v @ w)
        v = w / norm_w
        if lam is not None and abs(lam_new - lam) <= tol * abs(lam_new):
            return abs(lam_new)
        lam = lam_new
    warnings.warn(
        "power iteration did not converge; falling back to the Frobenius "
        "upper bound",
        stacklevel=2,
    )
    return fro


def compute_shift(m, n, norm_x, u=UNIT_ROUNDOFF):
    """Diagonal shift that restores positive definiteness of a Gramian.

    Scales with the rounding error committed when forming an m x n matrix's
    Gramian: 11(mn + n(n+1)) * u * norm_x, clamped below by 2u so that even a
    zero norm yields a usable positive shift.
    """
    if m < 0 or n < 0:
        raise ValueError("dimensions must be nonnegative")
    if norm_x < 0:
        raise ValueError("norm_x must be >= 0")
    if not 0.0 < u < 1e-7:
        raise ValueError("unit roundoff out of range")
    return max(11.0 * (m * n + n * (n + 1)) * u * norm_x, 2.0 * u)
