"""Orthogonalization routines over the columns-only array interface.

All tall-side work goes through the array operations (Gramians, linear
combinations, columnwise updates); all n x n math goes through the kernels.
The iterated routines repeat factorization passes until the Gramian is within
tolerance of the identity, applying a diagonal shift when a factorization
breaks down:

- ``chol_qr`` / ``chol_qr2``: one or two plain passes, breakdown propagates.
- ``s_chol_qr3``: one shifted pass followed by two plain ones.
- ``is_chol_qr``: iterate; on breakdown reuse one fixed shift derived from
  the initial Gramian's norm.
- ``rs_chol_qr``: iterate; on breakdown recompute the shift from the current
  Gramian's norm, escalating it geometrically if the retry fails again.
- ``chol_qr_update``: extend an existing orthonormal basis by a new block,
  deflating the block against the basis between factorization passes.
- ``pn_chol_qr``: fold ``chol_qr_update`` over contiguous column panels.
- ``mgs``: column-at-a-time baseline with reorthogonalization and rank
  revealing column drops.

Every routine accepts an optional flop ledger; charges follow the dense
kernel cost model in ``flops`` (tall-side products are charged as general
multiplies of their shapes, no matter which backend executes them).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import flops as _flops
from .flops import IterationProfile
from .kernels import (
    UNIT_ROUNDOFF,
    CholeskyBreakdown,
    cholesky,
    compute_shift,
    frobenius,
    spectral_norm_estimate,
    tri_inverse,
    tri_multiply,
)


class ShiftAttemptLimitError(Exception):
    """Even the escalated shifted factorizations kept breaking down."""

    def __init__(self, attempts, last_shift):
        super().__init__(
            f"factorization still breaks down after {attempts} shifted "
            f"attempts (last shift {last_shift:.3e})"
        )
        self.attempts = attempts
        self.last_shift = last_shift


@dataclass(frozen=True)
class AlgoConfig:
    """Shared knobs for the iterated routines.

    tol_policy selects the stopping tolerance: "fixed" stops when the
    Gramian's Frobenius distance from the identity drops below tol,
    "roundoff" stops at unit_roundoff * sqrt(width) instead.
    update_shift_width picks which width enters the shift formula during a
    basis update: the "existing" basis width (as the update's shift is
    defined) or the "incoming" block width.
    """

    tol: float = 1e-13
    max_iter: int = 10
    shift_escalation: float = 10.0
    max_shift_attempts: int = 60
    unit_roundoff: float = UNIT_ROUNDOFF
    tol_policy: str = "fixed"
    update_shift_width: str = "existing"

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.shift_escalation > 1:
            raise ValueError("shift_escalation must be > 1")
        if self.max_shift_attempts < 1:
            raise ValueError("max_shift_attempts must be >= 1")
        if self.tol_policy not in ("fixed", "roundoff"):
            raise ValueError("tol_policy must be 'fixed' or 'roundoff'")
        if self.update_shift_width not in ("existing", "incoming"):
            raise ValueError("update_shift_width must be 'existing' or 'incoming'")

    def effective_tol(self, width):
        if self.tol_policy == "roundoff":
            return self.unit_roundoff * math.sqrt(max(width, 1))
        return self.tol


@dataclass
class QRResult:
    """Factors plus run diagnostics.

    iterations counts factorization passes (outer iterations for the
    iterated routines).  success is False when an iterated routine hit its
    iteration cap before the Gramian settled; orth_error then still holds
    the last measured Frobenius distance of the (deflated) Gramian from the
    identity.  One-pass routines never measure orthogonality, so for them
    success only means "ran to completion" and orth_error stays None.

    shifts_applied lists every shift value attempted, in order;
    shift_attempts has one entry per outer iteration counting that
    iteration's factorization retries (0 = first attempt succeeded).
    dropped lists input column indices discarded by rank-revealing routines.
    panel_profiles carries the per-panel iteration profiles of the panel
    scheme.
    """

    q: "VectorArray"
    r: np.ndarray
    iterations: int
    shifts_applied: list = field(default_factory=list)
    shift_attempts: list = field(default_factory=list)
    success: bool = True
    orth_error: float | None = None
    dropped: list = field(default_factory=list)
    panel_profiles: list | None = None

    @property
    def profile(self):
        """Iteration profile for flop prediction, or None for routines whose
        pass count is fixed rather than retry-driven."""
        if len(self.shift_attempts) != self.iterations:
            return None
        return IterationProfile(self.iterations, tuple(self.shift_attempts))

    def r_with_drops(self):
        """Triangular factor widened back to the original column count.

        Rank-revealing routines compact the factor to the kept columns.
        This restores an exact-zero column at each dropped index so the
        factor bridges the basis to the full input again, which is what
        the residual metrics need.
        """
        if not self.dropped:
            return self.r
        k, kept = self.r.shape
        n = kept + len(self.dropped)
        dropped = set(self.dropped)
        out = np.zeros((k, n))
        src = 0
        for j in range(n):
            if j in dropped:
                continue
            out[:, j] = self.r[:, src]
            src += 1
        return out


def _charged_gramian(left, right=None, ledger=None):
    g = left.gramian(right)
    if ledger is not None:
        k_left = left.ncols
        k_right = k_left if right is None else right.ncols
        ledger.add("gemm", _flops.gemm_flops(left.space.dim, k_left, k_right))
    return g


def _charged_lincomb(arr, coeffs, ledger=None):
    out = arr.lincomb(coeffs)
    if ledger is not None:
        ledger.add(
            "gemm", _flops.gemm_flops(arr.space.dim, arr.ncols, coeffs.shape[1])
        )
    return out


def _charged_axpy(target, alpha, source, ledger=None):
    target.axpy(alpha, source)
    if ledger is not None:
        work = target.space.dim * target.ncols
        if alpha not in (1.0, -1.0):
            work *= 2
        ledger.add("gemm", work)
    return target


def _shifted(x, sigma, ledger=None):
    """x + sigma*I, charging the diagonal additions to the factorization
    category (they belong to forming the shifted factorization input)."""
    out = x.copy()
    out[np.diag_indices_from(out)] += sigma
    if ledger is not None:
        ledger.add("potrf", x.shape[0])
    return out


def _identity_distance(x, ledger=None):
    return frobenius(x - np.eye(x.shape[0]), ledger)


def chol_qr(a, cfg=None, ledger=None):
    """One factorization pass: Q = A * R^-1 with R from the Gramian.

    No iteration, no shift; a breakdown (expected once the squared condition
    number reaches the reciprocal of the unit roundoff) propagates.
    """
    if a.ncols < 1:
        raise ValueError("need at least one column")
    x = _charged_gramian(a, None, ledger)
    r = cholesky(x, ledger)
    q = _charged_lincomb(a, tri_inverse(r, ledger), ledger)
    return QRResult(q=q, r=r, iterations=1)


def chol_qr2(a, cfg=None, ledger=None):
    """Two plain passes with the triangular factors accumulated."""
    first = chol_qr(a, cfg, ledger)
    second = chol_qr(first.q, cfg, ledger)
    r = tri_multiply(second.r, first.r, ledger)
    return QRResult(q=second.q, r=r, iterations=2)


def s_chol_qr3(a, cfg=None, ledger=None):
    """Shifted first pass, then two plain passes.

    The shift is applied unconditionally on the first factorization, sized
    from the estimated Gramian norm; a breakdown in any pass propagates.
    """
    cfg = cfg or AlgoConfig()
    if a.ncols < 1:
        raise ValueError("need at least one column")
    m, n = a.space.dim, a.ncols
    x = _charged_gramian(a, None, ledger)
    sigma = compute_shift(
        m, n, spectral_norm_estimate(x, ledger), cfg.unit_roundoff
    )
    r = cholesky(_shifted(x, sigma, ledger), ledger)
    q = _charged_lincomb(a, tri_inverse(r, ledger), ledger)
    for _ in range(2):
        x = _charged_gramian(q, None, ledger)
        rk = cholesky(x, ledger)
        q = _charged_lincomb(q, tri_inverse(rk, ledger), ledger)
        r = tri_multiply(rk, r, ledger)
    return QRResult(q=q, r=r, iterations=3, shifts_applied=[sigma])


def is_chol_qr(a, cfg=None, ledger=None):
    """Iterated passes with one fixed shift, derived from the first Gramian.

    The shift is computed at the first breakdown from the initial Gramian's
    estimated norm (the initial Gramian's norm is the squared norm of the
    input) and reused unchanged on any later breakdown.  If the shifted
    factorization itself breaks down, that propagates: this variant has no
    escalation, which is exactly the weakness the recomputing variant fixes.
    """
    cfg = cfg or AlgoConfig()
    if a.ncols < 1:
        raise ValueError("need at least one column")
    m, n = a.space.dim, a.ncols
    tol = cfg.effective_tol(n)
    q = a.copy()
    r = np.eye(n)
    x = _charged_gramian(q, None, ledger)
    first_x = x
    sigma0 = None
    shifts, attempts = [], []
    its = 0
    err = _identity_distance(x, ledger)
    # `not <` instead of `>=` so a NaN distance (poisoned input) keeps
    # iterating into the breakdown path instead of counting as converged.
    while not err < tol:
        if its == cfg.max_iter:
            return QRResult(q, r, its, shifts, attempts, success=False, orth_error=err)
        try:
            rk = cholesky(x, ledger)
            attempts.append(0)
        except CholeskyBreakdown:
            if sigma0 is None:
                sigma0 = compute_shift(
                    m, n,
                    spectral_norm_estimate(first_x, ledger),
                    cfg.unit_roundoff,
                )
            rk = cholesky(_shifted(x, sigma0, ledger), ledger)
            shifts.append(sigma0)
            attempts.append(1)
        q = _charged_lincomb(q, tri_inverse(rk, ledger), ledger)
        r = tri_multiply(rk, r, ledger)
        x = _charged_gramian(q, None, ledger)
        its += 1
        err = _identity_distance(x, ledger)
    return QRResult(q, r, its, shifts, attempts, success=True, orth_error=err)


def _retry_with_recomputed_shift(x, m, width, cfg, ledger, shifts_out):
    """Shifted retries after an unshifted breakdown.

    The first retry's shift comes from the current Gramian's estimated norm;
    each further retry escalates it geometrically (charged one flop each,
    the escalation being a single multiply).  Returns the factor and the
    number of retries used.
    """
    sigma = compute_shift(
        m, width, spectral_norm_estimate(x, ledger), cfg.unit_roundoff
    )
    retries = 0
    while True:
        retries += 1
        if retries > cfg.max_shift_attempts:
            raise ShiftAttemptLimitError(retries - 1, sigma)
        shifts_out.append(sigma)
        try:
            return cholesky(_shifted(x, sigma, ledger), ledger), retries
        except CholeskyBreakdown:
            if ledger is not None:
                ledger.add("eig_est", 1)
            sigma = max(cfg.shift_escalation * sigma, 2.0 * cfg.unit_roundoff)


def rs_chol_qr(a, cfg=None, ledger=None):
    """Iterated passes with the shift recomputed at every breakdown.

    Each outer iteration first tries the plain factorization; on breakdown
    the shift is recomputed from the current Gramian's estimated norm and
    escalated until the shifted factorization succeeds.  Iteration stops
    when the Gramian's Frobenius distance from the identity drops below the
    tolerance; hitting the iteration cap returns success=False with the last
    measured distance.
    """
    cfg = cfg or AlgoConfig()
    if a.ncols < 1:
        raise ValueError("need at least one column")
    m, n = a.space.dim, a.ncols
    tol = cfg.effective_tol(n)
    q = a.copy()
    r = np.eye(n)
    x = _charged_gramian(q, None, ledger)
    shifts, attempts = [], []
    its = 0
    err = _identity_distance(x, ledger)
    while not err < tol:  # NaN-safe: see is_chol_qr
        if its == cfg.max_iter:
            return QRResult(q, r, its, shifts, attempts, success=False, orth_error=err)
        try:
            rk = cholesky(x, ledger)
            attempts.append(0)
        except CholeskyBreakdown:
            rk, retries = _retry_with_recomputed_shift(x, m, n, cfg, ledger, shifts)
            attempts.append(retries)
        q = _charged_lincomb(q, tri_inverse(rk, ledger), ledger)
        r = tri_multiply(rk, r, ledger)
        x = _charged_gramian(q, None, ledger)
        its += 1
        err = _identity_distance(x, ledger)
    return QRResult(q, r, its, shifts, attempts, success=True, orth_error=err)


def _deflated_gramian(q, bt, ledger=None):
    """Gramian of the new block minus the part already explained by the
    existing basis, symmetrized."""
    g = _charged_gramian(q, None, ledger)
    x = g - bt.T @ bt
    if ledger is not None:
        k, p = bt.shape
        ledger.add("gemm", _flops.gemm_flops(p, k, p) + p * p)
    return (x + x.T) / 2.0


def _update_factor_attempts(x, m, width, cfg, ledger, shifts_out):
    """Factorization attempts for the update loop: plain first (shift zero),
    then the width-scaled shift, then geometric escalations.

    Returns the factor and the number of retries beyond the first attempt.
    Every attempt, including the unshifted one, goes through the shifted
    form so each is charged identically.
    """
    sigma = 0.0
    retries = 0
    while True:
        try:
            return cholesky(_shifted(x, sigma, ledger), ledger), retries
        except CholeskyBreakdown:
            retries += 1
            if retries > cfg.max_shift_attempts:
                raise ShiftAttemptLimitError(retries - 1, sigma) from None
            if sigma == 0.0:
                sigma = compute_shift(
                    m, width,
                    spectral_norm_estimate(x, ledger),
                    cfg.unit_roundoff,
                )
            else:
                if ledger is not None:
                    ledger.add("eig_est", 1)
                sigma = cfg.shift_escalation * sigma
            sigma = max(sigma, 2.0 * cfg.unit_roundoff)
            shifts_out.append(sigma)


def chol_qr_update(q_in, r_in, a_new, cfg=None, ledger=None):
    """Extend an orthonormal basis by a new block of columns.

    Orthonormalizes a_new against q_in (assumed orthonormal within the
    tolerance, which the caller guarantees) and returns the augmented basis
    together with the augmented triangular factor

        [[r_in, B], [0, R]]

    whose lower-left block is exactly zero by construction.  The new block
    is repeatedly deflated against the basis and refactored until its
    deflated Gramian is within tolerance of the identity.
    """
    cfg = cfg or AlgoConfig()
    if a_new.ncols < 1:
        raise ValueError("need at least one new column")
    if q_in.space != a_new.space:
        raise ValueError("space mismatch between basis and new block")
    k = q_in.ncols
    p = a_new.ncols
    r_in = np.asarray(r_in, dtype=float)
    if r_in.shape != (k, k):
        raise ValueError(f"r_in must be {k} x {k}, got {r_in.shape}")
    m = a_new.space.dim
    tol = cfg.effective_tol(p)
    shift_width = k if cfg.update_shift_width == "existing" else p

    q = a_new.copy()
    b = np.zeros((k, p))
    r = np.eye(p)
    bt = _charged_gramian(q_in, q, ledger)
    x = _deflated_gramian(q, bt, ledger)
    shifts, attempts = [], []
    its = 0
    success = True
    err = _identity_distance(x, ledger)
    while not err < tol:  # NaN-safe: see is_chol_qr
        if its == cfg.max_iter:
            success = False
            break
        rk, retries = _update_factor_attempts(x, m, shift_width, cfg, ledger, shifts)
        attempts.append(retries)
        proj = _charged_lincomb(q_in, bt, ledger)
        _charged_axpy(q, -1.0, proj, ledger)
        q = _charged_lincomb(q, tri_inverse(rk, ledger), ledger)
        b = b + bt @ r
        if ledger is not None:
            ledger.add("gemm", _flops.gemm_flops(k, p, p) + k * p)
        r = tri_multiply(rk, r, ledger)
        bt = _charged_gramian(q_in, q, ledger)
        x = _deflated_gramian(q, bt, ledger)
        its += 1
        err = _identity_distance(x, ledger)
    q_out = q_in.copy()
    q_out.append(q)
    r_out = np.block([[r_in, b], [np.zeros((p, k)), r]])
    return QRResult(
        q_out, r_out, its, shifts, attempts, success=success, orth_error=err
    )


def panel_widths(n, r_panels):
    """Split n columns into r contiguous panels within one column of equal
    size; the first (n mod r) panels take the extra column."""
    if not 1 <= r_panels <= n:
        raise ValueError(f"need 1 <= r_panels <= {n}, got {r_panels}")
    base, extra = divmod(n, r_panels)
    return [base + 1] * extra + [base] * (r_panels - extra)


def pn_chol_qr(a, r_panels, cfg=None, ledger=None):
    """Panel scheme: fold the basis update over contiguous column panels.

    Bounds the Gramian work to the panel width.  iterations is the total
    outer-iteration count across panels; per-panel loop structure is
    recorded in panel_profiles.  A panel that hits the iteration cap marks
    the result unsuccessful but later panels still run.
    """
    cfg = cfg or AlgoConfig()
    widths = panel_widths(a.ncols, r_panels)
    q = type(a).zeros(a.space, 0)
    r = np.zeros((0, 0))
    shifts, attempts, profiles = [], [], []
    its = 0
    success = True
    err = None
    start = 0
    for index, width in enumerate(widths):
        panel = a.copy(range(start, start + width))
        start += width
        try:
            res = chol_qr_update(q, r, panel, cfg, ledger)
        except (CholeskyBreakdown, ShiftAttemptLimitError) as exc:
            exc.panel_index = index
            raise
        q, r = res.q, res.r
        its += res.iterations
        shifts.extend(res.shifts_applied)
        attempts.extend(res.shift_attempts)
        profiles.append(res.profile)
        err = res.orth_error
        success = success and res.success
    return QRResult(
        q, r, its, shifts, attempts,
        success=success, orth_error=err, panel_profiles=profiles,
    )


def mgs(a, cfg=None, ledger=None, drop_tol=1e-13):
    """Column-at-a-time baseline with rank revealing drops.

    Modified Gram-Schmidt with one reorthogonalization pass per column.  A
    column whose norm after projection falls to drop_tol times its original
    norm (or below) is linearly dependent on its predecessors at working
    precision; it is dropped and its index reported, and the triangular
    factor is compacted to the kept columns.
    """
    if a.ncols < 1:
        raise ValueError("need at least one column")
    n = a.ncols
    r = np.zeros((n, n))
    kept_cols = []
    kept_idx = []
    dropped = []
    for j in range(n):
        v = a.copy([j])
        orig_norm = math.sqrt(max(_charged_gramian(v, None, ledger)[0, 0], 0.0))
        for _ in range(2):
            for pos, qi in enumerate(kept_cols):
                h = float(_charged_gramian(qi, v, ledger)[0, 0])
                _charged_axpy(v, -h, qi, ledger)
                r[pos, j] += h
        norm = math.sqrt(max(_charged_gramian(v, None, ledger)[0, 0], 0.0))
        if norm <= drop_tol * orig_norm:
            dropped.append(j)
            continue
        r[len(kept_cols), j] = norm
        kept_cols.append(_charged_lincomb(v, np.array([[1.0 / norm]]), ledger))
        kept_idx.append(j)
    q = type(a).zeros(a.space, 0)
    for col in kept_cols:
        q.append(col)
    r = np.triu(r[: len(kept_idx)][:, kept_idx])
    return QRResult(q, r, iterations=1, dropped=dropped)


def reference_qr(a_dense):
    """Householder factorization as a dense oracle.

    Economy size, with the sign convention fixed so the triangular factor
    has a nonnegative diagonal (making it comparable entrywise with factors
    produced by the Gramian-based routines, whose diagonals are positive by
    construction).
    """
    a_dense = np.asarray(a_dense, dtype=float)
    if a_dense.ndim != 2:
        raise ValueError("need a 2-d matrix")
    m, n = a_dense.shape
    if m < n:
        raise ValueError(f"need m >= n, got {m} x {n}")
    q, r = np.linalg.qr(a_dense)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs, np.triu(signs[:, None] * r)
