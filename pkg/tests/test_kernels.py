"""Dense kernels: factorization, triangular ops, norm estimation, shift."""

from __future__ import annotations

import numpy as np
import pytest

from cholqr import (
    CholeskyBreakdown,
    FlopLedger,
    TriangularSingularError,
    UNIT_ROUNDOFF,
    cholesky,
    cholesky_flops,
    compute_shift,
    eig_estimate_flops,
    frobenius,
    spectral_norm_estimate,
    tri_inverse,
    tri_multiply,
)


def _spd(n, seed=0):
    g = np.random.default_rng(seed).normal(size=(n, n))
    return g @ g.T + n * np.eye(n)


def test_unit_roundoff_value():
    assert UNIT_ROUNDOFF == 1.11e-16


def test_cholesky_hand_oracle():
    r = cholesky(np.array([[4.0, 2.0], [2.0, 5.0]]))
    np.testing.assert_array_equal(r, [[2.0, 1.0], [0.0, 2.0]])


def test_cholesky_matches_numpy_on_spd():
    x = _spd(8, seed=1)
    r = cholesky(x)
    np.testing.assert_array_equal(np.tril(r, -1), 0.0)
    np.testing.assert_allclose(r.T @ r, x, rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(r, np.linalg.cholesky(x).T, rtol=1e-12, atol=1e-13)


def test_cholesky_breakdown_reports_pivot():
    with pytest.raises(CholeskyBreakdown) as info:
        cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert info.value.pivot_index == 1
    # Schur complement 1 - 2*2/1.
    assert info.value.pivot_value == -3.0


def test_cholesky_zero_pivot_is_a_breakdown():
    with pytest.raises(CholeskyBreakdown) as info:
        cholesky(np.zeros((3, 3)))
    assert info.value.pivot_index == 0
    assert info.value.pivot_value == 0.0


def test_cholesky_nan_pivot_is_a_breakdown():
    x = np.eye(2)
    x[1, 1] = np.nan
    with pytest.raises(CholeskyBreakdown):
        cholesky(x)


def test_cholesky_charges_ledger_even_on_failure():
    ledger = FlopLedger()
    with pytest.raises(CholeskyBreakdown):
        cholesky(np.zeros((4, 4)), ledger)
    assert ledger.counts["potrf"] == cholesky_flops(4)


def test_cholesky_rejects_nonsquare():
    with pytest.raises(ValueError, match="square"):
        cholesky(np.zeros((2, 3)))


def test_tri_inverse_round_trip():
    r = cholesky(_spd(6, seed=2))
    inv = tri_inverse(r)
    np.testing.assert_array_equal(np.tril(inv, -1), 0.0)
    np.testing.assert_allclose(r @ inv, np.eye(6), rtol=0, atol=1e-13)


def test_tri_inverse_reports_singular_index():
    r = np.triu(np.ones((3, 3)))
    r[1, 1] = 0.0
    with pytest.raises(TriangularSingularError) as info:
        tri_inverse(r)
    assert info.value.index == 1


def test_tri_inverse_rejects_non_triangular():
    with pytest.raises(ValueError, match="upper-triangular"):
        tri_inverse(np.ones((3, 3)))


def test_tri_inverse_empty():
    out = tri_inverse(np.zeros((0, 0)))
    assert out.shape == (0, 0)


def test_tri_multiply_oracle():
    a = np.triu(np.arange(1.0, 10.0).reshape(3, 3))
    b = np.triu(np.arange(2.0, 11.0).reshape(3, 3))
    out = tri_multiply(a, b)
    np.testing.assert_array_equal(out, np.triu(a @ b))
    np.testing.assert_array_equal(np.tril(out, -1), 0.0)


def test_tri_multiply_rejects_mismatch():
    with pytest.raises(ValueError, match="size mismatch"):
        tri_multiply(np.eye(2), np.eye(3))


def test_frobenius_matches_numpy():
    x = np.random.default_rng(3).normal(size=(5, 5))
    assert frobenius(x) == float(np.linalg.norm(x))


def test_frobenius_with_ledger_requires_square():
    ledger = FlopLedger()
    with pytest.raises(ValueError, match="square"):
        frobenius(np.zeros((2, 3)), ledger)
    # Without a ledger any shape is fine.
    assert frobenius(np.zeros((2, 3))) == 0.0


@pytest.mark.parametrize("n", [2, 10])
def test_spectral_estimate_within_one_percent(n):
    x = _spd(n, seed=n)
    est = spectral_norm_estimate(x)
    true = float(np.max(np.abs(np.linalg.eigvalsh(x))))
    assert abs(est - true) <= 0.011 * true


def test_spectral_estimate_accurate_on_separated_spectrum():
    rng = np.random.default_rng(1)
    q = np.linalg.qr(rng.normal(size=(50, 50)))[0]
    x = (q * np.concatenate([[100.0], np.ones(49)])) @ q.T
    est = spectral_norm_estimate((x + x.T) / 2.0)
    assert est == pytest.approx(100.0, rel=1e-3)


def test_spectral_estimate_approaches_clustered_spectrum_from_below():
    # With a tight cluster at the top, the Rayleigh settling rule stops a
    # few percent early; the estimate never exceeds the true norm.
    x = _spd(50, seed=50)
    est = spectral_norm_estimate(x)
    true = float(np.max(np.abs(np.linalg.eigvalsh(x))))
    assert 0.9 * true <= est <= true * (1.0 + 1e-10)


def test_spectral_estimate_handles_negative_dominant_eigenvalue():
    x = np.diag([1.0, -7.0, 2.0])
    assert spectral_norm_estimate(x) == pytest.approx(7.0, rel=1e-2)


def test_spectral_estimate_rejects_asymmetry():
    with pytest.raises(ValueError, match="symmetric"):
        spectral_norm_estimate(np.array([[0.0, 1.0], [0.5, 0.0]]))


def test_spectral_estimate_zero_and_empty():
    assert spectral_norm_estimate(np.zeros((3, 3))) == 0.0
    assert spectral_norm_estimate(np.zeros((0, 0))) == 0.0


def test_spectral_estimate_nullspace_start_falls_back_to_frobenius():
    # The all-ones start vector is annihilated by this matrix.
    x = np.array([[1.0, -1.0], [-1.0, 1.0]])
    with pytest.warns(UserWarning, match="stalled"):
        est = spectral_norm_estimate(x)
    assert est == float(np.linalg.norm(x))


def test_spectral_estimate_nonconvergence_falls_back_to_frobenius():
    x = _spd(6, seed=4)
    with pytest.warns(UserWarning, match="did not converge"):
        est = spectral_norm_estimate(x, max_iter=1)
    assert est == float(np.linalg.norm(x))


def test_spectral_estimate_charges_flat_budget():
    ledger = FlopLedger()
    spectral_norm_estimate(_spd(12, seed=5), ledger)
    assert ledger.counts["eig_est"] == eig_estimate_flops(12)


def test_compute_shift_hand_value():
    # 11 * (300*10 + 10*11) * 1.11e-16 * 1.0 = 34210 * 1.11e-16.
    assert compute_shift(300, 10, 1.0) == pytest.approx(3.79731e-12, rel=1e-12)


def test_compute_shift_scales_linearly_with_norm():
    base = compute_shift(300, 10, 1.0)
    assert compute_shift(300, 10, 10.0) == pytest.approx(10.0 * base, rel=1e-12)


def test_compute_shift_clamps_at_twice_roundoff():
    assert compute_shift(300, 10, 0.0) == 2.0 * UNIT_ROUNDOFF
    tiny = compute_shift(1, 1, 1e-30)
    assert tiny == 2.0 * UNIT_ROUNDOFF


def test_compute_shift_monotone_in_dimensions():
    assert compute_shift(600, 10, 1.0) > compute_shift(300, 10, 1.0)
    assert compute_shift(300, 20, 1.0) > compute_shift(300, 10, 1.0)


def test_compute_shift_validation():
    with pytest.raises(ValueError):
        compute_shift(-1, 10, 1.0)
    with pytest.raises(ValueError):
        compute_shift(300, 10, -1.0)
    with pytest.raises(ValueError):
        compute_shift(300, 10, 1.0, u=0.0)
    with pytest.raises(ValueError):
        compute_shift(300, 10, 1.0, u=1e-3)
