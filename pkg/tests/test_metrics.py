"""Quality measures: hand oracles, dense-norm agreement, purity."""

from __future__ import annotations

import inspect

import numpy as np
import pytest

from cholqr import (
    DenseVectorArray,
    ListVectorArray,
    MatrixSpec,
    QualityReport,
    cholesky_residual,
    generate,
    loss_of_orthogonality,
    quality_report,
    reconstruction_residual,
    reference_qr,
    rs_chol_qr,
    to_dense_block,
)
from cholqr import metrics as metrics_module


def test_loss_of_orthogonality_hand_oracle():
    # Two copies of the same unit vector: I - Q^T Q = [[0, -1], [-1, 0]].
    e1 = np.zeros((4, 1))
    e1[0, 0] = 1.0
    q = DenseVectorArray.from_numpy(np.hstack([e1, e1]))
    assert loss_of_orthogonality(q) == pytest.approx(1.0, abs=1e-15)
    assert loss_of_orthogonality(q, norm="frobenius") == pytest.approx(
        np.sqrt(2.0), rel=1e-15
    )


def test_loss_of_orthogonality_perfect_basis():
    q = DenseVectorArray.from_numpy(np.eye(5, 3))
    assert loss_of_orthogonality(q) == 0.0


def test_exact_factorization_scores_zero():
    q_block = np.eye(6, 2)
    r = np.array([[2.0, 1.0], [0.0, 3.0]])
    a = DenseVectorArray.from_numpy(q_block @ r)
    q = DenseVectorArray.from_numpy(q_block)
    assert reconstruction_residual(a, q, r) == 0.0
    assert cholesky_residual(a, r) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("backend_cls", [DenseVectorArray, ListVectorArray])
def test_metrics_agree_with_dense_norms(backend_cls):
    block = to_dense_block(generate(MatrixSpec(80, 6, 3.0, seed=0))[0])
    q_block, r = reference_qr(block)
    a = backend_cls.from_numpy(block)
    q = backend_cls.from_numpy(q_block)

    loo = loss_of_orthogonality(q)
    loo_dense = np.linalg.norm(np.eye(6) - q_block.T @ q_block, 2)
    assert loo == pytest.approx(loo_dense, rel=1e-6, abs=1e-15)

    rrr = reconstruction_residual(a, q, r)
    rrr_dense = np.linalg.norm(block - q_block @ r, 2) / np.linalg.norm(block, 2)
    assert rrr == pytest.approx(rrr_dense, rel=1e-2, abs=1e-14)

    rcr = cholesky_residual(a, r)
    rcr_dense = np.linalg.norm(block.T @ block - r.T @ r, 2) / np.linalg.norm(block, 2) ** 2
    assert rcr == pytest.approx(rcr_dense, rel=1e-2, abs=1e-16)


def test_frobenius_variant_matches_dense_norms():
    block = to_dense_block(generate(MatrixSpec(60, 5, 2.0, seed=1))[0])
    res = rs_chol_qr(DenseVectorArray.from_numpy(block))
    q_block = to_dense_block(res.q)
    rrr = reconstruction_residual(
        DenseVectorArray.from_numpy(block), res.q, res.r, norm="frobenius"
    )
    dense = np.linalg.norm(block - q_block @ res.r) / np.linalg.norm(block)
    assert rrr == pytest.approx(dense, rel=1e-2, abs=1e-14)


def test_quality_report_bundles_all_three():
    a, _ = generate(MatrixSpec(100, 4, 2.0, seed=2))
    res = rs_chol_qr(a)
    rep = quality_report(a, res.q, res.r, norm="frobenius")
    assert isinstance(rep, QualityReport)
    assert rep.norm_used == "frobenius"
    assert rep.loo <= 1e-13
    assert rep.rrr <= 1e-13
    assert rep.rcr <= 1e-13
    with pytest.raises(Exception):
        rep.loo = 0.0  # frozen record


def test_metrics_validate_shapes_and_norms():
    a, _ = generate(MatrixSpec(30, 3, 1.0, seed=3))
    res = rs_chol_qr(a)
    with pytest.raises(ValueError, match="norm must be"):
        loss_of_orthogonality(res.q, norm="nuclear")
    with pytest.raises(ValueError, match="does not bridge"):
        reconstruction_residual(a, res.q, np.eye(4))
    with pytest.raises(ValueError, match="does not match"):
        cholesky_residual(a, np.eye(4))
    empty = DenseVectorArray.from_numpy(np.zeros((30, 0)))
    with pytest.raises(ValueError, match="at least one column"):
        loss_of_orthogonality(empty)


def test_cholesky_residual_accepts_rectangular_factor():
    # Rank-revealing routines hand back a kept x original factor.
    a, _ = generate(MatrixSpec(30, 3, 1.0, seed=4))
    res = rs_chol_qr(a)
    rect = res.r[:2, :]
    value = cholesky_residual(a, rect)
    assert value > 0.0


def test_zero_matrix_is_rejected():
    zero = DenseVectorArray.from_numpy(np.zeros((10, 2)))
    with pytest.raises(ValueError, match="zero matrix"):
        reconstruction_residual(zero, zero, np.zeros((2, 2)))
    with pytest.raises(ValueError, match="zero matrix"):
        cholesky_residual(zero, np.zeros((2, 2)))


def test_metrics_do_not_mutate_inputs():
    block = to_dense_block(generate(MatrixSpec(40, 4, 2.0, seed=5))[0])
    a = DenseVectorArray.from_numpy(block)
    res = rs_chol_qr(a)
    q_before = to_dense_block(res.q)
    r_before = res.r.copy()
    quality_report(a, res.q, res.r)
    np.testing.assert_array_equal(to_dense_block(a), block)
    np.testing.assert_array_equal(to_dense_block(res.q), q_before)
    np.testing.assert_array_equal(res.r, r_before)


def test_metrics_take_no_ledger():
    # Measuring quality must never charge the run being measured.
    for fn in (loss_of_orthogonality, reconstruction_residual, cholesky_residual, quality_report):
        assert "ledger" not in inspect.signature(fn).parameters
    assert not hasattr(metrics_module, "FlopLedger")
