"""Flop model: frozen closed-form values, identities, and measured-ledger
agreement with the per-category predictors."""

from __future__ import annotations

import numpy as np
import pytest

from conftest import with_zero_columns

from cholqr import (
    CATEGORIES,
    DenseVectorArray,
    FlopLedger,
    IterationProfile,
    MatrixSpec,
    cholesky_flops,
    chol_qr_update,
    eig_estimate_flops,
    frobenius_flops,
    gemm_flops,
    generate,
    ledger_report,
    panel_counts,
    panel_flop_ratio,
    panel_flop_ratio_limit,
    panel_widths,
    pn_chol_qr,
    predict_panel,
    predict_rscholqr,
    predict_update,
    rs_chol_qr,
    rscholqr_counts,
    to_dense_block,
    tri_inverse_flops,
    trmm_flops,
    update_counts,
)


def test_kernel_cost_spot_values():
    assert gemm_flops(3, 4, 5) == 120
    assert trmm_flops(10) == 1000
    assert cholesky_flops(10) == 385
    assert tri_inverse_flops(10) == 340
    assert frobenius_flops(10) == 210
    assert eig_estimate_flops(10) == 19000


def test_rscholqr_prediction_frozen_values():
    # Hand-evaluated: base 2*300*100 + 2*100 + 10 = 60210, and each
    # pessimistic iteration adds 4*300*100 + 2*1000 + 3*100 + E(10) + 30
    # = 141330 with E(10) = 19000.
    assert predict_rscholqr(300, 10, 0) == 60210
    assert predict_rscholqr(300, 10, 1) == 201540
    assert predict_rscholqr(300, 10, 2) == 342870


def test_update_prediction_frozen_value():
    profile = IterationProfile(1, (1,))
    assert predict_update(1000, 10, 10, profile) == 1237850


def test_panel_prediction_frozen_values():
    assert predict_panel(300, 10, 2, 1, 1) == 156775
    assert predict_panel(300, 10, 2, 10, 1) == 1159060


@pytest.mark.parametrize("x", [0, 1, 3, 7])
def test_rscholqr_counts_sum_to_closed_form(x):
    # The closed form assumes one shifted retry per iteration.
    profile = IterationProfile(x, (1,) * x)
    counts = rscholqr_counts(300, 10, profile)
    assert set(counts) == set(CATEGORIES)
    assert sum(counts.values()) == predict_rscholqr(300, 10, x)


@pytest.mark.parametrize("shift_attempts", [(1,), (1, 1), (2, 3), (1, 4, 1)])
def test_update_counts_sum_to_closed_form(shift_attempts):
    # The closed form assumes every iteration breaks down at least once, so
    # it only matches profiles with all retry counts >= 1.
    profile = IterationProfile(len(shift_attempts), shift_attempts)
    counts = update_counts(2000, 20, 5, profile)
    assert sum(counts.values()) == predict_update(2000, 20, 5, profile)


@pytest.mark.parametrize("r", [1, 2, 5])
def test_panel_counts_sum_to_closed_form_when_uniform(r):
    m, n, x, y = 300, 10, 4, 1
    widths = panel_widths(n, r)
    profiles = [IterationProfile(x, (y,) * x)] * r
    counts = panel_counts(m, widths, profiles)
    assert sum(counts.values()) == predict_panel(m, n, r, x, y)


def test_panel_counts_is_the_fold_of_update_counts():
    m = 500
    widths = [4, 3, 3]
    profiles = [IterationProfile(2, (1, 0)), IterationProfile(1, (0,)), IterationProfile(1, (1,))]
    expected = {c: 0 for c in CATEGORIES}
    q = 0
    for width, profile in zip(widths, profiles):
        for cat, val in update_counts(m, q, width, profile).items():
            expected[cat] += val
        q += width
    assert panel_counts(m, widths, profiles) == expected


def test_panel_counts_needs_one_profile_per_panel():
    with pytest.raises(ValueError):
        panel_counts(100, [5, 5], [IterationProfile(1, (0,))])


def test_panel_prediction_requires_divisible_width():
    with pytest.raises(ValueError, match="r \\| n"):
        predict_panel(300, 10, 3, 1, 1)
    with pytest.raises(ValueError):
        predict_panel(300, 10, 0, 1, 1)


def test_panel_flop_ratio_values():
    assert panel_flop_ratio_limit(2) == 0.75
    assert panel_flop_ratio_limit(5) == 0.6
    n, x = 100, 3
    assert panel_flop_ratio(n, 2, x) == 0.75 + x / (4.0 * n * x + 2.0 * n)
    # A single panel keeps the full-width factorizations, so no halving.
    assert panel_flop_ratio(n, 1, x) == 1.0 + x / (4.0 * n * x + 2.0 * n)


@pytest.mark.parametrize("r", [2, 5])
def test_panel_ratio_is_the_large_m_limit(r):
    n, x, y = 100, 3, 1
    m = 10 ** 9
    ratio = predict_panel(m, n, r, x, y) / predict_rscholqr(m, n, x)
    assert ratio == pytest.approx(panel_flop_ratio(n, r, x), rel=1e-4)


def test_iteration_profile_validation():
    with pytest.raises(ValueError):
        IterationProfile(-1, ())
    with pytest.raises(ValueError, match="one shift-attempt count"):
        IterationProfile(2, (1,))
    with pytest.raises(ValueError):
        IterationProfile(1, (-1,))


def test_ledger_basics():
    ledger = FlopLedger()
    ledger.add("gemm", 10)
    ledger.add("gemm", 5)
    assert ledger.counts["gemm"] == 15
    assert ledger.total() == 15
    snapshot = ledger.as_dict()
    snapshot["gemm"] = 0
    assert ledger.counts["gemm"] == 15
    with pytest.raises(KeyError):
        ledger.add("fft", 1)
    with pytest.raises(ValueError):
        ledger.add("gemm", -1)


def test_ledger_report_flags_mismatches():
    ledger = FlopLedger()
    ledger.add("gemm", 100)
    good = ledger_report(ledger, {**{c: 0 for c in CATEGORIES}, "gemm": 100})
    assert good.matches
    assert good.mismatches == ()
    bad = ledger_report(ledger, {**{c: 0 for c in CATEGORIES}, "gemm": 99, "trmm": 1})
    assert not bad.matches
    assert set(bad.mismatches) == {"gemm", "trmm"}


# --- Measured ledgers vs. predictors (exact integer agreement) ---


def test_measured_rscholqr_ledger_matches_prediction():
    a, _ = generate(MatrixSpec(300, 10, 6.0, seed=0))
    ledger = FlopLedger()
    res = rs_chol_qr(a, ledger=ledger)
    assert res.success
    counts = rscholqr_counts(300, 10, res.profile)
    assert ledger_report(ledger, counts).matches


def test_measured_rscholqr_ledger_matches_prediction_with_shifts():
    # An exact zero column forces a breakdown and one shifted retry in
    # every iteration, which is the closed form's pessimistic profile.
    block = with_zero_columns(to_dense_block(generate(MatrixSpec(300, 10, 2.0, seed=1))[0]), [4])
    a = DenseVectorArray.from_numpy(block)
    ledger = FlopLedger()
    res = rs_chol_qr(a, ledger=ledger)
    assert not res.success
    assert res.profile == IterationProfile(10, (1,) * 10)
    counts = rscholqr_counts(300, 10, res.profile)
    assert ledger.as_dict() == counts
    assert ledger.total() == predict_rscholqr(300, 10, 10)


def test_measured_update_ledger_matches_prediction():
    basis, _ = generate(MatrixSpec(400, 6, 1.0, seed=2))
    base = rs_chol_qr(basis)
    incoming, _ = generate(MatrixSpec(400, 3, 2.0, seed=3))
    ledger = FlopLedger()
    res = chol_qr_update(base.q, base.r, incoming, ledger=ledger)
    assert res.success
    counts = update_counts(400, 6, 3, res.profile)
    assert ledger_report(ledger, counts).matches


def test_measured_panel_ledger_matches_prediction():
    a, _ = generate(MatrixSpec(300, 10, 8.0, seed=4))
    ledger = FlopLedger()
    res = pn_chol_qr(a, 3, ledger=ledger)
    assert res.success
    counts = panel_counts(300, panel_widths(10, 3), res.panel_profiles)
    assert ledger_report(ledger, counts).matches


def test_charges_are_backend_independent():
    ledgers = []
    for backend in ("dense", "list"):
        a, _ = generate(MatrixSpec(200, 8, 3.0, seed=5), backend=backend)
        ledger = FlopLedger()
        rs_chol_qr(a, ledger=ledger)
        ledgers.append(ledger.as_dict())
    assert ledgers[0] == ledgers[1]
