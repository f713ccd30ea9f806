"""Shared helpers for the test suite.

Pure functions only; tests import them with `from conftest import ...`.
"""

from __future__ import annotations

import numpy as np

from cholqr import DenseVectorArray, ListVectorArray, MatrixSpec, generate, to_dense_block


def generated_block(m, n, log10_cond, seed=0):
    """Dense block of a generated test matrix."""
    array, _ = generate(MatrixSpec(m, n, log10_cond, seed=seed))
    return to_dense_block(array)


def backend_pair(block):
    """The same block in both backends."""
    return DenseVectorArray.from_numpy(block), ListVectorArray.from_numpy(block)


def with_zero_columns(block, cols):
    """Copy of a block with the named columns set to exact zero."""
    out = np.array(block, dtype=float, copy=True)
    out[:, list(cols)] = 0.0
    return out
