"""Reproducible tall test matrices with a prescribed condition number.

A test matrix is A = U * diag(sigma) * V with U (m x n) and V (n x n) drawn
Haar-uniform from the orthogonal group and singular values log-equidistant
between 10^log10_cond and 1, descending.  The RNG stream is derived from the
shape and the condition exponent as well as the user seed, so reusing a seed
across different problems still gives independent matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .varray import backend_class

_MASK64 = (1 << 64) - 1

#: Human-readable description of the seed derivation, recorded in metadata
#: sidecars so data files are self-describing.
SEED_MIXING = (
    "splitmix64 absorbed over (m, n, round(10*log10_cond)), XORed with seed"
)


def _splitmix64(state):
    z = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class MatrixSpec:
    m: int
    n: int
    log10_cond: float
    seed: int = 0

    def __post_init__(self):
        if not self.m >= self.n >= 1:
            raise ValueError(f"need m >= n >= 1, got m={self.m}, n={self.n}")
        if self.log10_cond < 0:
            raise ValueError("log10_cond must be >= 0")
        if not 0 <= self.seed <= _MASK64:
            raise ValueError("seed must fit in 64 bits")


def effective_seed(spec):
    """64-bit RNG seed mixed from the MatrixSpec fields (see SEED_MIXING)."""
    acc = 0
    for v in (spec.m, spec.n, int(round(10 * spec.log10_cond))):
        acc = _splitmix64((acc + v) & _MASK64)
    return (acc ^ spec.seed) & _MASK64


def random_orthogonal(rows, cols, rng):
    """Haar-distributed matrix with orthonormal columns.

    QR of a standard Gaussian block, with the factor's sign fixed so the
    triangular part has a positive diagonal (required for Haar uniformity).
    """
    if rows < cols:
        raise ValueError(f"need rows >= cols, got {rows} < {cols}")
    g = rng.standard_normal((rows, cols))
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def singular_values(n, log10_cond):
    """Log-equidistant singular values from 10^log10_cond down to 1.

    For n = 1 the range degenerates to [1].
    """
    if n == 1:
        return np.ones(1)
    exponents = np.linspace(0.0, log10_cond, n)[::-1]
    return 10.0 ** exponents


def generate(spec, backend="dense"):
    """Generate the test matrix for a spec.

    Returns the array in the requested backend together with the singular
    values it was built from (largest first).
    """
    cls = backend_class(backend)
    rng = np.random.default_rng(effective_seed(spec))
    sigma = singular_values(spec.n, spec.log10_cond)
    u = random_orthogonal(spec.m, spec.n, rng)
    v = random_orthogonal(spec.n, spec.n, rng)
    a = (u * sigma) @ v
    return cls.from_numpy(a), sigma
