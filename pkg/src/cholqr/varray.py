"""Tall matrices behind a columns-only interface.

An array here is an ordered collection of length-m columns from a common
space.  Algorithms written against this interface can form Gramians, linear
combinations, and columnwise updates, but they can never read a row or an
individual entry; that keeps them valid for column stores where such a query
would be meaningless or expensive.

Two backends are provided: `DenseVectorArray` keeps all columns in one
contiguous block and uses block products, `ListVectorArray` keeps each column
as its own vector and works strictly column-pairwise (every Gramian entry is
one inner product).  Both satisfy the same contracts; they differ in speed,
not results, beyond floating-point reassociation.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class VectorSpace:
    """The common habitat of an array's columns: R^dim."""

    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("space dimension must be >= 1")


def _as_index_list(indices, ncols, who):
    idx = [int(i) for i in indices]
    seen = set()
    for i in idx:
        if not 0 <= i < ncols:
            raise IndexError(f"{who}: column index {i} out of range for {ncols} columns")
        if i in seen:
            raise ValueError(f"{who}: duplicate column index {i}")
        seen.add(i)
    return idx


class VectorArray(ABC):
    """Ordered columns from a common space; no row or entry access."""

    space: VectorSpace

    @property
    @abstractmethod
    def ncols(self):
        """Number of columns currently held."""

    @abstractmethod
    def copy(self, indices=None):
        """New independent array holding all columns, or the named subset
        in the given order."""

    @abstractmethod
    def append(self, other):
        """Copy other's columns after this array's existing columns."""

    @abstractmethod
    def gramian(self, other=None):
        """Inner-product matrix of this array's columns against other's.

        With other omitted, returns the self-Gramian, symmetrized as
        (X + X^T)/2 so downstream factorizations see a bit-symmetric input.
        """

    @abstractmethod
    def lincomb(self, coeffs):
        """New array whose column j is sum_i coeffs[i, j] * (column i)."""

    @abstractmethod
    def axpy(self, alpha, other):
        """In place: column j += alpha * other's column j."""

    @abstractmethod
    def remove_columns(self, indices):
        """Delete the named columns, preserving the order of the rest."""

    def _check_space(self, other):
        if self.space != other.space:
            raise ValueError(
                f"space mismatch: dim {self.space.dim} vs {other.space.dim}"
            )
        if type(self) is not type(other):
            raise TypeError(
                f"backend mismatch: {type(self).__name__} vs {type(other).__name__}"
            )

    def __len__(self):
        return self.ncols

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.space.dim}, ncols={self.ncols})"


class DenseVectorArray(VectorArray):
    """Backend holding the columns in one m x k float64 block."""

    def __init__(self, data, space=None):
        data = np.array(data, dtype=float, copy=True, order="F")
        if data.ndim != 2:
            raise ValueError("need a 2-d block of column vectors")
        if space is None:
            space = VectorSpace(data.shape[0])
        elif space.dim != data.shape[0]:
            raise ValueError("block height does not match the space dimension")
        self.space = space
        self._data = data

    @classmethod
    def zeros(cls, space, k):
        if k < 0:
            raise ValueError("column count must be >= 0")
        return cls(np.zeros((space.dim, k), order="F"), space)

    @classmethod
    def from_numpy(cls, block):
        return cls(block)

    def to_numpy(self):
        """Copy of the full block.

        Escape hatch for file I/O and dense test oracles; not part of the
        columns-only interface the algorithms use.
        """
        return self._data.copy()

    @property
    def ncols(self):
        return self._data.shape[1]

    def copy(self, indices=None):
        if indices is None:
            return DenseVectorArray(self._data, self.space)
        idx = _as_index_list(indices, self.ncols, "copy")
        return DenseVectorArray(self._data[:, idx], self.space)

    def append(self, other):
        self._check_space(other)
        self._data = np.concatenate([self._data, other._data], axis=1)
        self._data = np.asfortranarray(self._data)

    def gramian(self, other=None):
        if other is None:
            g = self._data.T @ self._data
            return (g + g.T) / 2.0
        self._check_space(other)
        return self._data.T @ other._data

    def lincomb(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.ndim != 2 or coeffs.shape[0] != self.ncols:
            raise ValueError(
                f"coefficient matrix needs {self.ncols} rows, got shape {coeffs.shape}"
            )
        return DenseVectorArray(self._data @ coeffs, self.space)

    def axpy(self, alpha, other):
        self._check_space(other)
        if other.ncols != self.ncols:
            raise ValueError(
                f"column count mismatch: {self.ncols} vs {other.ncols}"
            )
        self._data += alpha * other._data

    def remove_columns(self, indices):
        idx = _as_index_list(indices, self.ncols, "remove_columns")
        keep = [j for j in range(self.ncols) if j not in set(idx)]
        self._data = np.asfortranarray(self._data[:, keep])

    def _iter_columns(self):
        for j in range(self.ncols):
            yield self._data[:, j]


class ListVectorArray(VectorArray):
    """Backend holding each column as its own vector.

    All operations are column-pairwise: a Gramian entry is one inner product,
    a linear combination accumulates scaled columns one at a time.  The
    self-Gramian computes the lower triangle only and mirrors it.
    """

    def __init__(self, vectors, space):
        self.space = space
        self._vectors = []
        for v in vectors:
            v = np.array(v, dtype=float, copy=True).reshape(-1)
            if v.shape[0] != space.dim:
                raise ValueError("column length does not match the space dimension")
            self._vectors.append(v)

    @classmethod
    def zeros(cls, space, k):
        if k < 0:
            raise ValueError("column count must be >= 0")
        return cls([np.zeros(space.dim) for _ in range(k)], space)

    @classmethod
    def from_numpy(cls, block):
        block = np.asarray(block, dtype=float)
        if block.ndim != 2:
            raise ValueError("need a 2-d block of column vectors")
        space = VectorSpace(block.shape[0])
        return cls([block[:, j] for j in range(block.shape[1])], space)

    @property
    def ncols(self):
        return len(self._vectors)

    def copy(self, indices=None):
        if indices is None:
            return ListVectorArray(self._vectors, self.space)
        idx = _as_index_list(indices, self.ncols, "copy")
        return ListVectorArray([self._vectors[i] for i in idx], self.space)

    def append(self, other):
        self._check_space(other)
        self._vectors.extend(v.copy() for v in other._vectors)

    def gramian(self, other=None):
        k = self.ncols
        if other is None:
            g = np.zeros((k, k))
            for i in range(k):
                vi = self._vectors[i]
                for j in range(i + 1):
                    g[i, j] = vi @ self._vectors[j]
                    g[j, i] = g[i, j]
            return g
        self._check_space(other)
        g = np.zeros((k, other.ncols))
        for i in range(k):
            vi = self._vectors[i]
            for j in range(other.ncols):
                g[i, j] = vi @ other._vectors[j]
        return g

    def lincomb(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.ndim != 2 or coeffs.shape[0] != self.ncols:
            raise ValueError(
                f"coefficient matrix needs {self.ncols} rows, got shape {coeffs.shape}"
            )
        out = []
        for j in range(coeffs.shape[1]):
            acc = np.zeros(self.space.dim)
            for i, v in enumerate(self._vectors):
                c = coeffs[i, j]
                if c != 0.0:
                    acc += c * v
            out.append(acc)
        return ListVectorArray(out, self.space)

    def axpy(self, alpha, other):
        self._check_space(other)
        if other.ncols != self.ncols:
            raise ValueError(
                f"column count mismatch: {self.ncols} vs {other.ncols}"
            )
        for v, w in zip(self._vectors, other._vectors):
            v += alpha * w

    def remove_columns(self, indices):
        idx = set(_as_index_list(indices, self.ncols, "remove_columns"))
        self._vectors = [v for j, v in enumerate(self._vectors) if j not in idx]

    def _iter_columns(self):
        yield from self._vectors


BACKENDS = {"dense": DenseVectorArray, "list": ListVectorArray}


def backend_class(name):
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"unknown backend {name!r}; expected one of {sorted(BACKENDS)}"
        ) from None


def to_dense_block(array):
    """Materialize any backend as an m x k float64 block.

    Escape hatch for file I/O and dense oracles, mirroring
    DenseVectorArray.to_numpy; not part of the columns-only interface the
    algorithms use.
    """
    cols = list(array._iter_columns())
    if not cols:
        return np.zeros((array.space.dim, 0))
    return np.column_stack(cols).astype(float)


_MM_HEADER = "%%MatrixMarket matrix array real general"


def save_matrix_market(array, path):
    """Write an array (either backend) as a Matrix Market dense array file.

    Values are written column by column in column-major order, using
    shortest round-trip decimal representations so a rewrite of the same
    array is byte-identical.
    """
    with open(path, "w") as fh:
        fh.write(_MM_HEADER + "\n")
        fh.write(f"{array.space.dim} {array.ncols}\n")
        for col in array._iter_columns():
            for v in col:
                fh.write(repr(float(v)) + "\n")


def load_matrix_market(path, backend="dense"):
    """Read a Matrix Market dense array file into the chosen backend."""
    cls = backend_class(backend)
    with open(path) as fh:
        header = fh.readline().strip()
        fields = header.lower().split()
        if fields[:1] != ["%%matrixmarket"] or fields[1:] != [
            "matrix",
            "array",
            "real",
            "general",
        ]:
            raise ValueError(
                f"unsupported Matrix Market header (need dense real general): {header!r}"
            )
        size = None
        values = []
        for line in fh:
            line = line.strip()
            if not line or line.startswith("%"):
                continue
            if size is None:
                parts = line.split()
                if len(parts) != 2:
                    raise ValueError(f"malformed size line: {line!r}")
                size = (int(parts[0]), int(parts[1]))
                continue
            values.append(float(line))
    if size is None:
        raise ValueError("missing size line")
    m, k = size
    if len(values) != m * k:
        raise ValueError(f"expected {m * k} values, found {len(values)}")
    block = np.array(values).reshape((m, k), order="F")
    return cls.from_numpy(block)
