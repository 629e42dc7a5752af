"""Compressed sparse row storage, Matrix Market I/O, products and lp norms.

Dense matrices are plain row-major ``numpy.ndarray`` objects of shape
``(rows, cols)``; only the sparse input ``A`` gets its own type.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "SparseMatrix",
    "MatrixMarketError",
    "load_matrix_market",
    "save_matrix_market",
    "load_dense_array",
    "save_dense_array",
    "load_vector",
    "save_vector",
    "spmm",
    "elementwise_lp_norm",
    "row_lp_norms",
    "lp_norm",
]


class MatrixMarketError(ValueError):
    def __init__(self, msg, line=None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Row-compressed ``n x d`` matrix.

    Column indices are strictly increasing within each row and every stored
    value is finite and nonzero.  Use :meth:`from_coo` to build one from
    unordered triplets.
    """

    n: int
    d: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        rp, ci, v = self.row_ptr, self.col_idx, self.values
        if rp.shape != (self.n + 1,) or rp[0] != 0 or np.any(np.diff(rp) < 0):
            raise ValueError("row_ptr must have length n+1, start at 0 and be nondecreasing")
        if rp[-1] != ci.size or ci.size != v.size:
            raise ValueError("row_ptr[n] must equal nnz")
        if ci.size:
            if ci.min() < 0 or ci.max() >= self.d:
                raise ValueError("column index out of range")
            rows = np.repeat(np.arange(self.n), np.diff(rp))
            same_row = rows[1:] == rows[:-1]
            if np.any(same_row & (np.diff(ci) <= 0)):
                raise ValueError("column indices must be strictly increasing within a row")
        if not np.all(np.isfinite(v)) or np.any(v == 0):
            raise ValueError("stored values must be finite and nonzero")
        for a in (rp, ci, v):
            a.setflags(write=False)

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.d)

    @classmethod
    def from_coo(cls, n, d, rows, cols, vals) -> "SparseMatrix":
        """Build from triplets; duplicates are summed and exact zeros dropped."""
        m = sp.coo_matrix(
            (np.asarray(vals, dtype=float), (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
            shape=(n, d),
        ).tocsr()
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()
        return cls._from_csr(m)

    @classmethod
    def from_dense(cls, a) -> "SparseMatrix":
        m = sp.csr_matrix(np.asarray(a, dtype=float))
        m.eliminate_zeros()
        m.sort_indices()
        return cls._from_csr(m)

    @classmethod
    def from_scipy(cls, m) -> "SparseMatrix":
        m = sp.csr_matrix(m, dtype=float, copy=True)
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()
        return cls._from_csr(m)

    @classmethod
    def _from_csr(cls, m) -> "SparseMatrix":
        n, d = m.shape
        return cls(
            n,
            d,
            m.indptr.astype(np.int64),
            m.indices.astype(np.int64),
            m.data.astype(float),
        )

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.values, self.col_idx, self.row_ptr), shape=self.shape)

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def row_indices(self) -> np.ndarray:
        """Row index of every stored entry (the COO row array)."""
        return np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.row_ptr))

    def rows(self, idx) -> "SparseMatrix":
        return SparseMatrix.from_scipy(self.to_scipy()[np.asarray(idx)])

    def hstack_column(self, b) -> "SparseMatrix":
        """The ``n x (d+1)`` matrix ``[A b]``."""
        b = np.asarray(b, dtype=float).reshape(-1, 1)
        return SparseMatrix.from_scipy(sp.hstack([self.to_scipy(), sp.csr_matrix(b)], format="csr"))

    def __matmul__(self, x):
        return spmm(self, x)


def _as_dense_or_sparse(A):
    if isinstance(A, SparseMatrix):
        return A.values, A.row_indices()
    a = np.asarray(A, dtype=float)
    if a.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    return a, None


def spmm(A: SparseMatrix, X) -> np.ndarray:
    """Exact product ``A @ X`` in ``O(nnz(A) * X.cols)``."""
    X = np.asarray(X, dtype=float)
    vec = X.ndim == 1
    X2 = X.reshape(-1, 1) if vec else X
    if X2.shape[0] != A.d:
        raise ValueError(f"dimension mismatch: A is {A.shape}, X has {X2.shape[0]} rows")
    out = A.to_scipy() @ X2
    return out.ravel() if vec else np.asarray(out)


def _check_p(p):
    if not p >= 1:
        raise ValueError(f"p={p} must be >= 1")


def lp_norm(x, p: float) -> float:
    """Vector lp norm; ``p = inf`` gives max-abs."""
    x = np.abs(np.asarray(x, dtype=float).ravel())
    if np.isinf(p):
        return float(x.max(initial=0.0))
    if p == 1:
        return float(x.sum())
    if p == 2:
        return float(np.sqrt(np.dot(x, x)))
    return float(np.sum(x**p) ** (1.0 / p))


def row_lp_norms(A, p: float) -> np.ndarray:
    """``||a_j||_p ** p`` for every row ``j`` (note: the p-th power)."""
    _check_p(p)
    vals, rows = _as_dense_or_sparse(A)
    if rows is None:
        return np.sum(np.abs(vals) ** p, axis=1)
    # bincount accumulates left to right, matching the elementwise total below
    return np.bincount(rows, weights=np.abs(vals) ** p, minlength=A.n)


def elementwise_lp_norm(A, p: float) -> float:
    """``(sum_ij |a_ij|**p) ** (1/p)``."""
    _check_p(p)
    return float(np.sum(row_lp_norms(A, p)) ** (1.0 / p))


# --- Matrix Market -----------------------------------------------------------

_BANNER = "%%matrixmarket"


def _read_header(lines):
    if not lines:
        raise MatrixMarketError("empty file", 1)
    head = lines[0].strip().split()
    if len(head) != 5 or head[0].lower() != _BANNER or head[1].lower() != "matrix":
        raise MatrixMarketError("malformed banner", 1)
    fmt, field, sym = (h.lower() for h in head[2:])
    if field not in ("real", "double", "integer"):
        raise MatrixMarketError(f"unsupported field '{field}', expected real", 1)
    if sym != "general":
        raise MatrixMarketError(f"unsupported symmetry '{sym}', expected general", 1)
    i = 1
    while i < len(lines) and (not lines[i].strip() or lines[i].lstrip().startswith("%")):
        i += 1
    if i == len(lines):
        raise MatrixMarketError("missing size line", i)
    return fmt, i


def _ints(tokens, lineno, count):
    if len(tokens) != count:
        raise MatrixMarketError(f"expected {count} integers", lineno)
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise MatrixMarketError("non-integer size or index", lineno) from None


def _float(tok, lineno):
    try:
        v = float(tok)
    except ValueError:
        raise MatrixMarketError(f"non-real value '{tok}'", lineno) from None
    if not np.isfinite(v):
        raise MatrixMarketError(f"non-finite value '{tok}'", lineno)
    return v


def load_matrix_market(path: str | os.PathLike) -> SparseMatrix:
    """Read a real, general, coordinate-format Matrix Market file.

    Indices in the file are 1-based; duplicate entries are summed.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    fmt, i = _read_header(lines)
    if fmt != "coordinate":
        raise MatrixMarketError(f"expected coordinate format, got '{fmt}'", 1)
    n, d, nnz = _ints(lines[i].split(), i + 1, 3)
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz)
    k = 0
    for lineno in range(i + 2, len(lines) + 1):
        line = lines[lineno - 1].strip()
        if not line or line.startswith("%"):
            continue
        tok = line.split()
        if len(tok) != 3:
            raise MatrixMarketError("expected 'row col value'", lineno)
        if k == nnz:
            raise MatrixMarketError("more entries than declared", lineno)
        r, c = _ints(tok[:2], lineno, 2)
        if not (1 <= r <= n and 1 <= c <= d):
            raise MatrixMarketError(f"index ({r}, {c}) out of range for {n}x{d}", lineno)
        rows[k], cols[k], vals[k] = r - 1, c - 1, _float(tok[2], lineno)
        k += 1
    if k != nnz:
        raise MatrixMarketError(f"declared {nnz} entries, found {k}", len(lines))
    return SparseMatrix.from_coo(n, d, rows, cols, vals)


def save_matrix_market(path: str | os.PathLike, A: SparseMatrix) -> None:
    rows = A.row_indices()
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        fh.write(f"{A.n} {A.d} {A.nnz}\n")
        for r, c, v in zip(rows, A.col_idx, A.values):
            fh.write(f"{r + 1} {c + 1} {float(v)!r}\n")


def load_dense_array(path: str | os.PathLike) -> np.ndarray:
    """Read a Matrix Market ``array`` file (column-major values)."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    fmt, i = _read_header(lines)
    if fmt != "array":
        raise MatrixMarketError(f"expected array format, got '{fmt}'", 1)
    m, n = _ints(lines[i].split(), i + 1, 2)
    vals = []
    for lineno in range(i + 2, len(lines) + 1):
        line = lines[lineno - 1].strip()
        if not line or line.startswith("%"):
            continue
        vals.append(_float(line, lineno))
    if len(vals) != m * n:
        raise MatrixMarketError(f"declared {m * n} values, found {len(vals)}", len(lines))
    return np.array(vals).reshape(n, m).T.copy()


def save_dense_array(path: str | os.PathLike, X) -> None:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix array real general\n")
        fh.write(f"{X.shape[0]} {X.shape[1]}\n")
        for v in X.T.ravel():
            fh.write(f"{float(v)!r}\n")


def load_vector(path: str | os.PathLike) -> np.ndarray:
    """Whitespace-separated reals, any line layout."""
    with open(path) as fh:
        toks = fh.read().split()
    return np.array([_float(t, None) for t in toks])


def save_vector(path: str | os.PathLike, b) -> None:
    np.savetxt(path, np.asarray(b, dtype=float).ravel(), fmt="%.17g")
