"""Sparse integer matrices, SMS I/O, modular reductions and blackbox products.

The SMS text format (as used by the online Sparse Integer Matrix Collection):

    ROWS COLS M
    i j v          # 1-based indices, one nonzero per line
    ...
    0 0 0          # terminator

Entries are signed 64-bit; anything wider is rejected at parse time.
Matrices are immutable after construction and safe to share across workers.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .ffield import FftPrime

INT63_MAX = (1 << 62) - 1  # |value| bound so products fit double words


class SmsParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DimensionError(ValueError):
    """Operand shapes do not match."""


@dataclass(frozen=True, eq=False)
class SparseIntMatrix:
    """Coordinate-format integer matrix with unique, nonzero entries."""

    rows: int
    cols: int
    row_idx: np.ndarray  # 0-based, int64
    col_idx: np.ndarray
    values: np.ndarray

    @property
    def nnz(self) -> int:
        return int(self.values.shape[0])

    @classmethod
    def from_triples(cls, rows, cols, triples) -> "SparseIntMatrix":
        """Build from 0-based (i, j, v) triples, validating the invariants."""
        if rows < 0 or cols < 0:
            raise ValueError("negative dimension")
        tri = list(triples)
        if not tri:
            empty = np.empty(0, dtype=np.int64)
            return cls(rows, cols, empty, empty.copy(), empty.copy())
        ri = np.array([t[0] for t in tri], dtype=np.int64)
        ci = np.array([t[1] for t in tri], dtype=np.int64)
        vv = np.array([t[2] for t in tri], dtype=np.int64)
        m = cls(rows, cols, ri, ci, vv)
        m._validate()
        return m._sorted()

    def _validate(self):
        if self.nnz == 0:
            return
        if self.row_idx.min() < 0 or self.row_idx.max() >= self.rows:
            raise ValueError("row index out of bounds")
        if self.col_idx.min() < 0 or self.col_idx.max() >= self.cols:
            raise ValueError("column index out of bounds")
        if np.any(self.values == 0):
            raise ValueError("explicitly stored zero")
        if np.any(np.abs(self.values) > INT63_MAX):
            raise ValueError("entry exceeds 63 bits")
        lin = self.row_idx * self.cols + self.col_idx
        if np.unique(lin).shape[0] != lin.shape[0]:
            raise ValueError("duplicate (row, col) pair")

    def _sorted(self) -> "SparseIntMatrix":
        order = np.lexsort((self.col_idx, self.row_idx))
        return SparseIntMatrix(
            self.rows,
            self.cols,
            self.row_idx[order],
            self.col_idx[order],
            self.values[order],
        )

    def transpose(self) -> "SparseIntMatrix":
        return SparseIntMatrix(
            self.cols, self.rows, self.col_idx.copy(), self.row_idx.copy(),
            self.values.copy(),
        )._sorted()

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.rows, self.cols), dtype=np.int64)
        out[self.row_idx, self.col_idx] = self.values
        return out

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.values, (self.row_idx, self.col_idx)),
            shape=(self.rows, self.cols),
            dtype=np.int64,
        )

    def max_abs(self) -> int:
        return int(np.abs(self.values).max()) if self.nnz else 0

    def density(self) -> float:
        cells = self.rows * self.cols
        return self.nnz / cells if cells else 0.0

    def __eq__(self, other):
        return (
            isinstance(other, SparseIntMatrix)
            and self.rows == other.rows
            and self.cols == other.cols
            and np.array_equal(self.row_idx, other.row_idx)
            and np.array_equal(self.col_idx, other.col_idx)
            and np.array_equal(self.values, other.values)
        )

    def canonical_bytes(self) -> bytes:
        buf = io.BytesIO()
        write_sms(self, buf)
        return buf.getvalue()

    def digest(self) -> int:
        """64-bit FNV-1a over the canonical SMS byte stream."""
        h = 0xCBF29CE484222325
        for b in self.canonical_bytes():
            h ^= b
            h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
        return h


def read_sms(stream) -> SparseIntMatrix:
    """Parse an SMS byte/text stream; failures name the offending line."""
    if isinstance(stream, (str, bytes)):
        raw = stream
    else:
        raw = stream.read()
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("ascii")
        except UnicodeDecodeError as e:
            raise SmsParseError(f"not ASCII: {e}") from None
    lines = raw.splitlines()
    pos = 0
    while pos < len(lines) and not lines[pos].strip():
        pos += 1
    if pos >= len(lines):
        raise SmsParseError("empty stream", line=1)
    head = lines[pos].split()
    if len(head) != 3 or head[2] != "M":
        raise SmsParseError(f"bad header {lines[pos]!r}", line=pos + 1)
    try:
        rows, cols = int(head[0]), int(head[1])
    except ValueError:
        raise SmsParseError(f"bad header {lines[pos]!r}", line=pos + 1) from None
    if rows < 0 or cols < 0:
        raise SmsParseError("negative dimension in header", line=pos + 1)

    ri, ci, vv = [], [], []
    terminated = False
    for n in range(pos + 1, len(lines)):
        text = lines[n].strip()
        if not text:
            continue
        parts = text.split()
        if len(parts) != 3:
            raise SmsParseError(f"expected 'i j v', got {text!r}", line=n + 1)
        try:
            i, j, v = int(parts[0]), int(parts[1]), int(parts[2])
        except ValueError:
            raise SmsParseError(f"non-integer entry {text!r}", line=n + 1) from None
        if i == 0 and j == 0 and v == 0:
            terminated = True
            break
        if not (1 <= i <= rows) or not (1 <= j <= cols):
            raise SmsParseError(f"index ({i}, {j}) out of range", line=n + 1)
        if v == 0:
            raise SmsParseError("explicit zero entry", line=n + 1)
        if abs(v) > INT63_MAX:
            raise SmsParseError(f"value {v} exceeds 63 bits", line=n + 1)
        ri.append(i - 1)
        ci.append(j - 1)
        vv.append(v)
    if not terminated:
        raise SmsParseError("missing '0 0 0' terminator", line=len(lines))
    m = SparseIntMatrix(
        rows,
        cols,
        np.array(ri, dtype=np.int64),
        np.array(ci, dtype=np.int64),
        np.array(vv, dtype=np.int64),
    )
    try:
        m._validate()
    except ValueError as e:
        raise SmsParseError(str(e)) from None
    return m._sorted()


def read_sms_file(path) -> SparseIntMatrix:
    import gzip

    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rb") as fh:
        return read_sms(fh)


def write_sms(m: SparseIntMatrix, stream) -> None:
    """Emit SMS text, entries in row-major order (byte-stable round trip)."""
    out = [f"{m.rows} {m.cols} M\n"]
    mm = m._sorted()
    for i, j, v in zip(mm.row_idx, mm.col_idx, mm.values):
        out.append(f"{i + 1} {j + 1} {v}\n")
    out.append("0 0 0\n")
    data = "".join(out)
    try:
        stream.write(data.encode("ascii"))
    except TypeError:
        stream.write(data)


def write_sms_file(m: SparseIntMatrix, path) -> None:
    with open(path, "wb") as fh:
        write_sms(m, fh)


# ---------------------------------------------------------------------------
# modular views

class SparseModMatrix:
    """CSR reduction of an integer matrix mod an FFT prime.

    apply/apply_transpose count their invocations (checkpoint-overhead
    accounting relies on this).
    """

    def __init__(self, csr: sp.csr_matrix, prime: FftPrime):
        self.prime = prime
        self.csr = csr
        self.rows, self.cols = csr.shape
        self._csr_t = None
        self.n_apply = 0
        row_nnz = np.diff(csr.indptr)
        max_row = int(row_nnz.max()) if row_nnz.size else 0
        # exactness condition for int64 accumulation in scipy's spmv
        self._int64_safe = max_row * (prime.p - 1) ** 2 < (1 << 63)

    @property
    def nnz(self) -> int:
        return int(self.csr.nnz)

    @property
    def shape(self):
        return (self.rows, self.cols)

    def _transposed(self) -> sp.csr_matrix:
        if self._csr_t is None:
            self._csr_t = self.csr.T.tocsr()
        return self._csr_t

    def apply(self, v: np.ndarray) -> np.ndarray:
        if v.shape[-1] != self.cols:
            raise DimensionError(f"apply: vector of size {v.shape[-1]} vs {self.cols} cols")
        self.n_apply += 1
        return self._mul(self.csr, v)

    def apply_transpose(self, v: np.ndarray) -> np.ndarray:
        if v.shape[-1] != self.rows:
            raise DimensionError(f"apply_transpose: size {v.shape[-1]} vs {self.rows} rows")
        self.n_apply += 1
        return self._mul(self._transposed(), v)

    def _mul(self, mat: sp.csr_matrix, v: np.ndarray) -> np.ndarray:
        p = self.prime.p
        if self._int64_safe:
            return np.asarray(mat @ v) % p
        # wide modulus: exact but slow row walk with Python integers
        out = np.zeros(mat.shape[0], dtype=np.int64)
        indptr, indices, data = mat.indptr, mat.indices, mat.data
        for i in range(mat.shape[0]):
            acc = 0
            for t in range(indptr[i], indptr[i + 1]):
                acc += int(data[t]) * int(v[indices[t]])
            out[i] = acc % p
        return out

    def to_dense(self) -> np.ndarray:
        return np.asarray(self.csr.todense(), dtype=np.int64)


def reduce_mod(m: SparseIntMatrix, f: FftPrime) -> SparseModMatrix:
    """Reduce entries to [0, p); entries that vanish are dropped."""
    vals = m.values % f.p
    keep = vals != 0
    csr = sp.csr_matrix(
        (vals[keep], (m.row_idx[keep], m.col_idx[keep])),
        shape=(m.rows, m.cols),
        dtype=np.int64,
    )
    csr.sum_duplicates()
    return SparseModMatrix(csr, f)


class PreconditionedOperator:
    """Symmetric blackbox D.A^T.A.D with a random invertible diagonal D.

    Square of side cols(A); rank equals rank(A mod p) with high probability.
    Reentrant: apply allocates fresh vectors, shared state is read-only.
    """

    symmetric = True

    def __init__(self, a: SparseModMatrix, diag: np.ndarray, seed: int):
        self.a = a
        self.diag = diag
        self.seed = seed
        self.prime = a.prime
        self.n = a.cols

    def apply(self, v: np.ndarray) -> np.ndarray:
        p = self.prime.p
        w = self.diag * v % p
        w = self.a.apply(w)
        w = self.a.apply_transpose(w)
        return self.diag * w % p

    apply_transpose = apply

    @property
    def mv_count(self) -> int:
        return self.a.n_apply


def precondition(m: SparseModMatrix, seed: int) -> PreconditionedOperator:
    rng = np.random.default_rng(seed)
    diag = rng.integers(1, m.prime.p, size=m.cols, dtype=np.int64)
    return PreconditionedOperator(m, diag, seed)


class DenseOperator:
    """Small dense matrix as a blackbox; test plumbing and base cases."""

    def __init__(self, dense: np.ndarray, prime: FftPrime):
        self.dense = np.asarray(dense, dtype=np.int64) % prime.p
        self.prime = prime
        if self.dense.shape[0] != self.dense.shape[1]:
            raise DimensionError("DenseOperator expects a square matrix")
        self.n = self.dense.shape[0]
        self.symmetric = bool(np.array_equal(self.dense, self.dense.T))

    def apply(self, v):
        return self.dense @ v % self.prime.p

    def apply_transpose(self, v):
        return self.dense.T @ v % self.prime.p
