"""Polynomial matrices over a prime field.

Carries the minimal matrix generator machinery: fast multiplication by NTT
(CRT over FFT primes when the field lacks roots of unity), order bases
(sigma-bases) computed by the divide-and-conquer PM-Basis scheme over an
iterative M-Basis base case, and determinant degree/co-degree analysis by
massively parallel evaluation/interpolation.

A generator F returned by min_matrix_generator is in forward form: each row
is the reversal of a sigma-basis row at its annihilation threshold, so

    sum_i coeff_i(F) . S_(k+i) = 0   for every k >= 0,

i.e. reading the coefficients against descending powers, the recurrence
sum_i F_i S_(t-i) = 0 holds for all t >= deg F.  rank extraction only needs
deg det F - codeg det F, which the per-row reversal leaves unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ffield import CrtBasis, FftPrime, NUMPY_MOD_BITS, crt_basis_for, crt_combine_array, ntt

M_BASIS_THRESHOLD = 16


class PolyMatError(ValueError):
    pass


class DetZeroError(PolyMatError):
    """The polynomial matrix is singular (det identically zero)."""


class FieldTooSmallError(PolyMatError):
    """Not enough evaluation points; retry with a larger prime."""


class GeneratorLengthError(PolyMatError):
    def __init__(self, have: int, need: int):
        self.have = have
        self.need = need
        super().__init__(f"sequence holds {have} terms, generator needs {need}")


def _matmul_mod(x: np.ndarray, y: np.ndarray, p: int) -> np.ndarray:
    """Batched integer matmul mod p, chunked so int64 never overflows."""
    inner = x.shape[-1]
    chunk = max(1, ((1 << 63) - 1) // max((p - 1) ** 2, 1))
    if inner <= chunk:
        return np.matmul(x, y) % p
    acc = np.zeros(np.broadcast_shapes(x.shape[:-2], y.shape[:-2]) + (x.shape[-2], y.shape[-1]),
                   dtype=np.int64)
    for lo in range(0, inner, chunk):
        hi = min(inner, lo + chunk)
        acc = (acc + np.matmul(x[..., :, lo:hi], y[..., lo:hi, :])) % p
    return acc


class PolyMatrix:
    """Dense coefficient stack: coeffs[k] is the s_rows x s_cols matrix of x^k."""

    def __init__(self, coeffs: np.ndarray, prime: FftPrime, trim: bool = True):
        coeffs = np.asarray(coeffs, dtype=np.int64)
        if coeffs.ndim != 3:
            raise PolyMatError("coeffs must be (degree+1, rows, cols)")
        self.prime = prime
        self.coeffs = coeffs % prime.p
        if trim:
            self._trim()

    def _trim(self):
        c = self.coeffs
        last = c.shape[0] - 1
        while last > 0 and not c[last].any():
            last -= 1
        self.coeffs = np.ascontiguousarray(c[: last + 1])

    # -- constructors -------------------------------------------------
    @classmethod
    def zeros(cls, rows: int, cols: int, prime: FftPrime) -> "PolyMatrix":
        return cls(np.zeros((1, rows, cols), dtype=np.int64), prime, trim=False)

    @classmethod
    def identity(cls, n: int, prime: FftPrime) -> "PolyMatrix":
        c = np.zeros((1, n, n), dtype=np.int64)
        c[0] = np.eye(n, dtype=np.int64)
        return cls(c, prime, trim=False)

    @classmethod
    def from_scalar_poly(cls, coeffs, prime: FftPrime) -> "PolyMatrix":
        arr = np.asarray(coeffs, dtype=np.int64).reshape(-1, 1, 1)
        return cls(arr, prime)

    # -- structure ----------------------------------------------------
    @property
    def rows(self) -> int:
        return self.coeffs.shape[1]

    @property
    def cols(self) -> int:
        return self.coeffs.shape[2]

    @property
    def degree(self) -> int:
        """Highest stored power; the zero matrix reports degree 0."""
        return self.coeffs.shape[0] - 1

    def is_zero(self) -> bool:
        return not self.coeffs.any()

    def coeff(self, k: int) -> np.ndarray:
        if 0 <= k <= self.degree:
            return self.coeffs[k]
        return np.zeros((self.rows, self.cols), dtype=np.int64)

    def constant_term(self) -> np.ndarray:
        return self.coeffs[0]

    def row_degrees(self) -> list[int]:
        """Per-row degree; -1 for a zero row."""
        out = []
        for r in range(self.rows):
            nz = np.nonzero(self.coeffs[:, r, :].any(axis=1))[0]
            out.append(int(nz[-1]) if nz.size else -1)
        return out

    def leading_row_matrix(self) -> np.ndarray:
        """Row r holds coeff_(rowdeg r) of row r (zero rows stay zero)."""
        lead = np.zeros((self.rows, self.cols), dtype=np.int64)
        for r, d in enumerate(self.row_degrees()):
            if d >= 0:
                lead[r] = self.coeffs[d, r, :]
        return lead

    def submatrix(self, row_idx, col_idx) -> "PolyMatrix":
        return PolyMatrix(self.coeffs[:, row_idx][:, :, col_idx], self.prime)

    def truncate(self, order: int) -> "PolyMatrix":
        """self mod x^order."""
        if order <= 0:
            return PolyMatrix.zeros(self.rows, self.cols, self.prime)
        return PolyMatrix(self.coeffs[:order], self.prime)

    def shift_right(self, amount: int) -> "PolyMatrix":
        """x^(-amount) * self, discarding the low coefficients."""
        if amount > self.degree:
            return PolyMatrix.zeros(self.rows, self.cols, self.prime)
        return PolyMatrix(self.coeffs[amount:], self.prime)

    def evaluate(self, x: int) -> np.ndarray:
        p = self.prime.p
        acc = np.zeros((self.rows, self.cols), dtype=np.int64)
        for k in range(self.degree, -1, -1):
            acc = (acc * (x % p) + self.coeffs[k]) % p
        return acc

    def __add__(self, other: "PolyMatrix") -> "PolyMatrix":
        hi = max(self.degree, other.degree) + 1
        c = np.zeros((hi, self.rows, self.cols), dtype=np.int64)
        c[: self.degree + 1] = self.coeffs
        c[: other.degree + 1] = (c[: other.degree + 1] + other.coeffs) % self.prime.p
        return PolyMatrix(c, self.prime)

    def __eq__(self, other):
        return (
            isinstance(other, PolyMatrix)
            and self.prime.p == other.prime.p
            and self.coeffs.shape == other.coeffs.shape
            and np.array_equal(self.coeffs, other.coeffs)
        )

    def __repr__(self):
        return f"PolyMatrix({self.rows}x{self.cols}, deg {self.degree}, p={self.prime.p})"


@dataclass(frozen=True)
class SequenceSeries:
    """Truncated power series S(x) = sum S_i x^i of a block sequence."""

    terms: np.ndarray  # (order, s, s)
    prime: FftPrime

    @property
    def order(self) -> int:
        return self.terms.shape[0]

    @property
    def s(self) -> int:
        return self.terms.shape[1]


# ---------------------------------------------------------------------------
# multiplication

def _mul_schoolbook(a: PolyMatrix, b: PolyMatrix) -> PolyMatrix:
    p = a.prime.p
    out = np.zeros((a.degree + b.degree + 1, a.rows, b.cols), dtype=np.int64)
    for i in range(a.degree + 1):
        for j in range(b.degree + 1):
            out[i + j] = (out[i + j] + _matmul_mod(a.coeffs[i], b.coeffs[j], p)) % p
    return PolyMatrix(out, a.prime)


def polymat_mul(a: PolyMatrix, b: PolyMatrix) -> PolyMatrix:
    """Exact product; NTT evaluation/interpolation when the field allows,
    CRT over FFT primes otherwise."""
    if a.cols != b.rows:
        raise PolyMatError(f"inner dimensions {a.cols} vs {b.rows}")
    if a.prime.p != b.prime.p:
        raise PolyMatError("mismatched moduli")
    f = a.prime
    if a.degree == 0 or b.degree == 0 or (a.degree + b.degree) < 8:
        return _mul_schoolbook(a, b)
    length = 1
    while length < a.degree + b.degree + 1:
        length *= 2
    if length <= (1 << f.k) and f.p < (1 << NUMPY_MOD_BITS):
        return _mul_ntt(a, b, length)
    return polymat_mul_crt(a, b)


def _mul_ntt(a: PolyMatrix, b: PolyMatrix, length: int) -> PolyMatrix:
    f = a.prime
    fa = np.zeros((a.rows, a.cols, length), dtype=np.int64)
    fb = np.zeros((b.rows, b.cols, length), dtype=np.int64)
    fa[:, :, : a.degree + 1] = np.moveaxis(a.coeffs, 0, 2)
    fb[:, :, : b.degree + 1] = np.moveaxis(b.coeffs, 0, 2)
    va = np.moveaxis(ntt(fa, f), 2, 0)  # (length, rows, cols)
    vb = np.moveaxis(ntt(fb, f), 2, 0)
    vals = _matmul_mod(va, vb, f.p)
    prod = ntt(np.moveaxis(vals, 0, 2), f, inverse=True)
    return PolyMatrix(np.moveaxis(prod, 2, 0), f)


def polymat_mul_crt(a: PolyMatrix, b: PolyMatrix) -> PolyMatrix:
    """Lift to the integers, multiply via enough FFT primes, reduce mod p."""
    if a.cols != b.rows:
        raise PolyMatError(f"inner dimensions {a.cols} vs {b.rows}")
    f = a.prime
    if a.degree == 0 and b.degree == 0:
        return PolyMatrix(
            _matmul_mod(a.coeffs[0].astype(object), b.coeffs[0].astype(object), f.p)
            .astype(np.int64)
            .reshape(1, a.rows, b.cols),
            f,
        )
    bound = a.cols * (min(a.degree, b.degree) + 1) * (f.p - 1) ** 2
    length = 1
    while length < a.degree + b.degree + 1:
        length *= 2
    adicity = max(16, length.bit_length())
    basis = crt_basis_for(2 * bound, min_two_adicity=adicity)
    layers = []
    for q in basis.moduli:
        fa = np.zeros((a.rows, a.cols, length), dtype=np.int64)
        fb = np.zeros((b.rows, b.cols, length), dtype=np.int64)
        fa[:, :, : a.degree + 1] = np.moveaxis(a.coeffs % q.p, 0, 2)
        fb[:, :, : b.degree + 1] = np.moveaxis(b.coeffs % q.p, 0, 2)
        va = np.moveaxis(ntt(fa, q), 2, 0)
        vb = np.moveaxis(ntt(fb, q), 2, 0)
        vals = _matmul_mod(va, vb, q.p)
        prod = ntt(np.moveaxis(vals, 0, 2), q, inverse=True)
        layers.append(np.moveaxis(prod, 2, 0))
    combined = crt_combine_array(np.stack(layers), basis)
    return PolyMatrix((combined % f.p).astype(np.int64), f)


# ---------------------------------------------------------------------------
# order (sigma-) bases

def _m_basis(E: np.ndarray, sigma: int, degs: np.ndarray, prime: FftPrime):
    """Iterative base case; returns (M coeffs, updated shifted row degrees).

    E: (order, m, n) series coefficients. M starts at the identity and after
    step k satisfies M.E = 0 mod x^(k+1).
    """
    p = prime.p
    m = E.shape[1]
    M = np.zeros((sigma + 1, m, m), dtype=np.int64)
    M[0] = np.eye(m, dtype=np.int64)
    deg_m = 0
    d = degs.copy()
    for k in range(sigma):
        lo = max(0, k - E.shape[0] + 1)
        delta = np.zeros((m, E.shape[2]), dtype=np.int64)
        for j in range(lo, min(deg_m, k) + 1):
            delta = (delta + _matmul_mod(M[j], E[k - j], p)) % p
        order = sorted(range(m), key=lambda r: (d[r], r))
        pivots: list[tuple[int, int]] = []
        for r in order:
            for rho, c in pivots:
                if delta[r, c]:
                    f = delta[r, c] * pow(int(delta[rho, c]), -1, p) % p
                    delta[r] = (delta[r] - f * delta[rho]) % p
                    M[: deg_m + 1, r, :] = (
                        M[: deg_m + 1, r, :] - f * M[: deg_m + 1, rho, :]
                    ) % p
            nz = np.nonzero(delta[r])[0]
            if nz.size:
                pivots.append((r, int(nz[0])))
        if pivots:
            rows = [r for r, _ in pivots]
            M[1 : deg_m + 2, rows, :] = M[: deg_m + 1, rows, :]
            M[0, rows, :] = 0
            for r in rows:
                d[r] += 1
            deg_m = min(deg_m + 1, sigma)
    return M[: deg_m + 1], d


def _order_basis(E: np.ndarray, sigma: int, degs: np.ndarray, prime: FftPrime,
                 threshold: int):
    if sigma <= threshold:
        return _m_basis(E, sigma, degs, prime)
    half = (sigma + 1) // 2
    M1, d1 = _order_basis(E[:half], half, degs, prime, threshold)
    pm1 = PolyMatrix(M1, prime)
    pe = PolyMatrix(E[:sigma], prime)
    residue = polymat_mul(pm1, pe)
    E2 = residue.coeffs[half:sigma]
    rest = sigma - half
    if E2.shape[0] < rest:
        E2 = np.concatenate(
            [E2, np.zeros((rest - E2.shape[0],) + E2.shape[1:], dtype=np.int64)]
        )
    M2, d2 = _order_basis(E2, rest, d1, prime, threshold)
    return polymat_mul(PolyMatrix(M2, prime), pm1).coeffs, d2


def _stacked_series(series: SequenceSeries) -> np.ndarray:
    """E(x) = [S(x); -I], shape (order, 2s, s)."""
    order, s, _ = series.terms.shape
    p = series.prime.p
    E = np.zeros((max(order, 1), 2 * s, s), dtype=np.int64)
    E[:order, :s, :] = series.terms % p
    E[0, s:, :] = (p - 1) * np.eye(s, dtype=np.int64) % p
    return E


def pm_basis(series: SequenceSeries, order: int,
             threshold: int = M_BASIS_THRESHOLD) -> PolyMatrix:
    """Minimal order basis M (2s x 2s) with M.[S; -I] = 0 mod x^order."""
    if order > series.order:
        raise PolyMatError(f"order {order} exceeds available {series.order} terms")
    s = series.s
    if order == 0:
        return PolyMatrix.identity(2 * s, series.prime)
    E = _stacked_series(series)[:order]
    degs = np.zeros(2 * s, dtype=np.int64)
    M, _ = _order_basis(E, order, degs, series.prime, threshold)
    return PolyMatrix(M, series.prime)


def _row_poly_degree(block: np.ndarray) -> int:
    """Degree of a (deg+1, width) coefficient slab; -1 if zero."""
    nz = np.nonzero(block.any(axis=1))[0]
    return int(nz[-1]) if nz.size else -1


def min_matrix_generator(seq) -> PolyMatrix:
    """Minimal matrix generator of a block sequence, forward form.

    `seq` provides terms (list/array of s x s matrices), block size s,
    operator side n and the working prime.  A sigma-basis row (v | P) with
    v.S = P mod x^order annihilates the sequence from threshold
    delta = max(deg v, deg P + 1); the s rows of smallest threshold,
    v-parts reversed at delta, form the generator.
    """
    terms = np.asarray(seq.terms, dtype=np.int64)
    s = seq.s
    need = 2 * math.ceil(seq.n / s) + 2 if seq.n else 2
    if terms.shape[0] < need:
        raise GeneratorLengthError(terms.shape[0], need)
    series = SequenceSeries(terms, seq.prime)
    basis = pm_basis(series, terms.shape[0])
    thresholds = []
    for r in range(2 * s):
        dv = _row_poly_degree(basis.coeffs[:, r, :s])
        dp = _row_poly_degree(basis.coeffs[:, r, s:])
        thresholds.append(max(dv, dp + 1, 0))
    chosen = sorted(range(2 * s), key=lambda r: (thresholds[r], r))[:s]
    delta = max(thresholds[r] for r in chosen)
    F = np.zeros((delta + 1, s, s), dtype=np.int64)
    for out_r, r in enumerate(sorted(chosen)):
        d = thresholds[r]
        for i in range(min(d, basis.degree) + 1):
            F[d - i, out_r, :] = basis.coeffs[i, r, :s]
    return PolyMatrix(F, seq.prime)


def generator_residual(F: PolyMatrix, terms: np.ndarray) -> int:
    """Max |residual| of the forward recurrence sum_i F_i S_(k+i) (0 if exact)."""
    p = F.prime.p
    terms = np.asarray(terms, dtype=np.int64)
    worst = 0
    for k in range(terms.shape[0] - F.degree):
        acc = np.zeros((F.rows, terms.shape[2]), dtype=np.int64)
        for i in range(F.degree + 1):
            acc = (acc + _matmul_mod(F.coeff(i), terms[k + i], p)) % p
        worst = max(worst, int(np.abs(acc).max(initial=0)))
    return worst


# ---------------------------------------------------------------------------
# determinants, degrees and co-degrees

def _pow_mod_vec(base: np.ndarray, exp: int, p: int) -> np.ndarray:
    out = np.ones_like(base)
    b = base % p
    while exp:
        if exp & 1:
            out = out * b % p
        b = b * b % p
        exp >>= 1
    return out


def _batched_det_mod(mats: np.ndarray, p: int) -> np.ndarray:
    """Determinants of a (B, s, s) stack over F_p by batched elimination."""
    A = mats.copy() % p
    B, s, _ = A.shape
    det = np.ones(B, dtype=np.int64)
    alive = np.ones(B, dtype=bool)
    idx = np.arange(B)
    for k in range(s):
        nz = A[:, k:, k] != 0
        has = nz.any(axis=1)
        det[~has] = 0
        alive &= has
        first = np.argmax(nz, axis=1)
        piv_rows = k + first
        swap = (piv_rows != k) & alive
        det[swap] = p - det[swap]
        rowk = A[idx, piv_rows, :].copy()
        A[idx, piv_rows, :] = A[:, k, :]
        A[:, k, :] = rowk
        piv = A[:, k, k].copy()
        piv[~alive] = 1
        det = det * piv % p
        if k + 1 < s:
            inv = _pow_mod_vec(piv, p - 2, p)
            factor = A[:, k + 1 :, k] * inv[:, None] % p
            A[:, k + 1 :, k:] = (
                A[:, k + 1 :, k:] - factor[:, :, None] * A[:, None, k, k:]
            ) % p
    det[~alive] = 0
    return det % p


def polymat_det(f: PolyMatrix) -> np.ndarray:
    """Determinant polynomial (ascending coefficients) by evaluation at
    s*deg+1 points and interpolation."""
    if f.rows != f.cols:
        raise PolyMatError("determinant of a non-square matrix")
    s = f.rows
    if s == 0:
        return np.array([1], dtype=np.int64)
    prime = f.prime
    p = prime.p
    npoints = s * f.degree + 1
    length = 1
    while length < npoints:
        length *= 2
    if length <= (1 << prime.k) and p < (1 << NUMPY_MOD_BITS):
        stacked = np.zeros((s, s, length), dtype=np.int64)
        stacked[:, :, : f.degree + 1] = np.moveaxis(f.coeffs, 0, 2)
        vals = np.moveaxis(ntt(stacked, prime), 2, 0)
        dets = _batched_det_mod(vals, p)
        coeffs = ntt(dets, prime, inverse=True)
        if np.any(coeffs[npoints:]):
            raise PolyMatError("interpolated determinant exceeds degree bound")
        out = coeffs[:npoints]
        nz = np.nonzero(out)[0]
        return out[: (nz[-1] + 1)] if nz.size else np.zeros(1, dtype=np.int64)
    if npoints > p:
        raise FieldTooSmallError(
            f"need {npoints} evaluation points, field has only {p}"
        )
    xs = np.arange(npoints, dtype=np.int64)
    vals = np.zeros((npoints, s, s), dtype=np.int64)
    acc = np.zeros((npoints, s, s), dtype=np.int64)
    for k in range(f.degree, -1, -1):
        acc = (acc * xs[:, None, None] + f.coeffs[k]) % p
    vals = acc
    dets = _batched_det_mod(vals, p)
    return _newton_interpolate(xs, dets, p)


def _newton_interpolate(xs: np.ndarray, ys: np.ndarray, p: int) -> np.ndarray:
    """Dense interpolation through (xs, ys) over F_p, ascending coefficients."""
    n = xs.shape[0]
    coef = [int(y) % p for y in ys]
    for j in range(1, n):
        for i in range(n - 1, j - 1, -1):
            denom = pow(int(xs[i] - xs[i - j]) % p, -1, p)
            coef[i] = (coef[i] - coef[i - 1]) * denom % p
    poly = [coef[n - 1]]
    for i in range(n - 2, -1, -1):
        xi = int(xs[i]) % p
        new = [0] * (len(poly) + 1)
        for t in range(len(poly)):
            new[t + 1] = poly[t]
            new[t] = (new[t] - xi * poly[t]) % p
        new[0] = (new[0] + coef[i]) % p
        poly = new
    out = np.array(poly, dtype=np.int64) % p
    nz = np.nonzero(out)[0]
    return out[: (nz[-1] + 1)] if nz.size else np.zeros(1, dtype=np.int64)


def row_reduce(f: PolyMatrix) -> PolyMatrix:
    """Make the leading row-coefficient matrix nonsingular (Popov-like), so
    deg det = sum of row degrees.  Raises DetZeroError for singular input."""
    p = f.prime.p
    coeffs = f.coeffs.copy()
    s = f.rows
    if f.rows != f.cols:
        raise PolyMatError("row reduction expects a square matrix")
    guard = 0
    while True:
        work = PolyMatrix(coeffs, f.prime)
        degs = work.row_degrees()
        if any(d < 0 for d in degs):
            raise DetZeroError("zero row during reduction: det is identically 0")
        lead = work.leading_row_matrix()
        kappa = _left_null_vector(lead, p)
        if kappa is None:
            return work
        support = np.nonzero(kappa)[0]
        target = max(support, key=lambda r: degs[r])
        scale = pow(int(kappa[target]), -1, p)
        coeffs = work.coeffs.copy()
        for r in support:
            if r == target:
                continue
            shift = degs[target] - degs[r]
            factor = int(kappa[r]) * scale % p
            hi = degs[r] + 1
            coeffs[shift : shift + hi, target, :] = (
                coeffs[shift : shift + hi, target, :] + factor * coeffs[:hi, r, :]
            ) % p
        guard += 1
        if guard > sum(max(d, 0) for d in degs) + s + 1:
            raise DetZeroError("row reduction did not converge: det is identically 0")


def _right_null_vector(mat: np.ndarray, p: int):
    """A nonzero x with mat.x = 0 mod p, or None if mat is nonsingular."""
    s = mat.shape[0]
    M = mat.copy() % p
    pivot_cols: list[int] = []
    r = 0
    for c in range(s):
        if r == s:
            break
        nz = np.nonzero(M[r:, c])[0]
        if nz.size == 0:
            continue
        i = r + int(nz[0])
        if i != r:
            M[[r, i]] = M[[i, r]]
        inv = pow(int(M[r, c]), -1, p)
        M[r] = M[r] * inv % p
        hits = np.nonzero(M[:, c])[0]
        for t in hits:
            if t != r:
                M[t] = (M[t] - M[t, c] * M[r]) % p
        pivot_cols.append(c)
        r += 1
    if r == s:
        return None
    free = next(c for c in range(s) if c not in pivot_cols)
    x = np.zeros(s, dtype=np.int64)
    x[free] = 1
    for row_i, c in enumerate(pivot_cols):
        x[c] = (-int(M[row_i, free])) % p
    return x


def _left_null_vector(mat: np.ndarray, p: int):
    """A nonzero kappa with kappa . mat = 0 mod p, or None if nonsingular."""
    x = _right_null_vector(mat.T.copy(), p)
    return x


def degree_and_codegree(f: PolyMatrix) -> tuple[int, int]:
    """(deg det, codeg det); codeg 0 short-circuits on a nonsingular constant
    term, each obtained without forming det when avoidable."""
    if f.rows != f.cols:
        raise PolyMatError("degree analysis expects a square matrix")
    if f.rows == 0:
        return (0, 0)
    reduced = row_reduce(f)
    deg = sum(reduced.row_degrees())
    p = f.prime.p
    const_det = _batched_det_mod(f.constant_term()[None, :, :], p)[0]
    if const_det != 0:
        return (deg, 0)
    det = polymat_det(f)
    nz = np.nonzero(det)[0]
    if nz.size == 0:
        raise DetZeroError("determinant identically zero")
    return (deg, int(nz[0]))
