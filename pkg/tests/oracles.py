"""Independent brute-force oracles for the test suite.

Everything here is deliberately naive: dense elimination, Krylov minimal
polynomials over exact rationals, textbook integer Smith reduction.  These
check the fast paths and must not share code with them.
"""

from fractions import Fraction

import numpy as np

from sela.sparse import SparseIntMatrix


def rank_mod_p(dense, p: int) -> int:
    """Gaussian elimination rank over F_p (p below 2^26 for int64 safety)."""
    A = np.array(dense, dtype=np.int64) % p
    m, n = A.shape
    r = 0
    for c in range(n):
        if r == m:
            break
        nz = np.nonzero(A[r:, c])[0]
        if nz.size == 0:
            continue
        i = r + int(nz[0])
        if i != r:
            A[[r, i]] = A[[i, r]]
        inv = pow(int(A[r, c]), -1, p)
        A[r] = A[r] * inv % p
        below = A[r + 1 :, c] != 0
        if below.any():
            A[r + 1 :][below] = (
                A[r + 1 :][below] - A[r + 1 :][below][:, c : c + 1] * A[r]
            ) % p
        r += 1
    return r


def rank_rational(dense) -> int:
    """Exact rank over Q via fraction-free style elimination."""
    A = [[Fraction(int(x)) for x in row] for row in np.asarray(dense)]
    m = len(A)
    n = len(A[0]) if m else 0
    r = 0
    for c in range(n):
        piv = next((i for i in range(r, m) if A[i][c] != 0), None)
        if piv is None:
            continue
        A[r], A[piv] = A[piv], A[r]
        inv = 1 / A[r][c]
        A[r] = [x * inv for x in A[r]]
        for i in range(m):
            if i != r and A[i][c] != 0:
                f = A[i][c]
                A[i] = [a - f * b for a, b in zip(A[i], A[r])]
        r += 1
        if r == m:
            break
    return r


def solve_rational(dense, b):
    """Exact solution of a nonsingular integer system, as Fractions."""
    n = len(b)
    A = [[Fraction(int(dense[i][j])) for j in range(n)] + [Fraction(int(b[i]))]
         for i in range(n)]
    for c in range(n):
        piv = next((i for i in range(c, n) if A[i][c] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix")
        A[c], A[piv] = A[piv], A[c]
        inv = 1 / A[c][c]
        A[c] = [x * inv for x in A[c]]
        for i in range(n):
            if i != c and A[i][c] != 0:
                f = A[i][c]
                A[i] = [a - f * bb for a, bb in zip(A[i], A[c])]
    return [A[i][n] for i in range(n)]


def integer_smith(dense) -> list[int]:
    """Invariant factors of an integer matrix by elementary operations."""
    A = [[int(x) for x in row] for row in np.asarray(dense)]
    m = len(A)
    n = len(A[0]) if m else 0
    factors = []
    t = 0
    while t < min(m, n):
        piv = None
        best = None
        for i in range(t, m):
            for j in range(t, n):
                if A[i][j] != 0 and (best is None or abs(A[i][j]) < best):
                    best = abs(A[i][j])
                    piv = (i, j)
        if piv is None:
            break
        i0, j0 = piv
        A[t], A[i0] = A[i0], A[t]
        for row in A:
            row[t], row[j0] = row[j0], row[t]
        while True:
            # clear column t
            dirty = False
            for i in range(t + 1, m):
                if A[i][t]:
                    q = round(Fraction(A[i][t], A[t][t]))
                    if q:
                        A[i] = [a - q * b for a, b in zip(A[i], A[t])]
                        dirty = True
                    if A[i][t]:
                        A[t], A[i] = A[i], A[t]
                        dirty = True
            if dirty:
                continue
            # clear row t
            for j in range(t + 1, n):
                if A[t][j]:
                    q = round(Fraction(A[t][j], A[t][t]))
                    if q:
                        for i in range(t, m):
                            A[i][j] -= q * A[i][t]
                        dirty = True
                    if A[t][j]:
                        for row in A:
                            row[t], row[j] = row[j], row[t]
                        dirty = True
                        break
            if not dirty:
                break
        pv = A[t][t]
        offender = None
        for i in range(t + 1, m):
            if any(A[i][j] % pv for j in range(t + 1, n)):
                offender = i
                break
        if offender is not None:
            A[t] = [a + b for a, b in zip(A[t], A[offender])]
            continue
        factors.append(abs(pv))
        t += 1
    return factors


def smith_profile_at(factors: list[int], p: int) -> list[tuple[int, int]]:
    """(exponent, multiplicity) pairs of p-valuations among invariant factors."""
    counts: dict[int, int] = {}
    for f in factors:
        e = 0
        while f % p == 0:
            f //= p
            e += 1
        counts[e] = counts.get(e, 0) + 1
    return sorted(counts.items())


def minpoly_rational(dense) -> list[int]:
    """Minimal polynomial of an integer matrix, monic integer coefficients
    (ascending).  Krylov subspaces over exact rationals, certified by
    evaluating the polynomial at the matrix."""
    A = np.asarray(dense, dtype=object)
    n = A.shape[0]
    assert A.shape[1] == n
    if n == 0:
        return [1]
    rng = np.random.default_rng(0xACE)

    def vector_minpoly(v):
        # echelon basis of Krylov vectors with polynomial bookkeeping
        basis = []  # (reduced vector as Fractions, poly coeffs, lead index)
        w = [Fraction(int(x)) for x in v]
        poly = [Fraction(1)]
        while True:
            red = list(w)
            combo = list(poly) + [Fraction(0)] * 0
            for bv, bp, lead in basis:
                if red[lead] != 0:
                    f = red[lead]
                    red = [a - f * b for a, b in zip(red, bv)]
                    padded = list(bp) + [Fraction(0)] * (len(combo) - len(bp))
                    combo = [a - f * b for a, b in zip(combo, padded)]
            lead = next((i for i, x in enumerate(red) if x != 0), None)
            if lead is None:
                return combo
            inv = 1 / red[lead]
            basis.append(([x * inv for x in red], [x * inv for x in combo], lead))
            # next Krylov vector: A * w where w is the raw (unreduced) power
            w = [sum(Fraction(int(A[i][j])) * w[j] for j in range(n)) for i in range(n)]
            poly = [Fraction(0)] + poly

    def poly_lcm(f, g):
        def poly_divmod(num, den):
            num = list(num)
            q = [Fraction(0)] * max(len(num) - len(den) + 1, 0)
            while len(num) >= len(den) and any(x != 0 for x in num):
                while num and num[-1] == 0:
                    num.pop()
                if len(num) < len(den):
                    break
                coef = num[-1] / den[-1]
                shift = len(num) - len(den)
                q[shift] = coef
                for i, d in enumerate(den):
                    num[i + shift] -= coef * d
                num.pop()
            return q, num

        def poly_gcd(a, b):
            a, b = list(a), list(b)
            while any(x != 0 for x in b):
                _, r = poly_divmod(a, b)
                while r and r[-1] == 0:
                    r.pop()
                a, b = b, r
            lead = a[-1]
            return [x / lead for x in a]

        def poly_mul(a, b):
            out = [Fraction(0)] * (len(a) + len(b) - 1)
            for i, x in enumerate(a):
                for j, y in enumerate(b):
                    out[i + j] += x * y
            return out

        g0 = poly_gcd(f, g)
        q, _ = poly_divmod(f, g0)
        return poly_mul(q, g)

    m = vector_minpoly(np.eye(n, dtype=np.int64)[0] if n else [])
    for t in range(1, min(n, 4)):
        v = rng.integers(-5, 6, size=n)
        m = poly_lcm(m, vector_minpoly(v))
        if len(m) - 1 == n:
            break
    lead = m[-1]
    m = [x / lead for x in m]
    ints = []
    for x in m:
        assert x.denominator == 1, "minimal polynomial of integer matrix is integer"
        ints.append(int(x))
    # certify: m(A) = 0 exactly
    acc = np.zeros((n, n), dtype=object)
    power = np.eye(n, dtype=object)
    for coef in ints:
        acc = acc + coef * power
        power = power @ A
    assert not acc.any(), "minimal polynomial certification failed"
    return ints


def berkowitz_charpoly(dense) -> list[int]:
    """Characteristic polynomial det(xI - A), descending coefficients,
    by the division-free Berkowitz algorithm over exact integers."""
    A = [[int(x) for x in row] for row in np.asarray(dense)]
    n = len(A)
    C = [1]
    for i in range(n):
        R = A[i][:i]
        col = [A[r][i] for r in range(i)]
        M = [row[:i] for row in A[:i]]
        t = [1, -A[i][i]]
        v = col[:]
        for _ in range(i):
            t.append(-sum(R[x] * v[x] for x in range(i)))
            v = [sum(M[r][c] * v[c] for c in range(i)) for r in range(i)]
        new = [0] * (len(C) + 1)
        for k in range(len(new)):
            acc = 0
            for j in range(len(C)):
                if 0 <= k - j < len(t):
                    acc += t[k - j] * C[j]
            new[k] = acc
        C = new
    return C


def berlekamp_massey(seq: list[int], p: int):
    """Linear complexity L and connection polynomial C (ascending, C[0]=1)
    with sum_i C_i s_(n-i) = 0 for n >= L."""
    C = [1]
    B = [1]
    L = 0
    m = 1
    b = 1
    for n in range(len(seq)):
        d = seq[n] % p
        for i in range(1, L + 1):
            if i < len(C):
                d = (d + C[i] * seq[n - i]) % p
        if d == 0:
            m += 1
            continue
        coef = d * pow(b, -1, p) % p
        if len(B) + m > len(C):
            C = C + [0] * (len(B) + m - len(C))
        T = list(C)
        for i, bb in enumerate(B):
            C[i + m] = (C[i + m] - coef * bb) % p
        if 2 * L <= n:
            L = n + 1 - L
            B = T
            b = d
            m = 1
        else:
            m += 1
    while len(C) > L + 1 and C[-1] == 0:
        C.pop()
    return L, C


def trailing_coefficient(coeffs: list[int]) -> int:
    for c in coeffs:
        if c != 0:
            return c
    return 0


# ---------------------------------------------------------------------------
# random instance builders

def random_sparse(rng, rows, cols, nnz, lo=-9, hi=9) -> SparseIntMatrix:
    nnz = min(nnz, rows * cols)
    seen = set()
    triples = []
    while len(triples) < nnz:
        i = int(rng.integers(0, rows))
        j = int(rng.integers(0, cols))
        if (i, j) in seen:
            continue
        v = 0
        while v == 0:
            v = int(rng.integers(lo, hi + 1))
        seen.add((i, j))
        triples.append((i, j, v))
    return SparseIntMatrix.from_triples(rows, cols, triples)


def random_unimodular(rng, n, ops=None) -> np.ndarray:
    """Product of elementary integer row operations; determinant +-1."""
    U = np.eye(n, dtype=object)
    ops = 2 * n if ops is None else ops
    for _ in range(ops):
        i, j = rng.integers(0, n, size=2)
        if i == j:
            continue
        c = int(rng.integers(-2, 3))
        if c == 0:
            continue
        U[i] = U[i] + c * U[j]
    perm = rng.permutation(n)
    U = U[perm]
    for i in range(n):
        if rng.integers(0, 2):
            U[i] = -U[i]
    return U


def plant_smith(rng, m, n, factors) -> SparseIntMatrix:
    """Matrix with prescribed invariant factors (unimodular scrambling)."""
    D = np.zeros((m, n), dtype=object)
    for i, f in enumerate(factors):
        D[i, i] = f
    A = random_unimodular(rng, m) @ D @ random_unimodular(rng, n)
    assert np.abs(A.astype(np.int64)).max(initial=0) < (1 << 62)
    A = A.astype(np.int64)
    triples = [
        (i, j, int(A[i, j])) for i in range(m) for j in range(n) if A[i, j] != 0
    ]
    return SparseIntMatrix.from_triples(m, n, triples)
